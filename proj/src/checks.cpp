#include "drbart/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "drbart/priors.hpp"
#include "drbart/rng.hpp"
#include "drbart/special_math.hpp"

namespace drbart {

namespace {

class Timer {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

struct Running {
  double n = 0.0, sum = 0.0, sq = 0.0;
  void add(double v) {
    n += 1.0;
    sum += v;
    sq += v * v;
  }
  double mean() const { return sum / n; }
  double var() const { return (sq - sum * sum / n) / (n - 1.0); }
  double se() const { return std::sqrt(var() / n); }
};

}  // namespace

CheckResult check_prior_trees(std::uint64_t seed, int trees) {
  Timer t;
  CheckResult r{"prior tree finiteness and branching moments", false, "", 0.0};
  Rng rng(seed);
  const BartHyperParams hp;
  const SplitSpace space = SplitSpace::continuous(1, true);
  Running d1, d2;
  double single = 0.0;
  try {
    for (int i = 0; i < trees; ++i) {
      const Tree tree = sample_prior_tree(rng, hp.alpha, hp.beta, space);
      const auto per = nodes_per_depth(tree);
      single += tree.leaf_count() == 1;
      d1.add(per.size() > 1 ? static_cast<double>(per[1]) : 0.0);
      d2.add(per.size() > 2 ? static_cast<double>(per[2]) : 0.0);
    }
  } catch (const std::runtime_error& e) {
    r.detail = e.what();
    r.seconds = t.seconds();
    return r;
  }
  const double frac = single / trees;
  r.pass = std::fabs(frac - 0.05) < 0.005 && std::fabs(d1.mean() - 1.9) < 3.0 * d1.se() &&
           std::fabs(d2.mean() - 0.9025) < 3.0 * d2.se();
  r.detail = fmt("single-leaf %.4f, depth-1 %.4f (z %.2f), depth-2 %.4f", frac, d1.mean(),
                 (d1.mean() - 1.9) / d1.se(), d2.mean()) +
             fmt(" (z %.2f)", (d2.mean() - 0.9025) / d2.se());
  r.seconds = t.seconds();
  return r;
}

CheckResult check_leaf_scale_prior(std::uint64_t seed, int draws) {
  Timer t;
  CheckResult r{"leaf-scale prior moments", false, "", 0.0};
  Rng rng(seed);
  const int mv = 100;
  const VarianceHyperParams v = VarianceHyperParams::from_a0(mv, 1.0);
  Running lt;
  std::vector<double> sums;
  double sum = 0.0;
  for (int i = 0; i < draws; ++i) {
    const double l = std::log(sample_leaf_scale_prior(rng, v.a, v.b));
    lt.add(l);
    sum += l;
    if ((i + 1) % mv == 0) {
      sums.push_back(sum);
      sum = 0.0;
    }
  }
  std::sort(sums.begin(), sums.end());
  double ks = 0.0;
  const double n = static_cast<double>(sums.size());
  for (std::size_t i = 0; i < sums.size(); ++i) {
    const double f = normal_cdf(sums[i]);
    ks = std::max({ks, f - i / n, (i + 1) / n - f});
  }
  const double rel = lt.var() / 0.01 - 1.0;
  r.pass = std::fabs(lt.mean()) < 0.005 && std::fabs(rel) < 0.02 && ks < 0.02;
  r.detail = fmt("mean log tau %.5f, var %.6f (%+.2f%%), KS %.4f", lt.mean(), lt.var(), 100.0 * rel, ks);
  r.seconds = t.seconds();
  return r;
}

CheckResult check_a0_calibration(std::uint64_t seed, int ensembles) {
  Timer t;
  CheckResult r{"a0 calibration", false, "", 0.0};
  Rng rng(seed);
  const double d = 4.0;
  const VarianceHyperParams v = VarianceHyperParams::from_a0(100, calibrate_a0(d));
  int inside = 0;
  for (int i = 0; i < ensembles; ++i) {
    double s = 0.0;
    for (int h = 0; h < v.m_v; ++h) s += std::log(sample_leaf_scale_prior(rng, v.a, v.b));
    inside += std::fabs(s) < std::log(d);
  }
  const double p = static_cast<double>(inside) / ensembles;
  r.pass = std::fabs(p - 0.95) < 0.01;
  r.detail = fmt("a0 %.4f, Pr(exp(v) in (1/4, 4)) = %.4f", v.a0, p);
  r.seconds = t.seconds();
  return r;
}

std::vector<CheckResult> prior_checks(std::uint64_t seed) {
  return {check_prior_trees(seed), check_leaf_scale_prior(Rng::derive(seed, 1)),
          check_a0_calibration(Rng::derive(seed, 2))};
}

}  // namespace drbart
