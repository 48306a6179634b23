#include <doctest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <limits>
#include <vector>

#include "drbart/errors.hpp"
#include "drbart/rng.hpp"
#include "drbart/special_math.hpp"
#include "test_support.hpp"

using namespace drbart;

namespace {

double log_add(double a, double b) {
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Independent GIG oracle: unnormalized kernel integrated by quadrature,
// shifted by its value at the mode to stay in range.
struct GigOracle {
  GigParams p;
  double log_peak = 0.0;
  double z = 0.0;

  explicit GigOracle(GigParams params) : p(params) {
    const double l = p.lambda - 1.0;
    const double mode = (l + std::sqrt(l * l + p.psi * p.chi)) / p.psi;
    log_peak = log_kernel(mode);
    z = integrate(0.0, std::numeric_limits<double>::infinity());
  }
  double log_kernel(double t) const {
    return (p.lambda - 1.0) * std::log(t) - 0.5 * (p.psi * t + p.chi / t);
  }
  double kernel(double t) const { return t > 0.0 ? std::exp(log_kernel(t) - log_peak) : 0.0; }
  // Integrates over s = log t in unit panels so narrow peaks are never missed.
  double integrate(double a, double b) const {
    const double l = p.lambda - 1.0;
    const double centre = std::log((l + std::sqrt(l * l + p.psi * p.chi)) / p.psi);
    const double s_lo = a > 0.0 ? std::log(a) : centre - 40.0;
    const double s_hi = std::isinf(b) ? centre + 40.0 : std::log(b);
    auto g = [this](double s) { return kernel(std::exp(s)) * std::exp(s); };
    double total = 0.0;
    for (double s = s_lo; s < s_hi; s += 0.5) {
      const double e = std::min(s + 0.5, s_hi);
      total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, s, e, 10, 1e-14);
    }
    return total;
  }
  double cdf(double t) const { return t <= 0.0 ? 0.0 : std::min(1.0, integrate(0.0, t) / z); }
  double log_normalizer() const { return std::log(z) + log_peak; }
};

double boost_log_k(double nu, double x, bool& ok) {
  ok = true;
  try {
    const double v = boost::math::cyl_bessel_k(nu, x);
    if (!(v > 0.0) || !std::isfinite(v)) ok = false;
    return std::log(v);
  } catch (...) {
    ok = false;
    return 0.0;
  }
}

}  // namespace

TEST_CASE("log_bessel_k closed forms, symmetry and domain") {
  CHECK(log_bessel_k(0.5, 1.0) ==
        doctest::Approx(std::log(std::sqrt(kPi / 2.0) * std::exp(-1.0))).epsilon(1e-14));
  CHECK(log_bessel_k(0.5, 1.0) == doctest::Approx(-0.7743).epsilon(1e-4));
  CHECK(log_bessel_k(-3.2, 4.0) == log_bessel_k(3.2, 4.0));
  for (double x : {0.01, 0.7, 3.0, 40.0}) {
    // K_{3/2}(x) = sqrt(pi/(2x)) e^{-x} (1 + 1/x)
    const double ref = 0.5 * std::log(kPi / (2.0 * x)) - x + std::log1p(1.0 / x);
    CHECK(log_bessel_k(1.5, x) == doctest::Approx(ref).epsilon(1e-13));
  }
  CHECK_THROWS_AS(log_bessel_k(1.0, 0.0), DomainError);
  CHECK_THROWS_AS(log_bessel_k(1.0, -2.0), DomainError);
}

TEST_CASE("log_bessel_k agrees with Boost across branches") {
  const double orders[] = {0.0,  0.1,  0.5,  1.0,   1.7,  2.5,   10.0,  25.3,
                           49.9, 59.9, 60.0, 60.1,  75.0, 100.0, 150.0, 412.5};
  const double xs[] = {1e-3, 0.1, 0.5, 1.0, 1.99, 2.0, 2.01, 5.0, 10.0, 50.0, 100.0, 300.0};
  int compared = 0;
  for (double nu : orders) {
    for (double x : xs) {
      bool ok = false;
      const double ref = boost_log_k(nu, x, ok);
      if (!ok) continue;
      ++compared;
      INFO("nu=" << nu << " x=" << x);
      CHECK(std::fabs(log_bessel_k(nu, x) - ref) <= 1e-11 * std::max(1.0, std::fabs(ref)));
    }
  }
  CHECK(compared > 150);
}

TEST_CASE("log_bessel_k satisfies the three-term recurrence") {
  for (double x : {0.1, 1.0, 10.0}) {
    for (int p = 1; p <= 50; ++p) {
      const double lhs = log_bessel_k(p + 1, x);
      const double rhs = log_add(log_bessel_k(p - 1, x), std::log(2.0 * p / x) + log_bessel_k(p, x));
      INFO("p=" << p << " x=" << x);
      CHECK(std::fabs(std::expm1(lhs - rhs)) < 1e-10);
    }
    // Across the switch to the asymptotic expansion and beyond, non-integer orders too.
    for (double p = 50.25; p <= 400.0; p += 7.0) {
      const double lhs = log_bessel_k(p + 1, x);
      const double rhs = log_add(log_bessel_k(p - 1, x), std::log(2.0 * p / x) + log_bessel_k(p, x));
      INFO("p=" << p << " x=" << x);
      CHECK(std::fabs(std::expm1(lhs - rhs)) < 1e-9);
    }
  }
}

TEST_CASE("log_bessel_k is decreasing in x and log-convex in order") {
  for (double nu : {0.0, 0.3, 4.0, 59.5, 61.0, 200.0}) {
    double prev = log_bessel_k(nu, 1e-3);
    for (double x = 2e-3; x < 500.0; x *= 1.3) {
      const double cur = log_bessel_k(nu, x);
      CHECK(cur < prev);
      prev = cur;
    }
  }
  for (double x : {0.05, 1.0, 7.0, 80.0}) {
    for (double nu = -300.0; nu <= 300.0; nu += 0.75) {
      const double h = 0.75;
      const double second =
          log_bessel_k(nu + h, x) - 2.0 * log_bessel_k(nu, x) + log_bessel_k(nu - h, x);
      INFO("nu=" << nu << " x=" << x);
      CHECK(second >= -1e-9 * std::max(1.0, std::fabs(log_bessel_k(nu, x))));
    }
  }
}

TEST_CASE("GIG normalizer matches quadrature") {
  const GigParams cases[] = {{0.3, 2.0, 0.5},    {-0.5, 1.0, 4.0},   {2.5, 0.1, 3.0},
                             {-30.0, 200.0, 0.8}, {0.0, 0.02, 0.02},  {0.9, 0.01, 0.05},
                             {45.0, 3.0, 60.0},   {-120.0, 400.0, 2.0}};
  for (const GigParams& p : cases) {
    GigOracle o(p);
    INFO("lambda=" << p.lambda << " psi=" << p.psi << " chi=" << p.chi);
    CHECK(log_gig_normalizer(p) == doctest::Approx(o.log_normalizer()).epsilon(1e-8));
  }
}

TEST_CASE("GIG Monte Carlo moments match the Bessel ratio formula") {
  // Triples span every branch of the sampler: small omega with |lambda| < 1,
  // moderate omega, large |lambda|, and the inverse-Gaussian case.
  const GigParams triples[20] = {
      {-0.5, 1.0, 1.0},  {-0.5, 4.0, 0.25}, {0.3, 0.01, 0.02}, {0.0, 0.03, 0.03}, {0.9, 0.05, 0.01},
      {-0.7, 0.02, 0.2}, {0.5, 1.0, 1.0},   {1.5, 0.5, 2.0},   {1.0, 0.1, 0.1},   {2.5, 2.0, 0.3},
      {-3.0, 5.0, 1.0},  {6.0, 1.0, 8.0},   {-12.5, 40.0, 2.0}, {25.0, 3.0, 0.1}, {0.2, 30.0, 40.0},
      {-0.2, 9.0, 16.0}, {3.0, 100.0, 1.0}, {-40.0, 200.0, 5.0}, {0.8, 0.5, 0.5}, {-1.8, 0.3, 0.6}};
  Rng rng(101);
  const int n = 200000;
  for (const GigParams& p : triples) {
    const double omega = std::sqrt(p.psi * p.chi);
    const double scale = std::sqrt(p.chi / p.psi);
    const double k0 = boost::math::cyl_bessel_k(p.lambda, omega);
    const double k1 = boost::math::cyl_bessel_k(p.lambda + 1.0, omega);
    const double k2 = boost::math::cyl_bessel_k(p.lambda + 2.0, omega);
    const double mean = scale * k1 / k0;
    const double var = scale * scale * (k2 / k0 - (k1 / k0) * (k1 / k0));
    std::vector<double> draws(n);
    for (double& d : draws) d = sample_gig(rng, p);
    const auto m = testing::moments(draws);
    INFO("lambda=" << p.lambda << " psi=" << p.psi << " chi=" << p.chi);
    CHECK(std::fabs(m.mean - mean) < 3.0 * std::sqrt(var / n));
    for (double d : draws) REQUIRE(d > 0.0);
  }
}

TEST_CASE("GIG histogram matches quadrature bin masses") {
  const GigParams cases[] = {{0.3, 0.01, 0.02}, {-0.5, 1.0, 1.0}, {4.0, 2.0, 6.0},
                             {-150.0, 200.0, 0.5}, {0.0, 0.05, 0.08}};
  Rng rng(202);
  const int n = 1000000;
  for (const GigParams& p : cases) {
    GigOracle o(p);
    std::vector<double> draws(n);
    for (double& d : draws) d = sample_gig(rng, p);
    std::sort(draws.begin(), draws.end());
    // 30 bins between the 0.5% and 99.5% empirical quantiles.
    const double lo = draws[n / 200], hi = draws[n - n / 200];
    const int bins = 30;
    double worst = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double a = lo + (hi - lo) * b / bins, c = lo + (hi - lo) * (b + 1) / bins;
      const double prob = o.integrate(a, c) / o.z;
      const auto first = std::lower_bound(draws.begin(), draws.end(), a);
      const auto last = std::lower_bound(draws.begin(), draws.end(), c);
      const double count = static_cast<double>(last - first);
      const double se = std::sqrt(n * prob * (1.0 - prob));
      worst = std::max(worst, std::fabs(count - n * prob) / std::max(se, 1.0));
    }
    INFO("lambda=" << p.lambda << " psi=" << p.psi << " chi=" << p.chi);
    CHECK(worst < 4.0);
  }
}

TEST_CASE("GIG reciprocal symmetry") {
  Rng rng(303);
  const GigParams cases[] = {{0.4, 0.3, 2.0}, {-2.2, 1.0, 0.1}, {0.1, 0.02, 0.05}};
  for (const GigParams& p : cases) {
    const int n = 100000;
    std::vector<double> a(n), b(n);
    for (double& v : a) v = 1.0 / sample_gig(rng, p);
    for (double& v : b) v = sample_gig(rng, {-p.lambda, p.chi, p.psi});
    const double d = testing::ks_distance2(a, b);
    CHECK(testing::kolmogorov_pvalue(d, n / 2.0) > 0.01);
  }
}

TEST_CASE("gamma and inverse gamma samplers") {
  Rng rng(404);
  const int n = 1000000;
  for (auto [shape, rate] : {std::pair{2.5, 3.0}, {0.3, 1.0}, {50.0, 50.0}, {208.0, 208.0}}) {
    std::vector<double> g(n);
    for (double& v : g) v = sample_gamma(rng, shape, rate);
    const auto m = testing::moments(g);
    CHECK(std::fabs(m.mean - shape / rate) < 3.0 * std::sqrt(shape / (rate * rate) / n));
  }
  for (auto [shape, rate] : {std::pair{3.5, 2.0}, {10.0, 4.0}, {208.0, 208.0}}) {
    std::vector<double> ig(n);
    for (double& v : ig) v = sample_inverse_gamma(rng, shape, rate);
    const double mean = rate / (shape - 1.0);
    const double var = mean * mean / (shape - 2.0);
    const auto m = testing::moments(ig);
    CHECK(std::fabs(m.mean - mean) < 3.0 * std::sqrt(var / n));
  }
  CHECK_THROWS_AS(sample_gamma(rng, 0.0, 1.0), DomainError);
  CHECK_THROWS_AS(sample_gamma(rng, 1.0, -1.0), DomainError);
  CHECK_THROWS_AS(sample_inverse_gamma(rng, -1.0, 1.0), DomainError);
  CHECK_THROWS_AS(sample_gig(rng, {1.0, 0.0, 1.0}), DomainError);
}

TEST_CASE("log_sum_exp and normal helpers") {
  const std::vector<double> one = {3.25};
  CHECK(log_sum_exp(one) == 3.25);
  const std::vector<double> tiny = {-1000.0, -1000.0};
  CHECK(log_sum_exp(tiny) == doctest::Approx(-1000.0 + std::log(2.0)).epsilon(1e-15));
  const std::vector<double> huge = {800.0, 799.0};
  CHECK(log_sum_exp(huge) == doctest::Approx(800.0 + std::log1p(std::exp(-1.0))).epsilon(1e-15));
  CHECK(std::isinf(log_sum_exp(std::vector<double>{})));
  const double ninf = -std::numeric_limits<double>::infinity();
  CHECK(log_sum_exp(std::vector<double>{ninf, ninf}) == ninf);

  boost::math::normal_distribution<double> nd;
  for (double z = -8.0; z <= 8.0; z += 0.37) {
    CHECK(normal_cdf(z) == doctest::Approx(boost::math::cdf(nd, z)).epsilon(1e-14));
    CHECK(std::exp(normal_log_pdf(z, 1.0)) == doctest::Approx(boost::math::pdf(nd, z)).epsilon(1e-14));
  }
}
