#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <vector>

#include "drbart/errors.hpp"
#include "drbart/simbench.hpp"
#include "drbart/special_math.hpp"
#include "test_support.hpp"

using namespace drbart;
using boost::math::quadrature::gauss_kronrod;

namespace {

double phi(double z, double sd) { return std::exp(-0.5 * (z / sd) * (z / sd)) / (sd * std::sqrt(2.0 * kPi)); }

// CDF of the error at x, tabulated from the density by quadrature.
std::vector<double> error_cdf_table(double x, double lo, double h, int cells) {
  std::vector<double> c(cells + 1, 0.0);
  auto f = [x](double e) { return dgp_error_density(x, e); };
  // mass below lo
  c[0] = gauss_kronrod<double, 61>::integrate(f, -80.0, lo, 15, 1e-13);
  for (int k = 0; k < cells; ++k)
    c[k + 1] = c[k] + gauss_kronrod<double, 15>::integrate(f, lo + k * h, lo + (k + 1) * h, 0);
  return c;
}

}  // namespace

TEST_CASE("DGP mean and mixture weight") {
  DgpSpec base;
  CHECK(dgp_f0(base, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(dgp_lambda(0.8) == 1.0);
  DgpSpec quad{DgpKind::Quadratic, 15.0, 10, 1};
  CHECK(dgp_f0(quad, 0.5) == 0.0);
  CHECK(dgp_f0(quad, 0.9) == doctest::Approx(15.0 * 0.16).epsilon(1e-14));
  CHECK_THROWS_AS((DgpSpec{DgpKind::Quadratic, -1.0, 10, 1}).validate(), InputError);
  CHECK_THROWS_AS((DgpSpec{DgpKind::Base, 0.0, 0, 1}).validate(), InputError);
  CHECK(parse_dgp("GapX") == DgpKind::GapX);
  CHECK_THROWS_AS(parse_dgp("uniform"), UsageError);
}

TEST_CASE("true density: normalization, x = 0.8 law and skew") {
  DgpSpec base;
  for (double x : {0.0, 0.1, 0.3, 0.5, 0.8, 1.0}) {
    auto f = [&](double e) { return dgp_error_density(x, e); };
    const double mass = gauss_kronrod<double, 61>::integrate(f, -80.0, -5.0, 15, 1e-13) +
                        gauss_kronrod<double, 61>::integrate(f, -5.0, 10.0, 15, 1e-13);
    CHECK(std::fabs(mass - 1.0) < 1e-6);
  }
  const std::vector<double> grid = linspace(-3.0, 5.0, 801);
  const auto p = dgp_true_density(0.8, grid, base);
  const double mu = dgp_f0(base, 0.8) + 1.0;
  for (std::size_t j = 0; j < grid.size(); ++j) CHECK(p[j] == doctest::Approx(phi(grid[j] - mu, 0.3)).epsilon(1e-13));

  const auto q = dgp_true_density(0.5, grid, base);
  const std::size_t mode = static_cast<std::size_t>(std::max_element(q.begin(), q.end()) - q.begin());
  double mean = 0.0, mass = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    mean += grid[j] * q[j];
    mass += q[j];
  }
  CHECK(grid[mode] > mean / mass);  // long left tail pulls the mean below the mode
}

TEST_CASE("error draws follow the analytic density") {
  Rng rng(1);
  const int n = 1000000;
  for (double x : {0.1, 0.5, 0.8}) {
    std::vector<double> e(n);
    for (double& v : e) v = dgp_error(rng, x);
    const double lo = -40.0, hi = 5.0;
    const int cells = 45000;
    const double h = (hi - lo) / cells;
    const auto c = error_cdf_table(x, lo, h, cells);
    const double ks = testing::ks_distance(e, [&](double v) {
      if (v <= lo) return c[0];
      if (v >= hi) return 1.0;
      const double t = (v - lo) / h;
      const int k = static_cast<int>(t);
      return c[k] + (t - k) * (c[k + 1] - c[k]);
    });
    CHECK(ks < 0.01);
    CHECK(testing::kolmogorov_pvalue(ks, n) > 1e-3);
  }
}

TEST_CASE("dgp_sample: determinism and covariate designs") {
  DgpSpec s{DgpKind::Base, 0.0, 500, 7};
  CHECK(dgp_sample(s).y == dgp_sample(s).y);
  s.seed = 8;
  const Dataset other = dgp_sample(s);
  s.seed = 7;
  CHECK(!(other.y == dgp_sample(s).y));

  DgpSpec gap{DgpKind::GapX, 0.0, 200000, 3};
  const Dataset g = dgp_sample(gap);
  double mid = 0.0;
  for (double x : g.x) mid += x >= 0.4 && x < 0.6;
  CHECK(std::fabs(mid / g.n() - 0.05) < 0.003);

  DgpSpec irr{DgpKind::Irrelevant14, 0.0, 100000, 4};
  const Dataset d = dgp_sample(irr);
  REQUIRE(d.p == 15);
  auto column = [&](std::size_t j) {
    std::vector<double> c(d.n());
    for (std::size_t i = 0; i < d.n(); ++i) c[i] = d.x[i * d.p + j];
    return c;
  };
  auto corr = [](const std::vector<double>& a, const std::vector<double>& b) {
    const auto ma = testing::moments(a), mb = testing::moments(b);
    double c = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) c += (a[i] - ma.mean) * (b[i] - mb.mean);
    return c / (a.size() - 1) / std::sqrt(ma.var * mb.var);
  };
  const auto c0 = column(0);
  for (std::size_t j = 1; j < 15; ++j) {
    const auto cj = column(j);
    CHECK(testing::ks_distance(cj, [](double v) { return std::clamp(v, 0.0, 1.0); }) < 0.01);
    CHECK(std::fabs(corr(c0, cj)) < 0.015);
    if (j > 1) CHECK(std::fabs(corr(column(1), cj) - 0.3) < 0.015);
  }
  CHECK(dgp_probe_row(irr, 0.2) == std::vector<double>{0.2, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5,
                                                         0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5});
}

TEST_CASE("Wasserstein-1 on grids") {
  const std::vector<double> grid = linspace(-10.0, 11.0, 4201);
  std::vector<double> p(grid.size()), q(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    p[j] = phi(grid[j], 1.0);
    q[j] = phi(grid[j] - 1.0, 1.0);
  }
  CHECK(wasserstein1(grid, p, grid, p) == 0.0);
  CHECK(wasserstein1(grid, p, grid, q) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(wasserstein1(grid, p, grid, q) == wasserstein1(grid, q, grid, p));
  const std::vector<double> shifted = linspace(-10.0, 11.5, 4201);
  CHECK_THROWS_AS(wasserstein1(grid, p, shifted, q), DomainError);

  Rng rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<std::vector<double>> d(3, std::vector<double>(grid.size()));
    for (auto& dens : d) {
      const double m1 = rng.normal(0, 2), m2 = rng.normal(0, 2), s1 = rng.uniform(0.2, 2), s2 = rng.uniform(0.2, 2);
      const double w = rng.uniform();
      for (std::size_t j = 0; j < grid.size(); ++j) dens[j] = w * phi(grid[j] - m1, s1) + (1 - w) * phi(grid[j] - m2, s2);
    }
    const double ab = wasserstein1(grid, d[0], grid, d[1]);
    const double bc = wasserstein1(grid, d[1], grid, d[2]);
    const double ac = wasserstein1(grid, d[0], grid, d[2]);
    CHECK(ac <= ab + bc + 1e-6);
  }
}

TEST_CASE("band coverage") {
  const std::vector<double> grid = linspace(-5.0, 5.0, 1001);
  std::vector<double> truth(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) truth[j] = phi(grid[j], 1.0);
  CredibleBand exact{truth, truth, 0.95};
  CHECK(band_coverage(exact, grid, truth));
  CredibleBand low = exact;
  low.upper[500] = 0.5 * truth[500];
  low.lower[500] = 0.0;
  CHECK(!band_coverage(low, grid, truth));
  CredibleBand tails = exact;
  tails.upper[0] = 0.0;  // outside the HDR: ignored
  tails.lower[0] = 0.0;
  CHECK(band_coverage(tails, grid, truth));

  // Random perturbations against a direct scan of the HDR intervals.
  Rng rng(3);
  const HdrRegion hdr = hdr_interval(grid, truth, 0.95);
  for (int rep = 0; rep < 500; ++rep) {
    CredibleBand b{truth, truth, 0.95};
    for (std::size_t j = 0; j < grid.size(); ++j) {
      b.lower[j] = truth[j] - std::fabs(rng.normal(0.0, 1e-3));
      b.upper[j] = truth[j] + std::fabs(rng.normal(0.0, 1e-3));
    }
    const int bad = static_cast<int>(rng.index(4));
    for (int k = 0; k < bad; ++k) {
      const std::size_t j = rng.index(grid.size());
      if (rng.bernoulli(0.5))
        b.lower[j] = truth[j] + 1e-4;
      else
        b.upper[j] = truth[j] - 1e-4;
    }
    bool scan = true;
    for (std::size_t j = 0; j < grid.size(); ++j)
      if (hdr.contains(grid[j]) && (truth[j] < b.lower[j] || truth[j] > b.upper[j])) scan = false;
    CHECK(band_coverage(b, grid, truth) == scan);
  }
}

TEST_CASE("predictive coverage: calibration and degenerate intervals") {
  Rng rng(4);
  PosteriorDraw d;
  d.sigma0_sq = 0.01;
  d.mean = Ensemble(EnsembleKind::Mean, 0);
  d.var = Ensemble(EnsembleKind::Variance, 0);
  Tree t(0.0);
  const auto [l, r] = t.split(0, SplitRule{kLatentAxis, 0.3}, -0.2, 0.1);
  t.split(r, SplitRule{0, 0.5}, 0.3, 0.05);
  d.mean.trees.push_back(t);
  Tree v(0.0);
  v.split(0, SplitRule{0, 0.6}, -0.5, 0.4);
  d.var.trees.push_back(v);
  (void)l;

  Dataset test;
  test.p = 1;
  const int n = 4000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.uniform(), u = rng.uniform();
    const double xs[1] = {x};
    const Point pt{xs, u};
    test.x.push_back(x);
    test.y.push_back(d.mean.evaluate(pt) + 0.1 * std::exp(0.5 * d.var.evaluate(pt)) * rng.normal());
  }
  const Standardization id = Standardization::identity(1);
  const std::vector<double> grid = linspace(-1.5, 1.5, 3001);
  const std::vector<PosteriorDraw> draws{d};
  const double cov = predictive_coverage(draws, test, id, grid, 0.95);
  CHECK(std::fabs(cov - 0.95) < 3.0 * std::sqrt(0.95 * 0.05 / n) + 0.002);

  PosteriorDraw spike = d;
  spike.sigma0_sq = 1e-8;
  const std::vector<PosteriorDraw> spikes{spike};
  const std::vector<double> fine = linspace(-0.5, 0.5, 100001);
  Dataset few = test;
  few.x.resize(400);
  few.y.resize(400);
  CHECK(predictive_coverage(spikes, few, id, fine, 0.95) < 0.02);
}

TEST_CASE("Geweke: prior-only successive chain agrees with the prior") {
  GewekeConfig g;
  g.sweeps_per_round = 0;
  g.rounds = 4000;
  g.prior_draws = 4000;
  g.seed = 5;
  const GewekeResult r = geweke_harness(g);
  CHECK(r.stats.size() == 16);
  CHECK(r.max_abs_z() < 4.0);
}

TEST_CASE("Geweke: Gibbs latent updates pass, a biased birth ratio is caught") {
  GewekeConfig g;
  g.latent_update = LatentUpdate::Gibbs;
  g.seed = 6;
  const GewekeResult ok = geweke_harness(g);
  for (const GewekeStat& s : ok.stats) {
    INFO(s.name << " z=" << s.z);
    CHECK(std::fabs(s.z) < 4.0);
  }
  g.birth_log_bias = std::log(2.0);
  CHECK(geweke_harness(g).max_abs_z() > 6.0);
}
