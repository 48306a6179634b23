#include "drbart/simbench.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include "drbart/errors.hpp"
#include "drbart/special_math.hpp"

namespace drbart {

namespace {

constexpr int kIrrelevantAxes = 14;
constexpr double kIrrelevantCorrelation = 0.3;

// Cumulative trapezoid CDF on a grid.
std::vector<double> grid_cdf(std::span<const double> grid, std::span<const double> p) {
  std::vector<double> c(grid.size(), 0.0);
  for (std::size_t j = 1; j < grid.size(); ++j)
    c[j] = c[j - 1] + 0.5 * (p[j] + p[j - 1]) * (grid[j] - grid[j - 1]);
  return c;
}

}  // namespace

const char* dgp_name(DgpKind k) {
  switch (k) {
    case DgpKind::Base: return "base";
    case DgpKind::Irrelevant14: return "irrelevant14";
    case DgpKind::GapX: return "gapx";
    case DgpKind::Quadratic: return "quadratic";
  }
  return "?";
}

DgpKind parse_dgp(const std::string& s) {
  std::string t = s;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  for (DgpKind k : {DgpKind::Base, DgpKind::Irrelevant14, DgpKind::GapX, DgpKind::Quadratic})
    if (t == dgp_name(k)) return k;
  throw UsageError("unknown DGP '" + s + "' (expected base, irrelevant14, gapx or quadratic)");
}

void DgpSpec::validate() const {
  if (n < 1) throw InputError("DGP sample size must be at least 1");
  if (kind == DgpKind::Quadratic && !(a >= 0.0)) throw InputError("quadratic DGP needs a >= 0");
}

double dgp_f0(const DgpSpec& spec, double x) {
  if (spec.kind == DgpKind::Quadratic) return spec.a * (x - 0.5) * (x - 0.5);
  const double e = std::exp(15.0 * (x - 0.5));
  return 5.0 * e / (1.0 + e) - 4.0 * x;
}

double dgp_lambda(double x) { return std::exp(-10.0 * (x - 0.8) * (x - 0.8)); }

double dgp_error(Rng& rng, double x) {
  if (rng.uniform() < dgp_lambda(x)) return rng.normal(2.0 * x - 0.6, 0.3);
  return std::log(sample_gamma(rng, 0.5 + x * x, 1.0));
}

double dgp_error_density(double x, double e) {
  const double lam = dgp_lambda(x);
  const double shape = 0.5 + x * x;
  const double normal = std::exp(normal_log_pdf(e - (2.0 * x - 0.6), 0.3));
  const double log_gamma = std::exp(shape * e - std::exp(e) - std::lgamma(shape));
  return lam * normal + (1.0 - lam) * log_gamma;
}

std::vector<double> dgp_covariates(Rng& rng, const DgpSpec& spec, int n) {
  const std::size_t p = spec.p();
  std::vector<double> x;
  x.reserve(static_cast<std::size_t>(n) * p);
  // Pearson correlation r between uniforms needs normal correlation 2 sin(pi r / 6).
  const double rho = 2.0 * std::sin(kPi * kIrrelevantCorrelation / 6.0);
  for (int i = 0; i < n; ++i) {
    double x0 = rng.uniform();
    if (spec.kind == DgpKind::GapX) {
      const double c = rng.uniform();
      x0 = c < 0.475 ? rng.uniform(0.0, 0.4) : c < 0.525 ? rng.uniform(0.4, 0.6) : rng.uniform(0.6, 1.0);
    }
    x.push_back(x0);
    if (spec.kind == DgpKind::Irrelevant14) {
      const double common = rng.normal();
      for (int j = 0; j < kIrrelevantAxes; ++j)
        x.push_back(normal_cdf(std::sqrt(rho) * common + std::sqrt(1.0 - rho) * rng.normal()));
    }
  }
  return x;
}

Dataset dgp_sample(const DgpSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset d;
  d.p = spec.p();
  d.x = dgp_covariates(rng, spec, spec.n);
  d.y.resize(static_cast<std::size_t>(spec.n));
  for (std::size_t i = 0; i < d.y.size(); ++i) {
    const double x0 = d.x[i * d.p];
    d.y[i] = dgp_f0(spec, x0) + dgp_error(rng, x0);
  }
  return d;
}

std::vector<double> dgp_true_density(double x, std::span<const double> y_grid,
                                     const DgpSpec& spec) {
  std::vector<double> out(y_grid.size());
  const double f = dgp_f0(spec, x);
  for (std::size_t j = 0; j < y_grid.size(); ++j) out[j] = dgp_error_density(x, y_grid[j] - f);
  return out;
}

std::vector<double> dgp_probe_row(const DgpSpec& spec, double x) {
  std::vector<double> row(spec.p(), 0.5);
  row[0] = x;
  return row;
}

double wasserstein1(std::span<const double> grid_p, std::span<const double> p,
                    std::span<const double> grid_q, std::span<const double> q) {
  if (grid_p.size() != p.size() || grid_q.size() != q.size())
    throw DomainError("density and grid lengths differ");
  if (!std::equal(grid_p.begin(), grid_p.end(), grid_q.begin(), grid_q.end()))
    throw DomainError("densities are on different grids");
  const std::vector<double> a = grid_cdf(grid_p, p), b = grid_cdf(grid_q, q);
  double w = 0.0;
  for (std::size_t j = 1; j < a.size(); ++j)
    w += 0.5 * (std::fabs(a[j] - b[j]) + std::fabs(a[j - 1] - b[j - 1])) * (grid_p[j] - grid_p[j - 1]);
  return w;
}

bool band_coverage(const CredibleBand& band, std::span<const double> y_grid,
                   std::span<const double> truth, double hdr_level) {
  if (band.lower.size() != y_grid.size() || band.upper.size() != y_grid.size() ||
      truth.size() != y_grid.size())
    throw DomainError("band, truth and grid lengths differ");
  const HdrRegion hdr = hdr_interval(y_grid, truth, hdr_level);
  for (std::size_t j = 0; j < y_grid.size(); ++j) {
    if (truth[j] < hdr.threshold) continue;
    if (truth[j] < band.lower[j] || truth[j] > band.upper[j]) return false;
  }
  return true;
}

double predictive_coverage(std::span<const PosteriorDraw> draws, const Dataset& test,
                           const Standardization& st, std::span<const double> y_grid,
                           double level) {
  if (test.n() == 0) throw InputError("empty test set");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < test.n(); ++i) {
    const std::vector<double> dens = posterior_mean_density(draws, test.row(i), y_grid, st);
    hit += hdr_interval(y_grid, dens, level).contains(test.y[i]);
  }
  return static_cast<double>(hit) / static_cast<double>(test.n());
}

// ---- Geweke ---------------------------------------------------------------

double GewekeResult::max_abs_z() const {
  double z = 0.0;
  for (const GewekeStat& s : stats) z = std::max(z, std::fabs(s.z));
  return z;
}

namespace {

struct GewekeModel {
  ChainConfig cfg;
  Dataset data;
  SplitSpace space;
};

const std::vector<std::string>& stat_names() {
  static const std::vector<std::string> names = {
      "mean_leaves", "var_leaves",     "mean_depth",  "mean_u_splits", "var_u_splits",
      "f(.25,.3)",   "f(.75,.8)",      "f^2(.5,.5)",  "v(.25,.3)",     "v(.75,.8)",
      "mean_leaf^2", "var_leaf_mean",  "u_mean",      "y_mean",        "y^2_mean",
      "std_resid^2"};
  return names;
}

std::vector<double> tracked(const ModelState& s, const Dataset& d) {
  auto latent_splits = [](const Ensemble& e) {
    double c = 0.0;
    for (const Tree& t : e.trees)
      for (const Tree::Node& nd : t.nodes()) c += !nd.is_leaf() && nd.rule.axis == kLatentAxis;
    return c;
  };
  auto leaves = [](const Ensemble& e) {
    double c = 0.0;
    for (const Tree& t : e.trees) c += static_cast<double>(t.leaf_count());
    return c;
  };
  auto leaf_moment = [](const Ensemble& e, int power) {
    double sum = 0.0, count = 0.0;
    for (const Tree& t : e.trees)
      for (int id : t.leaves()) {
        sum += std::pow(t.node(id).value, power);
        count += 1.0;
      }
    return sum / count;
  };
  auto at = [&](const Ensemble& e, double x, double u) {
    const double xs[1] = {x};
    return e.evaluate(Point{xs, u});
  };
  double depth = 0.0;
  for (const Tree& t : s.mean.trees) depth += t.max_depth();
  double u_mean = 0.0, y_mean = 0.0, y2 = 0.0, r2 = 0.0;
  for (std::size_t i = 0; i < d.n(); ++i) {
    const Point p{d.row(i), s.u[i]};
    const double r = d.y[i] - s.mean.evaluate(p);
    r2 += r * r * std::exp(-s.var.evaluate(p)) / s.sigma0_sq;
    u_mean += s.u[i];
    y_mean += d.y[i];
    y2 += d.y[i] * d.y[i];
  }
  const double n = static_cast<double>(d.n());
  const double f_mid = at(s.mean, 0.5, 0.5);
  return {leaves(s.mean),         leaves(s.var),          depth,
          latent_splits(s.mean),  latent_splits(s.var),   at(s.mean, 0.25, 0.3),
          at(s.mean, 0.75, 0.8),  f_mid * f_mid,          at(s.var, 0.25, 0.3),
          at(s.var, 0.75, 0.8),   leaf_moment(s.mean, 2), leaf_moment(s.var, 1),
          u_mean / n,             y_mean / n,             y2 / n,
          r2 / n};
}

bool feasible(const ModelState& s, const Dataset& d, int min_leaf) {
  const PointSet pts{d.x, d.p, s.u};
  for (const Ensemble* e : {&s.mean, &s.var})
    for (const Tree& t : e->trees)
      for (std::size_t c : leaf_occupancy(t, pts))
        if (c < static_cast<std::size_t>(min_leaf)) return false;
  return true;
}

// Prior draw of (trees, leaves, u) conditioned on every leaf holding at
// least min_leaf observations, by joint rejection.
ModelState prior_state(Rng& rng, const GewekeModel& gm) {
  const ChainConfig& c = gm.cfg;
  ModelState s;
  s.variant = Variant::Full;
  s.sigma0_sq = c.s0.fixed_value;
  s.u.resize(gm.data.n());
  do {
    s.mean = Ensemble(EnsembleKind::Mean, 0);
    s.var = Ensemble(EnsembleKind::Variance, 0);
    for (int h = 0; h < c.hp.m; ++h) s.mean.trees.push_back(sample_prior_tree(rng, c.hp.alpha, c.hp.beta, gm.space));
    for (int h = 0; h < c.vhp.m_v; ++h) s.var.trees.push_back(sample_prior_tree(rng, c.vhp.alpha, c.vhp.beta, gm.space));
    for (double& u : s.u) u = rng.uniform();
  } while (!feasible(s, gm.data, c.hp.min_leaf));
  for (Tree& t : s.mean.trees)
    for (int id : t.leaves()) t.set_value(id, rng.normal(0.0, c.hp.sigma_mu));
  for (Tree& t : s.var.trees)
    for (int id : t.leaves()) t.set_value(id, std::log(sample_leaf_scale_prior(rng, c.vhp.a, c.vhp.b)));
  return s;
}

std::vector<double> simulate_y(Rng& rng, std::span<const double> f, std::span<const double> v,
                               double sigma0_sq) {
  std::vector<double> y(f.size());
  const double s0 = std::sqrt(sigma0_sq);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f[i] + s0 * std::exp(0.5 * v[i]) * rng.normal();
  return y;
}

std::vector<double> simulate_y(Rng& rng, const ModelState& s, const Dataset& d) {
  std::vector<double> f(d.n()), v(d.n());
  for (std::size_t i = 0; i < d.n(); ++i) {
    const Point p{d.row(i), s.u[i]};
    f[i] = s.mean.evaluate(p);
    v[i] = s.var.evaluate(p);
  }
  return simulate_y(rng, f, v, s.sigma0_sq);
}

}  // namespace

GewekeResult geweke_harness(const GewekeConfig& g) {
  if (g.n < 2 * g.min_leaf || g.rounds < g.batches || g.batches < 2 || g.prior_draws < 2)
    throw InputError("Geweke configuration too small");
  GewekeModel gm;
  gm.data.p = 1;
  for (int i = 0; i < g.n; ++i) gm.data.x.push_back((i + 0.5) / g.n);
  gm.data.y.assign(static_cast<std::size_t>(g.n), 0.0);
  gm.space = SplitSpace::from_columns(gm.data.x, 1, true);
  ChainConfig& c = gm.cfg;
  c.hp = BartHyperParams::calibrated(g.m);
  c.hp.min_leaf = g.min_leaf;
  c.vhp = VarianceHyperParams::from_a0(g.m_v, calibrate_a0(4.0));
  c.s0 = Sigma0Spec::fixed(g.sigma0 * g.sigma0);
  c.variant = Variant::Full;
  c.latent_update = g.latent_update;

  const std::size_t k = stat_names().size();
  Rng rng(g.seed);

  // Marginal-conditional simulator.
  std::vector<double> psum(k, 0.0), psq(k, 0.0);
  Dataset d = gm.data;
  for (int r = 0; r < g.prior_draws; ++r) {
    const ModelState s = prior_state(rng, gm);
    d.y = simulate_y(rng, s, d);
    const std::vector<double> t = tracked(s, d);
    for (std::size_t j = 0; j < k; ++j) {
      psum[j] += t[j];
      psq[j] += t[j] * t[j];
    }
  }

  // Successive-conditional simulator.
  Rng chain_rng(Rng::derive(g.seed, 1));
  ModelState s0 = prior_state(chain_rng, gm);
  d.y = simulate_y(chain_rng, s0, d);
  Sampler sampler(d, c, s0);
  sampler.set_birth_log_bias(g.birth_log_bias);
  const int per_batch = g.rounds / g.batches;
  std::vector<std::vector<double>> batch(k, std::vector<double>(static_cast<std::size_t>(g.batches), 0.0));
  for (int r = 0; r < per_batch * g.batches; ++r) {
    std::vector<double> t;
    if (g.sweeps_per_round == 0) {
      const ModelState s = prior_state(chain_rng, gm);
      d.y = simulate_y(chain_rng, s, d);
      t = tracked(s, d);
    } else {
      for (int sw = 0; sw < g.sweeps_per_round; ++sw) sampler.sweep(chain_rng);
      d.y = simulate_y(chain_rng, sampler.fitted_mean(), sampler.fitted_log_var(),
                       sampler.state().sigma0_sq);
      sampler.set_response(d.y);
      t = tracked(sampler.state(), d);
    }
    for (std::size_t j = 0; j < k; ++j) batch[j][static_cast<std::size_t>(r / per_batch)] += t[j] / per_batch;
  }

  GewekeResult out;
  const double np = g.prior_draws;
  for (std::size_t j = 0; j < k; ++j) {
    GewekeStat st;
    st.name = stat_names()[j];
    st.prior_mean = psum[j] / np;
    st.prior_se = std::sqrt(std::max(0.0, psq[j] / np - st.prior_mean * st.prior_mean) / (np - 1.0));
    const auto& b = batch[j];
    st.chain_mean = std::accumulate(b.begin(), b.end(), 0.0) / g.batches;
    double v = 0.0;
    for (double x : b) v += (x - st.chain_mean) * (x - st.chain_mean);
    st.chain_se = std::sqrt(v / (g.batches - 1.0) / g.batches);
    const double se = std::hypot(st.prior_se, st.chain_se);
    st.z = se > 0.0 ? (st.chain_mean - st.prior_mean) / se : 0.0;
    out.stats.push_back(st);
  }
  return out;
}

}  // namespace drbart
