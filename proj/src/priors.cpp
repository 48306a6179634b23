#include "drbart/priors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "drbart/errors.hpp"
#include "drbart/special_math.hpp"

namespace drbart {

BartHyperParams BartHyperParams::calibrated(int m, double k, double alpha, double beta,
                                            int min_leaf) {
  BartHyperParams hp;
  hp.alpha = alpha;
  hp.beta = beta;
  hp.k = k;
  hp.m = m;
  hp.min_leaf = min_leaf;
  hp.sigma_mu = calibrate_sigma_mu(k, m);
  hp.validate();
  return hp;
}

void BartHyperParams::validate() const {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in [0, 1)");
  if (!(beta >= 0.0)) throw DomainError("beta must be non-negative");
  if (!(k > 0.0)) throw DomainError("k must be positive");
  if (m < 1) throw DomainError("m must be at least 1");
  if (!(sigma_mu > 0.0)) throw DomainError("sigma_mu must be positive");
  if (min_leaf < 1) throw DomainError("min_leaf must be at least 1");
}

VarianceHyperParams VarianceHyperParams::from_a0(int m_v, double a0, double alpha,
                                                 double beta) {
  VarianceHyperParams v;
  v.m_v = m_v;
  v.a0 = a0;
  v.a = v.b = a0 * m_v;
  v.alpha = alpha;
  v.beta = beta;
  if (m_v > 0) v.validate();
  return v;
}

void VarianceHyperParams::validate() const {
  if (m_v < 0) throw DomainError("m_v must be non-negative");
  if (!(a0 > 0.0) || !(a > 0.0) || !(b > 0.0))
    throw DomainError("variance prior requires a0, a, b > 0");
  if (!(alpha >= 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in [0, 1)");
}

void Sigma0Spec::validate() const {
  if (mode == Mode::Fixed) {
    if (!(fixed_value > 0.0)) throw DomainError("fixed sigma0^2 must be positive");
  } else if (!(nu0 > 0.0) || !(xi0 > 0.0)) {
    throw DomainError("sigma0^2 prior requires nu0, xi0 > 0");
  }
}

double split_probability(int depth, double alpha, double beta) {
  if (depth < 0) throw DomainError("depth must be non-negative");
  return alpha * std::pow(1.0 + depth, -beta);
}

double split_probability(int depth, const BartHyperParams& hp) {
  return split_probability(depth, hp.alpha, hp.beta);
}

double calibrate_sigma_mu(double k, int m) {
  if (!(k > 0.0) || m < 1) throw DomainError("calibrate_sigma_mu needs k > 0, m >= 1");
  return 1.0 / (2.0 * k * std::sqrt(static_cast<double>(m)));
}

double calibrate_a0(double d_range) {
  if (!(d_range > 1.0)) throw DomainError("calibrate_a0 needs d > 1");
  const double l = std::log(std::sqrt(d_range));
  return 1.0 / (l * l);
}

double sample_leaf_scale_prior(Rng& rng, double a, double b) {
  if (rng.uniform() < 0.5) return sample_gamma(rng, a, b);
  return sample_inverse_gamma(rng, a, b);
}

double leaf_scale_prior_density(double tau, double a, double b) {
  if (!(tau > 0.0)) return 0.0;
  const double log_c = a * std::log(b) - std::lgamma(a);
  const double g = std::exp(log_c + (a - 1.0) * std::log(tau) - b * tau);
  const double ig = std::exp(log_c - (a + 1.0) * std::log(tau) - b / tau);
  return 0.5 * (g + ig);
}

SplitSpace SplitSpace::continuous(std::size_t x_axes, bool latent) {
  SplitSpace s;
  s.grids_.assign(x_axes, {});
  s.continuous_.assign(x_axes, true);
  s.latent_ = latent;
  return s;
}

SplitSpace SplitSpace::from_columns(std::span<const double> x, std::size_t p, bool latent) {
  SplitSpace s;
  s.grids_.assign(p, {});
  s.continuous_.assign(p, false);
  s.latent_ = latent;
  const std::size_t n = p ? x.size() / p : 0;
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<double>& g = s.grids_[j];
    g.reserve(n);
    for (std::size_t i = 0; i < n; ++i) g.push_back(x[i * p + j]);
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    if (!g.empty()) g.erase(g.begin());
  }
  return s;
}

long SplitSpace::cut_count(int axis, const Cell& cell) const {
  const Interval& iv = cell.along(axis);
  if (axis == kLatentAxis) {
    if (!latent_) return 0;
    return std::max(iv.lo, 0.0) < std::min(iv.hi, 1.0) ? -1 : 0;
  }
  const auto j = static_cast<std::size_t>(axis);
  if (continuous_[j]) return std::max(iv.lo, 0.0) < std::min(iv.hi, 1.0) ? -1 : 0;
  const std::vector<double>& g = grids_[j];
  auto first = std::upper_bound(g.begin(), g.end(), iv.lo);
  auto last = std::lower_bound(g.begin(), g.end(), iv.hi);
  return last > first ? static_cast<long>(last - first) : 0;
}

void SplitSpace::available_axes(const Cell& cell, std::vector<int>& out) const {
  out.clear();
  for (std::size_t j = 0; j < grids_.size(); ++j)
    if (cut_count(static_cast<int>(j), cell) != 0) out.push_back(static_cast<int>(j));
  if (latent_ && cut_count(kLatentAxis, cell) != 0) out.push_back(kLatentAxis);
}

bool SplitSpace::can_split(const Cell& cell) const {
  if (latent_ && cut_count(kLatentAxis, cell) != 0) return true;
  for (std::size_t j = 0; j < grids_.size(); ++j)
    if (cut_count(static_cast<int>(j), cell) != 0) return true;
  return false;
}

double SplitSpace::sample_cut(Rng& rng, int axis, const Cell& cell) const {
  const Interval& iv = cell.along(axis);
  if (axis == kLatentAxis || continuous_[static_cast<std::size_t>(axis)]) {
    const double lo = std::max(iv.lo, 0.0);
    const double hi = std::min(iv.hi, 1.0);
    double c = rng.uniform(lo, hi);
    // Guard the open-interval contract against rounding at the ends.
    if (!(c > lo && c < hi)) c = 0.5 * (lo + hi);
    return c;
  }
  const std::vector<double>& g = grids_[static_cast<std::size_t>(axis)];
  auto first = std::upper_bound(g.begin(), g.end(), iv.lo);
  auto last = std::lower_bound(g.begin(), g.end(), iv.hi);
  if (last <= first) throw std::logic_error("sample_cut on an axis without admissible cuts");
  return *(first + static_cast<long>(rng.index(static_cast<std::size_t>(last - first))));
}

Tree sample_prior_tree(Rng& rng, double alpha, double beta, const SplitSpace& space) {
  Tree tree;
  std::vector<int> frontier{0};
  std::vector<int> axes;
  while (!frontier.empty()) {
    const int id = frontier.back();
    frontier.pop_back();
    const int depth = tree.node(id).depth;
    const Cell cell = tree.cell(id, space.x_axes());
    space.available_axes(cell, axes);
    if (axes.empty()) continue;
    if (!rng.bernoulli(split_probability(depth, alpha, beta))) continue;
    if (depth >= kMaxTreeDepth)
      throw std::runtime_error("prior tree exceeded the depth cap of " +
                               std::to_string(kMaxTreeDepth));
    const int axis = axes[rng.index(axes.size())];
    const double cut = space.sample_cut(rng, axis, cell);
    auto [l, r] = tree.split(id, {axis, cut}, 0.0, 0.0);
    frontier.push_back(r);
    frontier.push_back(l);
  }
  return tree;
}

Tree sample_prior_tree(Rng& rng, const BartHyperParams& hp, std::size_t axis_count,
                       bool latent_last) {
  if (axis_count < 1) throw DomainError("sample_prior_tree needs at least one axis");
  const std::size_t x_axes = latent_last ? axis_count - 1 : axis_count;
  return sample_prior_tree(rng, hp.alpha, hp.beta, SplitSpace::continuous(x_axes, latent_last));
}

std::vector<std::size_t> nodes_per_depth(const Tree& tree) {
  std::vector<std::size_t> out(static_cast<std::size_t>(tree.max_depth()) + 1, 0);
  for (const Tree::Node& n : tree.nodes()) ++out[static_cast<std::size_t>(n.depth)];
  return out;
}

}  // namespace drbart
