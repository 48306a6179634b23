#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "drbart/rng.hpp"
#include "drbart/tree.hpp"

namespace drbart {

/// Hard cap on tree depth. The branching-process prior makes it unreachable
/// at defaults; hitting it is reported as an error.
inline constexpr int kMaxTreeDepth = 64;

/// Mean-tree prior constants.
struct BartHyperParams {
  double alpha = 0.95;
  double beta = 2.0;
  double k = 2.0;
  int m = 250;
  double sigma_mu = 1.0 / (2.0 * 2.0 * 15.811388300841896);  // 1/(2k sqrt(m)) at defaults
  int min_leaf = 5;

  /// Fills sigma_mu from k and m.
  static BartHyperParams calibrated(int m, double k = 2.0, double alpha = 0.95,
                                    double beta = 2.0, int min_leaf = 5);
  void validate() const;
};

/// Variance-tree prior. Leaf scales tau = exp(mu_v) follow the equal mixture
/// of Gamma(a, b) and InverseGamma(a, b), with a = b = a0 * m_v.
struct VarianceHyperParams {
  int m_v = 100;
  double a0 = 1.0;
  double a = 100.0;
  double b = 100.0;
  double alpha = 0.95;
  double beta = 2.0;

  static VarianceHyperParams from_a0(int m_v, double a0, double alpha = 0.95,
                                     double beta = 2.0);
  void validate() const;
};

/// sigma0^2 is either fixed or IG(nu0/2, nu0 xi0 / 2).
struct Sigma0Spec {
  enum class Mode { Fixed, InverseGamma };
  Mode mode = Mode::Fixed;
  double fixed_value = 0.01;  // sigma0^2 when fixed
  double nu0 = 3.0;
  double xi0 = 0.01;

  static Sigma0Spec fixed(double sigma0_sq) { return {Mode::Fixed, sigma0_sq, 0.0, 0.0}; }
  static Sigma0Spec inverse_gamma(double nu0, double xi0) {
    return {Mode::InverseGamma, xi0, nu0, xi0};
  }
  void validate() const;
};

/// alpha (1 + depth)^-beta.
double split_probability(int depth, double alpha, double beta);
double split_probability(int depth, const BartHyperParams& hp);

double calibrate_sigma_mu(double k, int m);
/// [log sqrt(d)]^-2; makes Pr(exp v in (1/d, d)) about 0.95.
double calibrate_a0(double d_range);

/// One draw of tau from the Gamma/InverseGamma mixture.
double sample_leaf_scale_prior(Rng& rng, double a, double b);
/// Mixture density of tau, for quadrature checks.
double leaf_scale_prior_density(double tau, double a, double b);

/// Which axes a tree may split on and where. x axes either draw cutpoints
/// from a sorted grid (observed values) or continuously from [0, 1]; the
/// latent axis, when enabled, is always continuous on [0, 1].
class SplitSpace {
 public:
  SplitSpace() = default;

  /// All x axes continuous on [0, 1].
  static SplitSpace continuous(std::size_t x_axes, bool latent);
  /// x cutpoints at the distinct observed values of each column, excluding
  /// the column minimum (a cut there would leave an empty side).
  static SplitSpace from_columns(std::span<const double> x_row_major, std::size_t p,
                                 bool latent);

  std::size_t x_axes() const { return grids_.size(); }
  bool has_latent() const { return latent_; }
  SplitSpace without_latent() const {
    SplitSpace s = *this;
    s.latent_ = false;
    return s;
  }

  /// Number of admissible cutpoints for `axis` strictly inside `cell`;
  /// -1 stands for "a continuum".
  long cut_count(int axis, const Cell& cell) const;
  /// Axes with at least one admissible cutpoint in `cell`.
  void available_axes(const Cell& cell, std::vector<int>& out) const;
  bool can_split(const Cell& cell) const;
  double sample_cut(Rng& rng, int axis, const Cell& cell) const;

  const std::vector<double>& grid(std::size_t axis) const { return grids_[axis]; }
  bool axis_continuous(std::size_t axis) const { return continuous_[axis]; }

 private:
  std::vector<std::vector<double>> grids_;
  std::vector<bool> continuous_;
  bool latent_ = false;
};

/// Samples a tree structure from the branching-process prior on `space`:
/// each node at depth d splits with probability alpha (1+d)^-beta if any
/// axis admits a cut, on an axis chosen uniformly among those, at a cutpoint
/// uniform over the admissible ones. Leaf values are left at 0. Throws
/// std::runtime_error past kMaxTreeDepth.
Tree sample_prior_tree(Rng& rng, double alpha, double beta, const SplitSpace& space);

/// Prior tree over `axis_count` continuous axes on [0, 1]. The last axis is
/// the latent one when `latent_last` is set.
Tree sample_prior_tree(Rng& rng, const BartHyperParams& hp, std::size_t axis_count,
                       bool latent_last = false);

/// Nodes per depth level, for branching-process checks.
std::vector<std::size_t> nodes_per_depth(const Tree& tree);

}  // namespace drbart
