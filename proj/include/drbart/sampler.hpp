#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drbart/data.hpp"
#include "drbart/priors.hpp"
#include "drbart/rng.hpp"
#include "drbart/tree.hpp"

namespace drbart {

/// L: constant bandwidth sigma0. LH: sigma(x) from variance trees over x.
/// FULL: sigma(x, u), variance trees may also split on u.
enum class Variant { L, LH, Full };

const char* variant_name(Variant v);
/// Parses "l", "lh", "full" (case-insensitive). Throws UsageError.
Variant parse_variant(const std::string& s);

enum class LatentUpdate { Gibbs, Slice };

struct ModelState {
  Ensemble mean{EnsembleKind::Mean, 0};
  Ensemble var{EnsembleKind::Variance, 0};
  double sigma0_sq = 1.0;
  std::vector<double> u;
  Variant variant = Variant::Full;
};

struct ChainConfig {
  int n_iter = 1000;  // kept sweeps after burn-in (before thinning)
  int n_burn = 1000;
  int thin = 1;
  std::uint64_t seed = 1;
  BartHyperParams hp{};
  VarianceHyperParams vhp{};
  Sigma0Spec s0{};
  Variant variant = Variant::Full;
  LatentUpdate latent_update = LatentUpdate::Slice;
  /// Probability of a rule-change proposal on trees with more than one leaf;
  /// the rest is split evenly between birth and death. 0 gives birth/death only.
  double change_prob = 0.5;
  /// false drops the latent axis everywhere: plain (heteroscedastic) BART.
  bool use_latent = true;
  bool save_latents = false;

  void validate() const;
};

struct MoveCounts {
  std::uint64_t birth_proposed = 0;
  std::uint64_t birth_accepted = 0;
  std::uint64_t death_proposed = 0;
  std::uint64_t death_accepted = 0;
  std::uint64_t change_proposed = 0;
  std::uint64_t change_accepted = 0;
};

struct MoveStats {
  MoveCounts mean;
  MoveCounts var;
  std::uint64_t nan_ratios = 0;         // MH log-ratios that came out NaN
  std::uint64_t degenerate_leaves = 0;  // r^2 = 0 variance leaves (prior fallback)
  double seconds_mean = 0.0;
  double seconds_var = 0.0;
  double seconds_latent = 0.0;
  double seconds_sigma0 = 0.0;
};

struct PosteriorDraw {
  int iter = 0;
  double sigma0_sq = 0.0;
  Ensemble mean{EnsembleKind::Mean, 0};
  Ensemble var{EnsembleKind::Variance, 0};
  std::optional<std::vector<double>> latents;

  bool operator==(const PosteriorDraw&) const = default;
};

// ---- Leaf math -------------------------------------------------------------

/// Mean-leaf sufficient statistics with precision weights w_i.
struct MeanLeafStats {
  std::size_t n = 0;
  double sum_w = 0.0;
  double sum_wr = 0.0;
  double sum_wr2 = 0.0;     // only needed for the full likelihood
  double sum_log_w = 0.0;   // only needed for the full likelihood
};

/// log of the integral over mu ~ N(0, sigma_mu^2) of prod_i N(R_i; mu, 1/w_i).
double mean_leaf_log_likelihood(const MeanLeafStats& s, double sigma_mu);
/// The part of mean_leaf_log_likelihood that depends on how observations are
/// grouped into leaves: 1/2 log(s~^2 / sigma_mu^2) + 1/2 s~^2 (sum w R)^2.
double mean_leaf_log_marginal(double sum_w, double sum_wr, double sigma_mu);
/// Conjugate posterior N(s~^2 sum w R, s~^2) of the leaf mean.
double sample_mean_leaf(Rng& rng, double sum_w, double sum_wr, double sigma_mu);

/// Variance-leaf statistics: count and sum of squared standardized residuals.
struct VarLeafStats {
  std::size_t n = 0;
  double r2 = 0.0;
};

/// The two mixture components of the variance-leaf integrated likelihood on
/// the log scale (each including the common factors), and their log sum.
struct VarLeafTerms {
  double log_ig = 0.0;   // component from the inverse-gamma part of the prior
  double log_gig = 0.0;  // component from the gamma part (GIG posterior)
  double log_total = 0.0;
};
VarLeafTerms var_leaf_terms(const VarLeafStats& s, double a, double b);
/// Draws log(tau) from the leaf full conditional. For n = 0 this is the
/// prior; for r^2 = 0 with n > 0 it falls back to the prior and sets
/// *degenerate.
double sample_var_leaf(Rng& rng, const VarLeafStats& s, double a, double b,
                       bool* degenerate = nullptr);

/// Half the sample SD of least-squares residuals of y on x (with intercept).
double ols_half_residual_sd(const Dataset& data);

// ---- Sampler ---------------------------------------------------------------

/// Gibbs interval law of one latent coordinate: disjoint pieces of (0, 1)
/// and their probabilities.
struct LatentLaw {
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<double> prob;
};

class Sampler {
 public:
  /// All trees single leaves at 0, u_i ~ U(0, 1) from `rng`, sigma0^2 at the
  /// fixed value (or xi0 under the inverse-gamma prior).
  Sampler(Dataset data, const ChainConfig& cfg, Rng& rng);
  /// Starts from a given state; throws InputError if it is not feasible.
  Sampler(Dataset data, const ChainConfig& cfg, ModelState initial);

  /// Means, then variances (not L), then sigma0^2 (L with a prior), then latents.
  void sweep(Rng& rng);

  bool mean_tree_update(std::size_t h, Rng& rng);
  bool variance_tree_update(std::size_t h, Rng& rng);
  double latent_update_gibbs(std::size_t i, Rng& rng);
  double latent_update_slice(std::size_t i, Rng& rng);
  /// Conjugate sigma0^2 draw. ContractError unless the variant is L with an
  /// inverse-gamma prior.
  double sigma0_update(Rng& rng);

  LatentLaw latent_law(std::size_t i);

  /// Replaces the response (Geweke successive-conditional rounds).
  void set_response(std::span<const double> y);
  /// Added to every birth log-ratio; nonzero only for mutation tests.
  void set_birth_log_bias(double bias) { birth_bias_ = bias; }

  const ModelState& state() const { return state_; }
  const MoveStats& stats() const { return stats_; }
  const Dataset& data() const { return data_; }
  const ChainConfig& config() const { return cfg_; }
  /// f(x_i, u_i) and v(x_i, u_i) as cached by the sampler.
  std::span<const double> fitted_mean() const { return f_; }
  std::span<const double> fitted_log_var() const { return v_; }

  PosteriorDraw snapshot(int iter) const;

  /// Recounts every leaf from scratch; true iff all hold >= min_leaf points.
  bool feasible() const;
  /// Max abs difference between cached f, v and a from-scratch evaluation.
  double cache_error() const;

 private:
  struct TreeCache {
    std::vector<int> leaf_of;  // node id of the leaf holding each observation
    std::vector<int> count;    // observations per node id
    bool latent = false;
  };

  template <class Model>
  bool tree_update(Tree& tree, TreeCache& cache, const SplitSpace& space, double alpha,
                   double beta, const Model& model, MoveCounts& counts, Rng& rng);

  void init_caches();
  void rebuild_cache(const Tree& tree, TreeCache& cache);
  void recompute_fit();
  Point point(std::size_t i) const { return {data_.row(i), state_.u[i]}; }
  Point point(std::size_t i, double u) const { return {data_.row(i), u}; }
  TreeCache& cache(bool var, std::size_t h) { return caches_[var ? m_ + h : h]; }
  const Tree& tree_at(std::size_t t) const {
    return t < m_ ? state_.mean.trees[t] : state_.var.trees[t - m_];
  }

  // Latent-coordinate helpers.
  struct LatentContext {
    double lo = 0.0;
    double hi = 1.0;
    double base_mean = 0.0;
    double base_var = 0.0;
  };
  LatentContext latent_context(std::size_t i);
  double latent_log_lik(std::size_t i, const LatentContext& ctx, double u) const;
  void move_latent(std::size_t i, const LatentContext& ctx, double u_new);
  void refresh_latent_trees();
  void refresh_weights();

  Dataset data_;
  ChainConfig cfg_;
  ModelState state_;
  MoveStats stats_;
  SplitSpace mean_space_;
  SplitSpace var_space_;
  std::size_t m_ = 0;
  std::size_t mv_ = 0;
  double birth_bias_ = 0.0;

  std::vector<TreeCache> caches_;
  std::vector<double> f_;
  std::vector<double> v_;
  std::vector<std::size_t> latent_trees_;  // combined indices of trees splitting on u
  std::vector<const Tree*> latent_mean_ptrs_;
  std::vector<const Tree*> latent_var_ptrs_;

  // Precision weights 1 / (sigma0^2 e^v), stale after v or sigma0 changes.
  std::vector<double> w_;
  bool weights_dirty_ = true;

  // Scratch.
  std::vector<double> wr_;
  std::vector<double> r2_;
  std::vector<double> tmp_;
  std::vector<double> e_;
  std::vector<double> vm_;
  std::vector<int> axes_;
  std::vector<double> logw_;
  LatentProfiler profiler_;
  LatentProfile profile_;
};

// ---- Chains ----------------------------------------------------------------

struct ChainResult {
  std::vector<PosteriorDraw> draws;
  MoveStats stats;
};

/// Checks n > 2 min_leaf, finite data, x in [0, 1], y with positive spread.
void validate_data(const Dataset& data, const ChainConfig& cfg);

/// Runs burn-in plus n_iter sweeps, handing every thin-th post-burn state to
/// `sink`. Deterministic given cfg.seed.
MoveStats run_chain(const Dataset& data, const ChainConfig& cfg,
                    const std::function<void(const PosteriorDraw&)>& sink);
ChainResult run_chain(const Dataset& data, const ChainConfig& cfg);

/// Seed of chain k: the seed itself for k = 0, so a single chain matches
/// run_chain, and Rng::derive(seed, k) otherwise.
std::uint64_t chain_seed(std::uint64_t seed, int k);

/// Runs `chains` independent chains concurrently.
std::vector<ChainResult> run_chains(const Dataset& data, const ChainConfig& cfg, int chains);
/// Streaming form: sink(k, draw) is called from chain k's thread.
std::vector<MoveStats> run_chains(const Dataset& data, const ChainConfig& cfg, int chains,
                                  const std::function<void(int, const PosteriorDraw&)>& sink);

}  // namespace drbart
