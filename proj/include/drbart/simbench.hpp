#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "drbart/data.hpp"
#include "drbart/predict.hpp"
#include "drbart/sampler.hpp"

namespace drbart {

// ---- Simulation designs ----------------------------------------------------

/// base: x ~ U(0, 1). irrelevant14: base plus 14 uniform columns with
/// pairwise correlation 0.3. gapx: x from a three-piece uniform mixture with
/// 5% of the mass on [0.4, 0.6]. quadratic: base with f0 = a (x - 0.5)^2.
enum class DgpKind { Base, Irrelevant14, GapX, Quadratic };

const char* dgp_name(DgpKind k);
/// "base", "irrelevant14", "gapx", "quadratic". Throws UsageError.
DgpKind parse_dgp(const std::string& s);

struct DgpSpec {
  DgpKind kind = DgpKind::Base;
  double a = 0.0;  // quadratic curvature
  int n = 800;
  std::uint64_t seed = 1;

  std::size_t p() const { return kind == DgpKind::Irrelevant14 ? 15 : 1; }
  void validate() const;
};

/// Mean function at the relevant covariate x.
double dgp_f0(const DgpSpec& spec, double x);
/// Weight of the normal error component, exp(-10 (x - 0.8)^2).
double dgp_lambda(double x);
/// Draws one error at x.
double dgp_error(Rng& rng, double x);
/// Density of the error at x.
double dgp_error_density(double x, double e);

/// Raw (unstandardized) sample; the relevant covariate is column 0.
/// Deterministic given spec.seed.
Dataset dgp_sample(const DgpSpec& spec);
/// Draws n covariate rows only.
std::vector<double> dgp_covariates(Rng& rng, const DgpSpec& spec, int n);

/// True p(y | x) with x the relevant covariate.
std::vector<double> dgp_true_density(double x, std::span<const double> y_grid,
                                     const DgpSpec& spec);

/// Query row for density evaluation: x in column 0, irrelevant columns at 0.5.
std::vector<double> dgp_probe_row(const DgpSpec& spec, double x);

// ---- Metrics ---------------------------------------------------------------

/// Integral of |CDF_p - CDF_q| with trapezoid CDFs on a common grid. Throws
/// DomainError on a grid mismatch.
double wasserstein1(std::span<const double> grid_p, std::span<const double> p,
                    std::span<const double> grid_q, std::span<const double> q);

/// True iff lower <= truth <= upper at every grid point inside the truth's
/// HDR of the given level.
bool band_coverage(const CredibleBand& band, std::span<const double> y_grid,
                   std::span<const double> truth, double hdr_level = 0.95);

/// Fraction of test points whose y lies in the HDR of the posterior-mean
/// predictive density at their x. Rows of test.x are raw covariates.
double predictive_coverage(std::span<const PosteriorDraw> draws, const Dataset& test,
                           const Standardization& st, std::span<const double> y_grid,
                           double level = 0.95);

// ---- Geweke test -----------------------------------------------------------

struct GewekeConfig {
  int n = 20;
  int m = 3;
  int m_v = 2;
  int min_leaf = 5;
  double sigma0 = 0.1;
  int rounds = 10000;         // successive-conditional rounds
  int prior_draws = 10000;    // independent prior simulations
  int sweeps_per_round = 2;   // 0 turns the successive chain into prior draws
  int batches = 50;           // batch means for the chain's standard errors
  double birth_log_bias = 0.0;
  LatentUpdate latent_update = LatentUpdate::Slice;
  std::uint64_t seed = 1;
};

struct GewekeStat {
  std::string name;
  double prior_mean = 0.0;
  double prior_se = 0.0;
  double chain_mean = 0.0;
  double chain_se = 0.0;
  double z = 0.0;
};

struct GewekeResult {
  std::vector<GewekeStat> stats;
  double max_abs_z() const;
};

/// Compares tracked statistics of (parameters, data) under prior simulation
/// and under successive-conditional simulation, on a FULL model with x on an
/// even grid and sigma0 fixed.
GewekeResult geweke_harness(const GewekeConfig& cfg);

}  // namespace drbart
