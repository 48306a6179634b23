#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "drbart/data.hpp"
#include "drbart/sampler.hpp"

namespace drbart {

/// Finite normal mixture on the model scale.
struct Mixture {
  std::vector<double> weight;
  std::vector<double> mean;
  std::vector<double> sd;

  std::size_t size() const { return weight.size(); }
};

/// Exact predictive p(y | x) of one draw at a model-scale x: one component
/// per constant piece of u -> (f, v), weighted by the piece length.
Mixture predictive_mixture(const PosteriorDraw& draw, std::span<const double> x_std);

double mixture_pdf(const Mixture& mix, double y);
double mixture_cdf(const Mixture& mix, double y);
/// Adds scale * density at each y to out (grid need not be sorted).
void mixture_density(const Mixture& mix, std::span<const double> y, double scale,
                     std::span<double> out);
/// Inverts the mixture CDF to absolute tolerance 1e-8. DomainError unless s in (0, 1).
double mixture_quantile(const Mixture& mix, double s);

// Queries below take raw covariates and raw y and return raw-scale results.

std::vector<double> density_one_draw(const PosteriorDraw& draw, std::span<const double> x,
                                     std::span<const double> y_grid,
                                     const Standardization& st);
double quantile_one_draw(const PosteriorDraw& draw, std::span<const double> x, double s,
                         const Standardization& st);

std::vector<double> linspace(double lo, double hi, std::size_t n);
/// The observed y range widened by 25% on each side.
std::vector<double> default_y_grid(const Standardization& st, std::size_t n = 512);

/// Per-draw densities at one x (rows are draws).
struct DensityGrid {
  std::vector<double> x;
  std::vector<double> y_grid;
  std::vector<std::vector<double>> density;
};

DensityGrid density_grid(std::span<const PosteriorDraw> draws, std::span<const double> x,
                         std::span<const double> y_grid, const Standardization& st);
/// Average of the per-draw densities without storing them.
std::vector<double> posterior_mean_density(std::span<const PosteriorDraw> draws,
                                           std::span<const double> x,
                                           std::span<const double> y_grid,
                                           const Standardization& st);

/// Type-7 sample quantile of ascending data.
double sorted_quantile(std::span<const double> sorted, double p);

struct CredibleBand {
  std::vector<double> lower;
  std::vector<double> upper;
  double level = 0.95;
};

struct DensitySummary {
  std::vector<double> mean;
  CredibleBand band;
};

/// Pointwise mean and equal-tailed band across draws.
DensitySummary summarize(const DensityGrid& grid, double level);

struct IntervalSummary {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};
IntervalSummary summarize_values(std::span<const double> values, double level);

/// Highest-density region on a grid, as disjoint closed intervals.
struct HdrRegion {
  std::vector<std::pair<double, double>> intervals;
  double threshold = 0.0;
  double mass = 0.0;

  bool contains(double y) const;
};

/// The smallest superlevel set {p >= c} holding at least `level` of the
/// grid mass. Each grid point owns the half cells on either side. Throws
/// DomainError when the grid holds less than `level` in total.
HdrRegion hdr_interval(std::span<const double> y_grid, std::span<const double> density,
                       double level);

/// Per-draw posterior quantiles Q(s | x), summarized for each s.
std::vector<IntervalSummary> quantile_summaries(std::span<const PosteriorDraw> draws,
                                                std::span<const double> x,
                                                std::span<const double> s_grid,
                                                const Standardization& st, double level);

struct ReturnsResult {
  std::vector<double> per_draw;  // percentage changes
  IntervalSummary summary;
};

/// 100 (Q(s|x2) - Q(s|x1)) / Q(s|x1) per draw. With `exponentiate` the
/// quantiles of a logged response are mapped back first. DomainError if
/// Q(s|x1) <= 0 for some draw.
ReturnsResult returns_functional(std::span<const PosteriorDraw> draws, std::span<const double> x1,
                                 std::span<const double> x2, double s,
                                 const Standardization& st, bool exponentiate,
                                 double level = 0.95);

/// One conditional model in a chain of grade-to-grade score models. Its
/// covariates are the most recent st.p() scores, oldest first.
struct GradeModel {
  std::span<const PosteriorDraw> draws;
  const Standardization* standardization = nullptr;
};

/// projected[g][k][d]: score at grade g for sustained quantile s_grid[k]
/// under draw d. Draw d of every grade model is used together.
struct GrowthCurves {
  std::vector<double> s_grid;
  std::vector<std::vector<std::vector<double>>> projected;
};

GrowthCurves growth_quantile_curves(std::span<const GradeModel> grades,
                                    std::span<const double> history,
                                    std::span<const double> s_grid);

}  // namespace drbart
