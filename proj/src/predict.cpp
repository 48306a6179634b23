#include "drbart/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "drbart/errors.hpp"
#include "drbart/kernels.hpp"
#include "drbart/special_math.hpp"

namespace drbart {

namespace {

// exp(-z^2 / 2) underflows to zero beyond this many SDs.
constexpr double kTailSds = 39.0;

std::vector<double> to_std_y(std::span<const double> y, const Standardization& st) {
  std::vector<double> out(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) out[j] = st.y_to_std(y[j]);
  return out;
}

void require_draws(std::span<const PosteriorDraw> draws) {
  if (draws.empty()) throw InputError("no posterior draws");
}

}  // namespace

Mixture predictive_mixture(const PosteriorDraw& draw, std::span<const double> x_std) {
  const LatentProfile prof = latent_profile(draw.mean, &draw.var, x_std);
  Mixture mix;
  const double s0 = std::sqrt(draw.sigma0_sq);
  for (std::size_t k = 0; k < prof.intervals(); ++k) {
    const double w = prof.width(k);
    if (!(w > 0.0)) continue;
    mix.weight.push_back(w);
    mix.mean.push_back(prof.mean[k]);
    mix.sd.push_back(s0 * std::exp(0.5 * prof.log_var[k]));
  }
  return mix;
}

double mixture_pdf(const Mixture& mix, double y) {
  double p = 0.0;
  for (std::size_t k = 0; k < mix.size(); ++k)
    p += mix.weight[k] * std::exp(normal_log_pdf(y - mix.mean[k], mix.sd[k]));
  return p;
}

double mixture_cdf(const Mixture& mix, double y) {
  double c = 0.0;
  for (std::size_t k = 0; k < mix.size(); ++k)
    c += mix.weight[k] * normal_cdf((y - mix.mean[k]) / mix.sd[k]);
  return std::min(c, 1.0);
}

void mixture_density(const Mixture& mix, std::span<const double> y, double scale,
                     std::span<double> out) {
  const bool sorted = std::is_sorted(y.begin(), y.end());
  std::vector<double> z(y.size()), e(y.size());
  for (std::size_t k = 0; k < mix.size(); ++k) {
    const double mu = mix.mean[k], sd = mix.sd[k];
    std::size_t lo = 0, hi = y.size();
    if (sorted) {
      lo = static_cast<std::size_t>(std::lower_bound(y.begin(), y.end(), mu - kTailSds * sd) - y.begin());
      hi = static_cast<std::size_t>(std::upper_bound(y.begin(), y.end(), mu + kTailSds * sd) - y.begin());
    }
    if (lo >= hi) continue;
    const std::size_t len = hi - lo;
    for (std::size_t j = 0; j < len; ++j) {
      const double t = (y[lo + j] - mu) / sd;
      z[j] = -0.5 * t * t;
    }
    kernels::exp(std::span<const double>(z).first(len), std::span<double>(e).first(len));
    const double c = scale * mix.weight[k] / (sd * std::sqrt(2.0 * kPi));
    for (std::size_t j = 0; j < len; ++j) out[lo + j] += c * e[j];
  }
}

double mixture_quantile(const Mixture& mix, double s) {
  if (!(s > 0.0 && s < 1.0)) throw DomainError("quantile level must lie in (0, 1)");
  if (mix.size() == 0) throw DomainError("empty mixture");
  double lo = mix.mean[0], hi = mix.mean[0], width = 0.0;
  for (std::size_t k = 0; k < mix.size(); ++k) {
    lo = std::min(lo, mix.mean[k] - 8.0 * mix.sd[k]);
    hi = std::max(hi, mix.mean[k] + 8.0 * mix.sd[k]);
    width = std::max(width, mix.sd[k]);
  }
  for (double step = width; mixture_cdf(mix, lo) > s; step *= 2.0) lo -= step;
  for (double step = width; mixture_cdf(mix, hi) < s; step *= 2.0) hi += step;

  // Newton steps safeguarded by the bracket; bisection when they leave it.
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < 500; ++it) {
    const double f = mixture_cdf(mix, x) - s;
    if (f == 0.0) return x;
    (f < 0.0 ? lo : hi) = x;
    const double d = mixture_pdf(mix, x);
    double next = d > 0.0 ? x - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::fabs(next - x) < 1e-12 || hi - lo < 1e-10) return next;
    x = next;
  }
  return x;
}

std::vector<double> density_one_draw(const PosteriorDraw& draw, std::span<const double> x,
                                     std::span<const double> y_grid,
                                     const Standardization& st) {
  const Mixture mix = predictive_mixture(draw, st.x_row_to_std(x));
  const std::vector<double> ys = to_std_y(y_grid, st);
  std::vector<double> out(y_grid.size(), 0.0);
  mixture_density(mix, ys, 1.0 / st.y_scale(), out);
  return out;
}

double quantile_one_draw(const PosteriorDraw& draw, std::span<const double> x, double s,
                         const Standardization& st) {
  return st.y_to_raw(mixture_quantile(predictive_mixture(draw, st.x_row_to_std(x)), s));
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  if (n == 1) {
    g[0] = lo;
    return g;
  }
  for (std::size_t j = 0; j < n; ++j)
    g[j] = lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(n - 1);
  return g;
}

std::vector<double> default_y_grid(const Standardization& st, std::size_t n) {
  const double pad = 0.25 * st.y_scale();
  return linspace(st.y_min - pad, st.y_max + pad, n);
}

DensityGrid density_grid(std::span<const PosteriorDraw> draws, std::span<const double> x,
                         std::span<const double> y_grid, const Standardization& st) {
  require_draws(draws);
  DensityGrid g;
  g.x.assign(x.begin(), x.end());
  g.y_grid.assign(y_grid.begin(), y_grid.end());
  const std::vector<double> xs = st.x_row_to_std(x);
  const std::vector<double> ys = to_std_y(y_grid, st);
  g.density.reserve(draws.size());
  for (const PosteriorDraw& d : draws) {
    std::vector<double> out(y_grid.size(), 0.0);
    mixture_density(predictive_mixture(d, xs), ys, 1.0 / st.y_scale(), out);
    g.density.push_back(std::move(out));
  }
  return g;
}

std::vector<double> posterior_mean_density(std::span<const PosteriorDraw> draws,
                                           std::span<const double> x,
                                           std::span<const double> y_grid,
                                           const Standardization& st) {
  require_draws(draws);
  const std::vector<double> xs = st.x_row_to_std(x);
  const std::vector<double> ys = to_std_y(y_grid, st);
  std::vector<double> out(y_grid.size(), 0.0);
  const double scale = 1.0 / (st.y_scale() * static_cast<double>(draws.size()));
  for (const PosteriorDraw& d : draws) mixture_density(predictive_mixture(d, xs), ys, scale, out);
  return out;
}

double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw DomainError("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

DensitySummary summarize(const DensityGrid& grid, double level) {
  if (grid.density.empty()) throw InputError("no posterior draws");
  if (!(level >= 0.0 && level < 1.0)) throw DomainError("band level must lie in [0, 1)");
  const std::size_t m = grid.y_grid.size();
  DensitySummary s;
  s.mean.assign(m, 0.0);
  s.band.level = level;
  s.band.lower.resize(m);
  s.band.upper.resize(m);
  std::vector<double> col(grid.density.size());
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t d = 0; d < col.size(); ++d) col[d] = grid.density[d][j];
    s.mean[j] = std::accumulate(col.begin(), col.end(), 0.0) / static_cast<double>(col.size());
    std::sort(col.begin(), col.end());
    s.band.lower[j] = sorted_quantile(col, 0.5 * (1.0 - level));
    s.band.upper[j] = sorted_quantile(col, 0.5 * (1.0 + level));
  }
  return s;
}

IntervalSummary summarize_values(std::span<const double> values, double level) {
  if (values.empty()) throw InputError("no posterior draws");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  IntervalSummary s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  s.lower = sorted_quantile(v, 0.5 * (1.0 - level));
  s.upper = sorted_quantile(v, 0.5 * (1.0 + level));
  return s;
}

bool HdrRegion::contains(double y) const {
  for (const auto& [lo, hi] : intervals)
    if (y >= lo && y <= hi) return true;
  return false;
}

HdrRegion hdr_interval(std::span<const double> y_grid, std::span<const double> density,
                       double level) {
  const std::size_t n = y_grid.size();
  if (n < 2 || density.size() != n) throw DomainError("HDR needs a grid of at least two points");
  if (!std::is_sorted(y_grid.begin(), y_grid.end())) throw DomainError("HDR grid must be ascending");
  std::vector<double> cell(n);
  cell[0] = 0.5 * (y_grid[1] - y_grid[0]);
  cell[n - 1] = 0.5 * (y_grid[n - 1] - y_grid[n - 2]);
  for (std::size_t j = 1; j + 1 < n; ++j) cell[j] = 0.5 * (y_grid[j + 1] - y_grid[j - 1]);

  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) total += density[j] * cell[j];
  if (total < level)
    throw DomainError("grid holds only " + std::to_string(total) +
                      " of the density mass; widen the grid");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return density[a] > density[b]; });
  HdrRegion r;
  for (std::size_t j : order) {
    r.mass += density[j] * cell[j];
    r.threshold = density[j];
    if (r.mass >= level) break;
  }
  r.mass = 0.0;
  for (std::size_t j = 0; j < n;) {
    if (density[j] < r.threshold) {
      ++j;
      continue;
    }
    std::size_t k = j;
    while (k + 1 < n && density[k + 1] >= r.threshold) ++k;
    for (std::size_t t = j; t <= k; ++t) r.mass += density[t] * cell[t];
    const double lo = j == 0 ? y_grid[0] : 0.5 * (y_grid[j - 1] + y_grid[j]);
    const double hi = k == n - 1 ? y_grid[n - 1] : 0.5 * (y_grid[k] + y_grid[k + 1]);
    r.intervals.emplace_back(lo, hi);
    j = k + 1;
  }
  return r;
}

std::vector<IntervalSummary> quantile_summaries(std::span<const PosteriorDraw> draws,
                                                std::span<const double> x,
                                                std::span<const double> s_grid,
                                                const Standardization& st, double level) {
  require_draws(draws);
  const std::vector<double> xs = st.x_row_to_std(x);
  std::vector<std::vector<double>> q(s_grid.size(), std::vector<double>(draws.size()));
  for (std::size_t d = 0; d < draws.size(); ++d) {
    const Mixture mix = predictive_mixture(draws[d], xs);
    for (std::size_t k = 0; k < s_grid.size(); ++k) q[k][d] = st.y_to_raw(mixture_quantile(mix, s_grid[k]));
  }
  std::vector<IntervalSummary> out;
  for (const auto& v : q) out.push_back(summarize_values(v, level));
  return out;
}

ReturnsResult returns_functional(std::span<const PosteriorDraw> draws, std::span<const double> x1,
                                 std::span<const double> x2, double s,
                                 const Standardization& st, bool exponentiate, double level) {
  require_draws(draws);
  ReturnsResult r;
  r.per_draw.reserve(draws.size());
  for (const PosteriorDraw& d : draws) {
    double q1 = quantile_one_draw(d, x1, s, st);
    double q2 = quantile_one_draw(d, x2, s, st);
    if (exponentiate) {
      q1 = std::exp(q1);
      q2 = std::exp(q2);
    }
    if (!(q1 > 0.0)) throw DomainError("baseline quantile is not positive");
    r.per_draw.push_back(100.0 * (q2 - q1) / q1);
  }
  r.summary = summarize_values(r.per_draw, level);
  return r;
}

GrowthCurves growth_quantile_curves(std::span<const GradeModel> grades,
                                    std::span<const double> history,
                                    std::span<const double> s_grid) {
  std::size_t n_draws = grades.empty() ? 0 : grades[0].draws.size();
  for (const GradeModel& g : grades) {
    if (g.standardization == nullptr) throw ContractError("grade model without a standardization");
    n_draws = std::min(n_draws, g.draws.size());
  }
  if (n_draws == 0) throw InputError("no posterior draws");
  GrowthCurves out;
  out.s_grid.assign(s_grid.begin(), s_grid.end());
  out.projected.assign(grades.size(), std::vector<std::vector<double>>(
                                          s_grid.size(), std::vector<double>(n_draws)));
  std::vector<double> hist;
  for (std::size_t d = 0; d < n_draws; ++d) {
    for (std::size_t k = 0; k < s_grid.size(); ++k) {
      hist.assign(history.begin(), history.end());
      for (std::size_t g = 0; g < grades.size(); ++g) {
        const Standardization& st = *grades[g].standardization;
        if (hist.size() < st.p()) throw InputError("score history shorter than a grade model's covariates");
        const std::span<const double> x(hist.data() + hist.size() - st.p(), st.p());
        const double q = quantile_one_draw(grades[g].draws[d], x, s_grid[k], st);
        out.projected[g][k][d] = q;
        hist.push_back(q);
      }
    }
  }
  return out;
}

}  // namespace drbart
