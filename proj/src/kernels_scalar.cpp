#include <algorithm>
#include <cmath>
#include <limits>

#include "drbart/kernels.hpp"

namespace drbart::kernels::scalar {

namespace {
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}

void exp(std::span<const double> in, std::span<double> out) {
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = std::exp(in[i]);
}

void scaled_exp_neg(std::span<const double> log_scale, double c, std::span<double> out) {
  for (std::size_t i = 0; i < log_scale.size(); ++i) out[i] = c * std::exp(-log_scale[i]);
}

void scaled_squares(std::span<const double> e, std::span<const double> log_var, double c,
                    std::span<double> out) {
  for (std::size_t i = 0; i < e.size(); ++i) out[i] = c * e[i] * e[i] * std::exp(-log_var[i]);
}

double log_sum_exp(std::span<const double> v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void mixture_density(std::span<const double> grid, std::span<const double> weight,
                     std::span<const double> mean, std::span<const double> sd,
                     std::span<double> out) {
  for (std::size_t k = 0; k < weight.size(); ++k) {
    const double inv = 1.0 / sd[k];
    const double scale = weight[k] * inv * kInvSqrt2Pi;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double z = (grid[g] - mean[k]) * inv;
      out[g] += scale * std::exp(-0.5 * z * z);
    }
  }
}

}  // namespace drbart::kernels::scalar
