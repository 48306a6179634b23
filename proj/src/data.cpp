#include "drbart/data.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "drbart/errors.hpp"

namespace drbart {

Standardization Standardization::identity(std::size_t p) {
  Standardization s;
  s.x_min.assign(p, 0.0);
  s.x_max.assign(p, 1.0);
  for (std::size_t j = 0; j < p; ++j) s.x_names.push_back("x" + std::to_string(j + 1));
  return s;
}

Standardization Standardization::fit(std::span<const double> x, std::size_t p,
                                     std::span<const double> y) {
  if (y.empty()) throw InputError("no observations");
  if (x.size() != y.size() * p) throw InputError("covariate matrix does not match response length");
  Standardization s = identity(p);
  const auto [ylo, yhi] = std::minmax_element(y.begin(), y.end());
  s.y_min = *ylo;
  s.y_max = *yhi;
  if (!(s.y_max > s.y_min)) throw InputError("zero response range");
  for (std::size_t j = 0; j < p; ++j) {
    double lo = x[j], hi = x[j];
    for (std::size_t i = 0; i < y.size(); ++i) {
      lo = std::min(lo, x[i * p + j]);
      hi = std::max(hi, x[i * p + j]);
    }
    s.x_min[j] = lo;
    s.x_max[j] = hi;
  }
  return s;
}

double Standardization::x_to_std(std::size_t j, double x) const {
  const double range = x_max[j] - x_min[j];
  return range > 0.0 ? (x - x_min[j]) / range : 0.5;
}

double Standardization::x_to_raw(std::size_t j, double z) const {
  const double range = x_max[j] - x_min[j];
  return range > 0.0 ? x_min[j] + z * range : x_min[j];
}

std::vector<double> Standardization::x_row_to_std(std::span<const double> raw) const {
  if (raw.size() != p())
    throw InputError("expected " + std::to_string(p()) + " covariate values, got " +
                     std::to_string(raw.size()));
  std::vector<double> out(raw.size());
  for (std::size_t j = 0; j < raw.size(); ++j) out[j] = x_to_std(j, raw[j]);
  return out;
}

Dataset Standardization::apply(std::span<const double> x, std::span<const double> y) const {
  Dataset d;
  d.p = p();
  d.x.resize(x.size());
  d.y.resize(y.size());
  for (std::size_t i = 0; i < x.size(); ++i) d.x[i] = x_to_std(i % d.p, x[i]);
  for (std::size_t i = 0; i < y.size(); ++i) d.y[i] = y_to_std(y[i]);
  return d;
}

}  // namespace drbart
