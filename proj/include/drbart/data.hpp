#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace drbart {

/// Model-scale data: x row-major (n rows, p columns) in [0, 1], y standardized.
struct Dataset {
  std::vector<double> x;
  std::size_t p = 0;
  std::vector<double> y;

  std::size_t n() const { return y.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(x).subspan(i * p, p);
  }
};

/// Affine maps between raw data and the model frame: y onto [-0.5, 0.5] and
/// each x column onto [0, 1]. A constant x column maps to 0.5.
struct Standardization {
  double y_min = -0.5;
  double y_max = 0.5;
  std::vector<double> x_min;
  std::vector<double> x_max;
  std::string y_name = "y";
  std::vector<std::string> x_names;

  /// The identity map for data already in the model frame.
  static Standardization identity(std::size_t p);
  /// Ranges from raw data. Throws InputError("zero response range") for constant y.
  static Standardization fit(std::span<const double> x, std::size_t p, std::span<const double> y);

  std::size_t p() const { return x_min.size(); }
  double y_scale() const { return y_max - y_min; }
  double y_to_std(double y) const { return (y - y_min) / (y_max - y_min) - 0.5; }
  double y_to_raw(double z) const { return y_min + (z + 0.5) * (y_max - y_min); }
  double x_to_std(std::size_t j, double x) const;
  double x_to_raw(std::size_t j, double z) const;
  std::vector<double> x_row_to_std(std::span<const double> raw) const;

  Dataset apply(std::span<const double> x, std::span<const double> y) const;

  bool operator==(const Standardization&) const = default;
};

}  // namespace drbart
