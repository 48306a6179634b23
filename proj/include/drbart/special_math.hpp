#pragma once

#include <cmath>
#include <span>

#include "drbart/rng.hpp"

namespace drbart {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

/// log K_nu(x), the modified Bessel function of the second kind, evaluated
/// entirely on the log scale. Valid for any real order (K is even in nu) and
/// x > 0; orders in the hundreds are routine for variance-leaf updates.
///
/// |nu| < 60: Temme's series (x <= 2) or Steed's continued fraction (x > 2)
/// at the reduced order |nu| - round(|nu|), then forward recurrence with
/// running rescaling. |nu| >= 60: Debye uniform asymptotic expansion.
double log_bessel_k(double order, double x);

/// Generalized inverse Gaussian with density
/// proportional to t^(lambda-1) exp(-(psi t + chi / t) / 2).
struct GigParams {
  double lambda = 0.0;
  double psi = 1.0;
  double chi = 1.0;
};

/// log of the GIG normalizing constant 2 K_lambda(sqrt(psi chi)) (chi/psi)^(lambda/2).
double log_gig_normalizer(const GigParams& p);
double log_gig_density(double t, const GigParams& p);

/// Exact GIG draws for every lambda and psi, chi > 0. Uses the
/// Hoermann-Leydold selection: ratio-of-uniforms with mode shift when
/// |lambda| > 2 or sqrt(psi chi) > 3, plain ratio-of-uniforms when the
/// density is close to log-concave, and a three-piece rejection hat for the
/// remaining small-omega, |lambda| < 1 corner.
double sample_gig(Rng& rng, const GigParams& p);

/// Gamma(shape, rate). Throws DomainError for non-positive parameters.
double sample_gamma(Rng& rng, double shape, double rate);
/// InverseGamma(shape, rate): 1 / Gamma(shape, rate).
double sample_inverse_gamma(Rng& rng, double shape, double rate);

/// log(sum exp(values)); exact for arbitrary magnitudes. -inf for an empty
/// span or all -inf entries.
double log_sum_exp(std::span<const double> values);

inline double normal_log_pdf(double z, double sd) {
  return -0.5 * (z / sd) * (z / sd) - kLogSqrt2Pi - std::log(sd);
}
double normal_cdf(double z);

}  // namespace drbart
