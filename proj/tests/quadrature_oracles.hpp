#pragma once

// Adaptive-quadrature references for the leaf integrals. Shared by the unit
// tests and the acceptance runner.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <span>

namespace drbart::testing {

// Integrates g over [lo, hi] in half-unit panels.
template <class F>
double panel_integral(F g, double lo, double hi) {
  using boost::math::quadrature::gauss_kronrod;
  double total = 0.0;
  for (double s = lo; s < hi; s += 0.5)
    total += gauss_kronrod<double, 61>::integrate(g, s, std::min(s + 0.5, hi), 3, 1e-13);
  return total;
}

// log of the integral over mu ~ N(0, sigma_mu^2) of prod_i N(r_i; mu, 1/w_i).
inline double mean_leaf_quadrature(std::span<const double> r, std::span<const double> w, double sigma_mu) {
  constexpr double two_pi = 6.283185307179586;
  auto log_integrand = [&](double mu) {
    double l = -0.5 * mu * mu / (sigma_mu * sigma_mu) - std::log(sigma_mu) - 0.5 * std::log(two_pi);
    for (std::size_t i = 0; i < r.size(); ++i)
      l += 0.5 * std::log(w[i] / two_pi) - 0.5 * w[i] * (r[i] - mu) * (r[i] - mu);
    return l;
  };
  // Centre on the posterior mode, integrate +-40 posterior SDs.
  double sw = 0.0, swr = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) sw += w[i], swr += w[i] * r[i];
  const double s2 = 1.0 / (1.0 / (sigma_mu * sigma_mu) + sw);
  const double centre = s2 * swr, sd = std::sqrt(s2);
  const double shift = log_integrand(centre);
  const double q = panel_integral(
      [&](double z) { return std::exp(log_integrand(centre + sd * z) - shift) * sd; }, -40.0, 40.0);
  return shift + std::log(q);
}

struct VarLeafQuadrature {
  double log_ig = 0.0;   // half-weighted inverse-gamma component
  double log_gam = 0.0;  // half-weighted gamma component
};

// Components of the integral over tau of prod N(R_i; 0, tau) times the
// half gamma, half inverse-gamma prior with shape a and rate b, for n
// residuals with sum of squares r2.
inline VarLeafQuadrature var_leaf_quadrature(std::size_t n, double r2, double a, double b) {
  constexpr double two_pi = 6.283185307179586;
  const double hn = 0.5 * static_cast<double>(n);
  const double lgam = std::lgamma(a);
  auto log_lik = [&](double tau) { return -hn * std::log(two_pi * tau) - r2 / (2.0 * tau); };
  auto component = [&](bool inverse) {
    // Integrate over s = log tau around the maximum of the integrand.
    auto g = [&](double s) {
      const double tau = std::exp(s);
      const double prior = inverse ? -(a + 1) * s - b / tau : (a - 1) * s - b * tau;
      return log_lik(tau) + a * std::log(b) - lgam + prior + s;
    };
    double best = -1e300, arg = 0.0;
    for (double s = -30.0; s <= 30.0; s += 0.01)
      if (g(s) > best) best = g(s), arg = s;
    const double q = panel_integral([&](double s) { return std::exp(g(s) - best); }, arg - 15.0, arg + 15.0);
    return std::log(0.5) + best + std::log(q);
  };
  return {component(true), component(false)};
}

}  // namespace drbart::testing
