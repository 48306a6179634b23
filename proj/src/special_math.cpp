#include "drbart/special_math.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <random>

#include "drbart/errors.hpp"
#include "drbart/kernels.hpp"

namespace drbart {
namespace {

constexpr double kEps = 1e-16;
constexpr double kAsymptoticOrder = 60.0;

// Taylor coefficients of 1/Gamma(z) = sum_k c[k] z^(k+1), k = 0..25.
constexpr std::array<double, 26> kRecipGamma = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
};

// For |mu| <= 1/2:
//   gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
//   gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
// from the even/odd parts of 1/Gamma(1+z) = sum_k c[k] z^k.
void temme_gammas(double mu, double& gam1, double& gam2) {
  const double mu2 = mu * mu;
  double odd = 0.0;
  double even = 0.0;
  for (int k = 25; k >= 0; --k) {
    if (k % 2 == 1)
      odd = odd * mu2 + kRecipGamma[static_cast<std::size_t>(k)];
    else
      even = even * mu2 + kRecipGamma[static_cast<std::size_t>(k)];
  }
  gam1 = -odd;
  gam2 = even;
}

struct ReducedK {
  double log_k;  // log K_mu(x)
  double ratio;  // K_{mu+1}(x) / K_mu(x)
};

// Temme's series, x <= 2.
ReducedK temme_series(double mu, double x) {
  const double x2 = 0.5 * x;
  const double pimu = kPi * mu;
  const double fact = std::fabs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
  double d = -std::log(x2);
  double e = mu * d;
  const double fact2 = std::fabs(e) < kEps ? 1.0 : std::sinh(e) / e;
  double gam1 = 0.0;
  double gam2 = 0.0;
  temme_gammas(mu, gam1, gam2);
  const double gampl = gam2 - mu * gam1;  // 1 / Gamma(1 + mu)
  const double gammi = gam2 + mu * gam1;  // 1 / Gamma(1 - mu)
  double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
  double sum = ff;
  e = std::exp(e);
  double p = 0.5 * e / gampl;
  double q = 0.5 / (e * gammi);
  double c = 1.0;
  d = x2 * x2;
  double sum1 = p;
  const double mu2 = mu * mu;
  for (int i = 1; i < 10000; ++i) {
    const double di = i;
    ff = (di * ff + p + q) / (di * di - mu2);
    c *= d / di;
    p /= di - mu;
    q /= di + mu;
    const double del = c * ff;
    sum += del;
    sum1 += c * (p - di * ff);
    if (std::fabs(del) < std::fabs(sum) * kEps) break;
  }
  return {std::log(sum), sum1 * (2.0 / x) / sum};
}

// Steed's continued fraction (CF2) with Temme's normalization, x > 2.
ReducedK steed_cf2(double mu, double x) {
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu * mu;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i < 100000; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::fabs(dels / s) < kEps) break;
  }
  h *= a1;
  const double log_k = 0.5 * std::log(kPi / (2.0 * x)) - x - std::log(s);
  return {log_k, (mu + x + 0.5 - h) / x};
}

// Debye expansion of K_nu(nu z), terms u_0..u_4.
double debye_log_k(double nu, double x) {
  const double z = x / nu;
  const double sq = std::sqrt(1.0 + z * z);
  const double t = 1.0 / sq;
  const double eta = sq + std::log(z / (1.0 + sq));
  const double t2 = t * t;
  const double u1 = t * (3.0 - 5.0 * t2) / 24.0;
  const double u2 = t2 * (81.0 + t2 * (-462.0 + t2 * 385.0)) / 1152.0;
  const double u3 =
      t * t2 * (30375.0 + t2 * (-369603.0 + t2 * (765765.0 - t2 * 425425.0))) / 414720.0;
  const double u4 =
      t2 * t2 *
      (4465125.0 +
       t2 * (-94121676.0 + t2 * (349922430.0 + t2 * (-446185740.0 + t2 * 185910725.0)))) /
      39813120.0;
  const double inv = 1.0 / nu;
  const double series = 1.0 + inv * (-u1 + inv * (u2 + inv * (-u3 + inv * u4)));
  return 0.5 * std::log(kPi / (2.0 * nu)) - nu * eta - 0.25 * std::log1p(z * z) +
         std::log(series);
}

double gig_log_kernel(double x, double lambda, double omega) {
  return (lambda - 1.0) * std::log(x) - 0.5 * omega * (x + 1.0 / x);
}

double gig_mode(double lambda, double omega) {
  if (lambda >= 1.0)
    return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

// Ratio-of-uniforms without mode shift. Density x^(lambda-1) exp(-omega/2 (x + 1/x)).
double gig_rou_noshift(Rng& rng, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Ratio-of-uniforms with the mode shifted to the origin.
double gig_rou_shift(Rng& rng, double lambda, double omega) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);

  // Extremes of (x - xm) sqrt(f(x)) solve x^3 + a x^2 + b x + c = 0.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double fi = std::acos(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * kPi) - a / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);
  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Three-piece hat (constant, power, exponential) for 0 <= lambda < 1 and
// small omega, where the density is not T-concave.
double gig_small_omega(Rng& rng, double lambda, double omega) {
  const double xm = gig_mode(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double k0 = std::exp(gig_log_kernel(xm, lambda, omega));
  const double a0 = k0 * x0;
  double k1 = 0.0;
  double a1 = 0.0;
  double k2 = 0.0;
  double a2 = 0.0;
  if (x0 >= 2.0 / omega) {
    k2 = std::pow(x0, lambda - 1.0);
    a2 = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    a1 = lambda == 0.0 ? k1 * std::log(2.0 / (omega * omega))
                       : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    a2 = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = a0 + a1 + a2;
  for (;;) {
    double v = total * rng.uniform();
    double x = 0.0;
    double hx = 0.0;
    if (v <= a0) {
      x = x0 * v / a0;
      hx = k0;
    } else if (v <= a0 + a1) {
      v -= a0;
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= a0 + a1;
      const double start = std::max(x0, 2.0 / omega);
      x = -2.0 / omega * std::log(std::exp(-omega / 2.0 * start) - omega / (2.0 * k2) * v);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    const double u = rng.uniform() * hx;
    if (std::log(u) <= gig_log_kernel(x, lambda, omega)) return x;
  }
}

}  // namespace

double log_bessel_k(double order, double x) {
  if (!(x > 0.0)) throw DomainError("log_bessel_k: x must be positive");
  if (std::isinf(x)) return -std::numeric_limits<double>::infinity();
  const double nu = std::fabs(order);
  if (nu >= kAsymptoticOrder) return debye_log_k(nu, x);

  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  const ReducedK base = x <= 2.0 ? temme_series(mu, x) : steed_cf2(mu, x);
  if (nl == 0) return base.log_k;

  // Forward recurrence K_{m+1} = K_{m-1} + (2m/x) K_m, kept scaled.
  double log_scale = base.log_k;
  double k_prev = 1.0;
  double k_curr = base.ratio;
  for (int i = 1; i < nl; ++i) {
    const double k_next = (2.0 * (mu + i) / x) * k_curr + k_prev;
    k_prev = k_curr;
    k_curr = k_next;
    if (k_curr > 1e250) {
      log_scale += std::log(k_curr);
      k_prev /= k_curr;
      k_curr = 1.0;
    }
  }
  return log_scale + std::log(k_curr);
}

double log_gig_normalizer(const GigParams& p) {
  return std::log(2.0) + log_bessel_k(p.lambda, std::sqrt(p.psi * p.chi)) +
         0.5 * p.lambda * std::log(p.chi / p.psi);
}

double log_gig_density(double t, const GigParams& p) {
  if (!(t > 0.0)) return -std::numeric_limits<double>::infinity();
  return (p.lambda - 1.0) * std::log(t) - 0.5 * (p.psi * t + p.chi / t) - log_gig_normalizer(p);
}

double sample_gig(Rng& rng, const GigParams& p) {
  if (!(p.psi > 0.0) || !(p.chi > 0.0))
    throw DomainError("sample_gig: psi and chi must be positive");
  const double omega = std::sqrt(p.psi * p.chi);
  const double alpha = std::sqrt(p.chi / p.psi);
  const double lambda = std::fabs(p.lambda);
  double y = 0.0;
  if (lambda > 2.0 || omega > 3.0)
    y = gig_rou_shift(rng, lambda, omega);
  else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2)
    y = gig_rou_noshift(rng, lambda, omega);
  else
    y = gig_small_omega(rng, lambda, omega);
  return p.lambda < 0.0 ? alpha / y : alpha * y;
}

double sample_gamma(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw DomainError("sample_gamma: shape and rate must be positive");
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  double v = g(rng.engine());
  // shape << 1 can underflow to exactly zero.
  return v > 0.0 ? v : std::numeric_limits<double>::min();
}

double sample_inverse_gamma(Rng& rng, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0))
    throw DomainError("sample_inverse_gamma: shape and rate must be positive");
  return 1.0 / sample_gamma(rng, shape, rate);
}

double log_sum_exp(std::span<const double> values) { return kernels::log_sum_exp(values); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace drbart
