// Compiled with -mavx2 -mfma; only entered after a cpuid check.

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "drbart/kernels.hpp"

namespace drbart::kernels::avx2 {
namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;

// exp(x) for 4 lanes. Range reduction x = n ln2 + r with |r| <= ln2/2, a
// degree-13 Taylor polynomial for e^r (truncation < 5e-18), and 2^n applied
// as two half-powers so results down into the subnormal range stay exact.
inline __m256d exp4(__m256d x) {
  const __m256d lo = _mm256_set1_pd(-746.0);
  const __m256d hi = _mm256_set1_pd(710.0);
  // Operand order keeps NaN lanes NaN.
  __m256d xc = _mm256_max_pd(lo, x);
  xc = _mm256_min_pd(hi, xc);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(1.4426950408889634074)),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(6.93145751953125e-1), xc);
  r = _mm256_fnmadd_pd(n, _mm256_set1_pd(1.42860682030941723212e-6), r);

  __m256d p = _mm256_set1_pd(1.0 / 6227020800.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 479001600.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  const __m128i ni = _mm256_cvtpd_epi32(n);
  const __m128i n1 = _mm_srai_epi32(ni, 1);
  const __m128i n2 = _mm_sub_epi32(ni, n1);
  const __m128i bias = _mm_set1_epi32(1023);
  const __m256d s1 = _mm256_castsi256_pd(
      _mm256_slli_epi64(_mm256_cvtepi32_epi64(_mm_add_epi32(n1, bias)), 52));
  const __m256d s2 = _mm256_castsi256_pd(
      _mm256_slli_epi64(_mm256_cvtepi32_epi64(_mm_add_epi32(n2, bias)), 52));
  __m256d y = _mm256_mul_pd(_mm256_mul_pd(p, s1), s2);

  const __m256d under = _mm256_cmp_pd(x, _mm256_set1_pd(-745.2), _CMP_LT_OQ);
  const __m256d over = _mm256_cmp_pd(x, _mm256_set1_pd(709.79), _CMP_GT_OQ);
  y = _mm256_andnot_pd(under, y);
  y = _mm256_blendv_pd(y, _mm256_set1_pd(std::numeric_limits<double>::infinity()), over);
  return y;
}

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
}

// Loads the last (n - i) < 4 lanes, padding with `fill`.
inline __m256d load_tail(const double* p, std::size_t count, double fill) {
  alignas(32) double buf[4] = {fill, fill, fill, fill};
  std::copy(p, p + count, buf);
  return _mm256_load_pd(buf);
}

inline void store_tail(double* p, std::size_t count, __m256d v) {
  alignas(32) double buf[4];
  _mm256_store_pd(buf, v);
  std::copy(buf, buf + count, p);
}

}  // namespace

void exp(std::span<const double> in, std::span<double> out) {
  const std::size_t n = in.size();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) _mm256_storeu_pd(out.data() + i, exp4(_mm256_loadu_pd(in.data() + i)));
  if (i < n) store_tail(out.data() + i, n - i, exp4(load_tail(in.data() + i, n - i, 0.0)));
}

void scaled_exp_neg(std::span<const double> log_scale, double c, std::span<double> out) {
  const std::size_t n = log_scale.size();
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d zero = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_sub_pd(zero, _mm256_loadu_pd(log_scale.data() + i));
    _mm256_storeu_pd(out.data() + i, _mm256_mul_pd(vc, exp4(v)));
  }
  if (i < n) {
    const __m256d v = _mm256_sub_pd(zero, load_tail(log_scale.data() + i, n - i, 0.0));
    store_tail(out.data() + i, n - i, _mm256_mul_pd(vc, exp4(v)));
  }
}

void scaled_squares(std::span<const double> e, std::span<const double> log_var, double c,
                    std::span<double> out) {
  const std::size_t n = e.size();
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d zero = _mm256_setzero_pd();
  auto body = [&](__m256d ev, __m256d lv) {
    const __m256d sq = _mm256_mul_pd(vc, _mm256_mul_pd(ev, ev));
    return _mm256_mul_pd(sq, exp4(_mm256_sub_pd(zero, lv)));
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out.data() + i,
                     body(_mm256_loadu_pd(e.data() + i), _mm256_loadu_pd(log_var.data() + i)));
  if (i < n)
    store_tail(out.data() + i, n - i,
               body(load_tail(e.data() + i, n - i, 0.0), load_tail(log_var.data() + i, n - i, 0.0)));
}

double log_sum_exp(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n == 0) return -std::numeric_limits<double>::infinity();
  const double ninf = -std::numeric_limits<double>::infinity();
  __m256d vm = _mm256_set1_pd(ninf);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) vm = _mm256_max_pd(vm, _mm256_loadu_pd(v.data() + i));
  double m = hmax(vm);
  for (std::size_t j = i; j < n; ++j) m = std::max(m, v[j]);
  if (!std::isfinite(m)) return m;

  const __m256d shift = _mm256_set1_pd(m);
  __m256d acc = _mm256_setzero_pd();
  for (i = 0; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, exp4(_mm256_sub_pd(_mm256_loadu_pd(v.data() + i), shift)));
  if (i < n) acc = _mm256_add_pd(acc, exp4(_mm256_sub_pd(load_tail(v.data() + i, n - i, ninf), shift)));
  return m + std::log(hsum(acc));
}

void mixture_density(std::span<const double> grid, std::span<const double> weight,
                     std::span<const double> mean, std::span<const double> sd,
                     std::span<double> out) {
  const std::size_t n = grid.size();
  const __m256d mhalf = _mm256_set1_pd(-0.5);
  for (std::size_t k = 0; k < weight.size(); ++k) {
    const double inv = 1.0 / sd[k];
    const __m256d vinv = _mm256_set1_pd(inv);
    const __m256d vmean = _mm256_set1_pd(mean[k]);
    const __m256d vscale = _mm256_set1_pd(weight[k] * inv * kInvSqrt2Pi);
    auto term = [&](__m256d y) {
      const __m256d z = _mm256_mul_pd(_mm256_sub_pd(y, vmean), vinv);
      return _mm256_mul_pd(vscale, exp4(_mm256_mul_pd(mhalf, _mm256_mul_pd(z, z))));
    };
    std::size_t g = 0;
    for (; g + 4 <= n; g += 4) {
      const __m256d acc = _mm256_loadu_pd(out.data() + g);
      _mm256_storeu_pd(out.data() + g, _mm256_add_pd(acc, term(_mm256_loadu_pd(grid.data() + g))));
    }
    if (g < n) {
      const std::size_t rest = n - g;
      const __m256d acc = load_tail(out.data() + g, rest, 0.0);
      store_tail(out.data() + g, rest,
                 _mm256_add_pd(acc, term(load_tail(grid.data() + g, rest, mean[k]))));
    }
  }
}

}  // namespace drbart::kernels::avx2
