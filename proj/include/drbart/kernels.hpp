#pragma once

// Data-parallel inner loops of the sampler and the density queries. Each
// kernel has a scalar reference in kernels::scalar and, on x86-64, an
// AVX2+FMA variant in kernels::avx2; the unqualified entry points dispatch
// to the best variant the CPU supports, chosen once at first use.
//
// The AVX2 exponential is a degree-13 polynomial after ln2 range reduction;
// it agrees with std::exp to a few ulp over the normal range, so the two
// paths are interchangeable up to rounding but not bit-identical.

#include <span>

namespace drbart::kernels {

enum class Isa { Scalar, Avx2 };

Isa active_isa();
bool isa_available(Isa isa);
/// Pins the dispatch target (tests, benchmarking). Throws if unavailable.
void force_isa(Isa isa);
const char* isa_name(Isa isa);

/// out[i] = exp(in[i]).
void exp(std::span<const double> in, std::span<double> out);
/// out[i] = c * exp(-log_scale[i]). Precision weights 1 / (sigma0^2 e^v).
void scaled_exp_neg(std::span<const double> log_scale, double c, std::span<double> out);
/// out[i] = c * e[i]^2 * exp(-log_var[i]). Squared standardized residuals.
void scaled_squares(std::span<const double> e, std::span<const double> log_var, double c,
                    std::span<double> out);
/// log(sum exp(v)), max-shifted.
double log_sum_exp(std::span<const double> v);
/// out[g] += sum_k weight[k] * phi((grid[g] - mean[k]) / sd[k]) / sd[k].
void mixture_density(std::span<const double> grid, std::span<const double> weight,
                     std::span<const double> mean, std::span<const double> sd,
                     std::span<double> out);

namespace scalar {
void exp(std::span<const double> in, std::span<double> out);
void scaled_exp_neg(std::span<const double> log_scale, double c, std::span<double> out);
void scaled_squares(std::span<const double> e, std::span<const double> log_var, double c,
                    std::span<double> out);
double log_sum_exp(std::span<const double> v);
void mixture_density(std::span<const double> grid, std::span<const double> weight,
                     std::span<const double> mean, std::span<const double> sd,
                     std::span<double> out);
}  // namespace scalar

#if defined(DRBART_HAVE_AVX2)
namespace avx2 {
void exp(std::span<const double> in, std::span<double> out);
void scaled_exp_neg(std::span<const double> log_scale, double c, std::span<double> out);
void scaled_squares(std::span<const double> e, std::span<const double> log_var, double c,
                    std::span<double> out);
double log_sum_exp(std::span<const double> v);
void mixture_density(std::span<const double> grid, std::span<const double> weight,
                     std::span<const double> mean, std::span<const double> sd,
                     std::span<double> out);
}  // namespace avx2
#endif

}  // namespace drbart::kernels
