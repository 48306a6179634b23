#include "drbart/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace drbart::kernels {
namespace {

bool cpu_has_avx2() {
#if defined(DRBART_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa detect() {
  if (const char* env = std::getenv("DRBART_FORCE_SCALAR"); env && std::string(env) == "1")
    return Isa::Scalar;
  return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

Isa active_isa() { return current().load(std::memory_order_relaxed); }

bool isa_available(Isa isa) { return isa == Isa::Scalar || cpu_has_avx2(); }

void force_isa(Isa isa) {
  if (!isa_available(isa))
    throw std::runtime_error(std::string("kernel ISA not available: ") + isa_name(isa));
  current().store(isa, std::memory_order_relaxed);
}

const char* isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

#if defined(DRBART_HAVE_AVX2)
#define DRBART_DISPATCH(fn, ...) \
  (active_isa() == Isa::Avx2 ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define DRBART_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void exp(std::span<const double> in, std::span<double> out) { DRBART_DISPATCH(exp, in, out); }

void scaled_exp_neg(std::span<const double> log_scale, double c, std::span<double> out) {
  DRBART_DISPATCH(scaled_exp_neg, log_scale, c, out);
}

void scaled_squares(std::span<const double> e, std::span<const double> log_var, double c,
                    std::span<double> out) {
  DRBART_DISPATCH(scaled_squares, e, log_var, c, out);
}

double log_sum_exp(std::span<const double> v) { return DRBART_DISPATCH(log_sum_exp, v); }

void mixture_density(std::span<const double> grid, std::span<const double> weight,
                     std::span<const double> mean, std::span<const double> sd,
                     std::span<double> out) {
  DRBART_DISPATCH(mixture_density, grid, weight, mean, sd, out);
}

#undef DRBART_DISPATCH

}  // namespace drbart::kernels
