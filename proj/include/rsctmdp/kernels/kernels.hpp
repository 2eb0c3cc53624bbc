#pragma once

// Data-parallel inner loops shared by the solver and the simulator.
//
// Every kernel has a scalar reference in `kernels::scalar` and, on x86-64,
// an AVX2+FMA variant in `kernels::avx2`. The unqualified entry points
// dispatch on the active ISA, chosen once from CPUID and overridable through
// set_active_isa() or the RSCTMDP_ISA environment variable
// ("scalar" | "avx2"). The variants agree to a few ulp, not bit for bit, so a
// run is reproducible for a fixed ISA.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace rsctmdp::kernels {

enum class Isa { scalar, avx2 };

std::string_view to_string(Isa isa);
bool isa_supported(Isa isa);
/// Best ISA the running CPU supports.
Isa detected_isa();
Isa active_isa();
/// Throws ValidationError when the CPU lacks `isa`.
void set_active_isa(Isa isa);
Isa parse_isa(std::string_view name);

/// Sums of `exp(x - shift)` and `exp(2 (x - shift))`.
struct ExpMoments {
    double first = 0.0;
    double second = 0.0;
};

// out[e] = exp(x[e])
void exp_array(std::span<const double> x, std::span<double> out);

// out[e] = rate[e] * exp(psi[to[e]] - psi[from[e]])
void weighted_exp_gather(std::span<const double> rate, std::span<const std::int32_t> to,
                         std::span<const std::int32_t> from, std::span<const double> psi, std::span<double> out);

double max_value(std::span<const double> x);

ExpMoments exp_moments(std::span<const double> x, double shift);

namespace scalar {
void exp_array(const double* x, double* out, std::size_t n);
void weighted_exp_gather(const double* rate, const std::int32_t* to, const std::int32_t* from, const double* psi,
                         double* out, std::size_t n);
double max_value(const double* x, std::size_t n);
ExpMoments exp_moments(const double* x, std::size_t n, double shift);
}  // namespace scalar

namespace avx2 {
bool available();
void exp_array(const double* x, double* out, std::size_t n);
void weighted_exp_gather(const double* rate, const std::int32_t* to, const std::int32_t* from, const double* psi,
                         double* out, std::size_t n);
double max_value(const double* x, std::size_t n);
ExpMoments exp_moments(const double* x, std::size_t n, double shift);
}  // namespace avx2

}  // namespace rsctmdp::kernels
