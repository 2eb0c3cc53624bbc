#include <atomic>
#include <cstdlib>
#include <string>

#include "rsctmdp/errors.hpp"
#include "rsctmdp/kernels/kernels.hpp"

namespace rsctmdp::kernels {

namespace {

Isa initial_isa() {
    if (const char* env = std::getenv("RSCTMDP_ISA"); env != nullptr && *env != '\0') {
        const Isa wanted = parse_isa(env);
        if (isa_supported(wanted)) return wanted;
    }
    return detected_isa();
}

std::atomic<Isa>& active() {
    static std::atomic<Isa> isa{initial_isa()};
    return isa;
}

void check_sizes(std::size_t a, std::size_t b, const char* what) {
    if (a != b) throw ValidationError(std::string("kernel size mismatch: ") + what);
}

}  // namespace

std::string_view to_string(Isa isa) { return isa == Isa::avx2 ? "avx2" : "scalar"; }

Isa parse_isa(std::string_view name) {
    if (name == "scalar") return Isa::scalar;
    if (name == "avx2") return Isa::avx2;
    throw ValidationError("unknown ISA \"" + std::string(name) + "\" (expected scalar or avx2)");
}

bool isa_supported(Isa isa) { return isa == Isa::scalar || avx2::available(); }

Isa detected_isa() { return avx2::available() ? Isa::avx2 : Isa::scalar; }

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
    if (!isa_supported(isa)) {
        throw ValidationError("ISA " + std::string(to_string(isa)) + " is not supported on this CPU");
    }
    active().store(isa, std::memory_order_relaxed);
}

void exp_array(std::span<const double> x, std::span<double> out) {
    check_sizes(x.size(), out.size(), "exp_array");
    if (active_isa() == Isa::avx2) {
        avx2::exp_array(x.data(), out.data(), x.size());
    } else {
        scalar::exp_array(x.data(), out.data(), x.size());
    }
}

void weighted_exp_gather(std::span<const double> rate, std::span<const std::int32_t> to,
                         std::span<const std::int32_t> from, std::span<const double> psi, std::span<double> out) {
    check_sizes(rate.size(), to.size(), "weighted_exp_gather(to)");
    check_sizes(rate.size(), from.size(), "weighted_exp_gather(from)");
    check_sizes(rate.size(), out.size(), "weighted_exp_gather(out)");
    if (rate.empty()) return;
    if (active_isa() == Isa::avx2) {
        avx2::weighted_exp_gather(rate.data(), to.data(), from.data(), psi.data(), out.data(), rate.size());
    } else {
        scalar::weighted_exp_gather(rate.data(), to.data(), from.data(), psi.data(), out.data(), rate.size());
    }
}

double max_value(std::span<const double> x) {
    return active_isa() == Isa::avx2 ? avx2::max_value(x.data(), x.size()) : scalar::max_value(x.data(), x.size());
}

ExpMoments exp_moments(std::span<const double> x, double shift) {
    return active_isa() == Isa::avx2 ? avx2::exp_moments(x.data(), x.size(), shift)
                                     : scalar::exp_moments(x.data(), x.size(), shift);
}

}  // namespace rsctmdp::kernels
