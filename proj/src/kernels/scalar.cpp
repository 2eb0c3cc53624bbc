#include <algorithm>
#include <cmath>
#include <limits>

#include "rsctmdp/kernels/kernels.hpp"

namespace rsctmdp::kernels::scalar {

void exp_array(const double* x, double* out, std::size_t n) {
    for (std::size_t e = 0; e < n; ++e) out[e] = std::exp(x[e]);
}

void weighted_exp_gather(const double* rate, const std::int32_t* to, const std::int32_t* from, const double* psi,
                         double* out, std::size_t n) {
    for (std::size_t e = 0; e < n; ++e) out[e] = rate[e] * std::exp(psi[to[e]] - psi[from[e]]);
}

double max_value(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < n; ++e) m = std::max(m, x[e]);
    return m;
}

ExpMoments exp_moments(const double* x, std::size_t n, double shift) {
    ExpMoments m;
    for (std::size_t e = 0; e < n; ++e) {
        const double w = std::exp(x[e] - shift);
        m.first += w;
        m.second += w * w;
    }
    return m;
}

}  // namespace rsctmdp::kernels::scalar
