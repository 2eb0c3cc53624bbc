// AVX2+FMA variants. Only the functions carrying the target attribute use
// AVX2, so this file is built with the project-wide flags and is safe to link
// on CPUs without AVX2; callers gate on available().

#include <algorithm>
#include <cmath>
#include <limits>

#include "rsctmdp/kernels/kernels.hpp"

#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
#define RSCTMDP_HAVE_AVX2 1
#include <immintrin.h>
#else
#define RSCTMDP_HAVE_AVX2 0
#endif

namespace rsctmdp::kernels::avx2 {

#if RSCTMDP_HAVE_AVX2

#define RSCTMDP_AVX2 __attribute__((target("avx2,fma")))

namespace {

constexpr double kMaxLog = 7.09782712893383996843e2;
constexpr double kMinLog = -7.45133219101941108420e2;
constexpr double kLog2e = 1.4426950408889634073599;
// ln 2 split so that n * kLn2Hi is exact for |n| <= 1100.
constexpr double kLn2Hi = 6.93145751953125e-1;
constexpr double kLn2Lo = 1.42860682030941723212e-6;

// Cephes rational approximation of exp on |r| <= ln(2)/2.
constexpr double kP0 = 1.26177193074810590878e-4;
constexpr double kP1 = 3.02994407707441961300e-2;
constexpr double kP2 = 9.99999999999999999910e-1;
constexpr double kQ0 = 3.00198505138664455042e-6;
constexpr double kQ1 = 2.52448340349684104192e-3;
constexpr double kQ2 = 2.27265548208155028766e-1;
constexpr double kQ3 = 2.00000000000000000009e0;

RSCTMDP_AVX2 inline __m256d pow2(__m128i n) {
    const __m256i biased = _mm256_add_epi64(_mm256_cvtepi32_epi64(n), _mm256_set1_epi64x(1023));
    return _mm256_castsi256_pd(_mm256_slli_epi64(biased, 52));
}

RSCTMDP_AVX2 inline __m256d exp_pd(__m256d x) {
    const __m256d xc = _mm256_min_pd(_mm256_max_pd(x, _mm256_set1_pd(kMinLog)), _mm256_set1_pd(kMaxLog));
    const __m256d n = _mm256_round_pd(_mm256_mul_pd(xc, _mm256_set1_pd(kLog2e)),
                                      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Hi), xc);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Lo), r);
    const __m256d rr = _mm256_mul_pd(r, r);

    __m256d p = _mm256_fmadd_pd(_mm256_set1_pd(kP0), rr, _mm256_set1_pd(kP1));
    p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(kP2));
    p = _mm256_mul_pd(p, r);
    __m256d q = _mm256_fmadd_pd(_mm256_set1_pd(kQ0), rr, _mm256_set1_pd(kQ1));
    q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(kQ2));
    q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(kQ3));
    const __m256d frac = _mm256_div_pd(p, _mm256_sub_pd(q, p));
    const __m256d y = _mm256_fmadd_pd(_mm256_set1_pd(2.0), frac, _mm256_set1_pd(1.0));

    // Two half-scalings keep both factors normal over the whole range.
    const __m128i ni = _mm256_cvtpd_epi32(n);
    const __m128i n1 = _mm_srai_epi32(ni, 1);
    const __m128i n2 = _mm_sub_epi32(ni, n1);
    __m256d out = _mm256_mul_pd(_mm256_mul_pd(y, pow2(n1)), pow2(n2));

    out = _mm256_blendv_pd(out, _mm256_set1_pd(std::numeric_limits<double>::infinity()),
                           _mm256_cmp_pd(x, _mm256_set1_pd(kMaxLog), _CMP_GT_OQ));
    out = _mm256_blendv_pd(out, _mm256_setzero_pd(), _mm256_cmp_pd(x, _mm256_set1_pd(kMinLog), _CMP_LT_OQ));
    return _mm256_blendv_pd(out, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
}

RSCTMDP_AVX2 inline double hsum(__m256d v) {
    alignas(32) double lane[4];
    _mm256_store_pd(lane, v);
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

RSCTMDP_AVX2 inline __m256d gathered_term(const double* rate, const std::int32_t* to, const std::int32_t* from,
                                          const double* psi) {
    const __m128i ito = _mm_loadu_si128(reinterpret_cast<const __m128i*>(to));
    const __m128i ifrom = _mm_loadu_si128(reinterpret_cast<const __m128i*>(from));
    const __m256d diff = _mm256_sub_pd(_mm256_i32gather_pd(psi, ito, 8), _mm256_i32gather_pd(psi, ifrom, 8));
    return _mm256_mul_pd(_mm256_loadu_pd(rate), exp_pd(diff));
}

}  // namespace

bool available() {
    static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return ok;
}

RSCTMDP_AVX2 void exp_array(const double* x, double* out, std::size_t n) {
    std::size_t e = 0;
    for (; e + 4 <= n; e += 4) _mm256_storeu_pd(out + e, exp_pd(_mm256_loadu_pd(x + e)));
    if (e < n) {
        alignas(32) double in[4] = {0.0, 0.0, 0.0, 0.0};
        alignas(32) double res[4];
        std::copy(x + e, x + n, in);
        _mm256_store_pd(res, exp_pd(_mm256_load_pd(in)));
        std::copy(res, res + (n - e), out + e);
    }
}

RSCTMDP_AVX2 void weighted_exp_gather(const double* rate, const std::int32_t* to, const std::int32_t* from,
                                      const double* psi, double* out, std::size_t n) {
    std::size_t e = 0;
    for (; e + 4 <= n; e += 4) _mm256_storeu_pd(out + e, gathered_term(rate + e, to + e, from + e, psi));
    if (e < n) {
        alignas(32) double r[4] = {0.0, 0.0, 0.0, 0.0};
        std::int32_t t[4] = {0, 0, 0, 0};
        std::int32_t f[4] = {0, 0, 0, 0};
        alignas(32) double res[4];
        std::copy(rate + e, rate + n, r);
        std::copy(to + e, to + n, t);
        std::copy(from + e, from + n, f);
        _mm256_store_pd(res, gathered_term(r, t, f, psi));
        std::copy(res, res + (n - e), out + e);
    }
}

RSCTMDP_AVX2 double max_value(const double* x, std::size_t n) {
    const double neg_inf = -std::numeric_limits<double>::infinity();
    __m256d m = _mm256_set1_pd(neg_inf);
    std::size_t e = 0;
    for (; e + 4 <= n; e += 4) m = _mm256_max_pd(m, _mm256_loadu_pd(x + e));
    alignas(32) double lane[4];
    _mm256_store_pd(lane, m);
    double best = std::max(std::max(lane[0], lane[1]), std::max(lane[2], lane[3]));
    for (; e < n; ++e) best = std::max(best, x[e]);
    return best;
}

RSCTMDP_AVX2 ExpMoments exp_moments(const double* x, std::size_t n, double shift) {
    const __m256d s = _mm256_set1_pd(shift);
    __m256d first = _mm256_setzero_pd();
    __m256d second = _mm256_setzero_pd();
    std::size_t e = 0;
    for (; e + 4 <= n; e += 4) {
        const __m256d w = exp_pd(_mm256_sub_pd(_mm256_loadu_pd(x + e), s));
        first = _mm256_add_pd(first, w);
        second = _mm256_fmadd_pd(w, w, second);
    }
    if (e < n) {
        alignas(32) double in[4];
        std::fill(in, in + 4, -std::numeric_limits<double>::infinity());
        std::copy(x + e, x + n, in);
        const __m256d w = exp_pd(_mm256_sub_pd(_mm256_load_pd(in), s));
        first = _mm256_add_pd(first, w);
        second = _mm256_fmadd_pd(w, w, second);
    }
    return ExpMoments{hsum(first), hsum(second)};
}

#else  // !RSCTMDP_HAVE_AVX2

bool available() { return false; }
void exp_array(const double* x, double* out, std::size_t n) { scalar::exp_array(x, out, n); }
void weighted_exp_gather(const double* rate, const std::int32_t* to, const std::int32_t* from, const double* psi,
                         double* out, std::size_t n) {
    scalar::weighted_exp_gather(rate, to, from, psi, out, n);
}
double max_value(const double* x, std::size_t n) { return scalar::max_value(x, n); }
ExpMoments exp_moments(const double* x, std::size_t n, double shift) { return scalar::exp_moments(x, n, shift); }

#endif

}  // namespace rsctmdp::kernels::avx2
