// AVX2 + FMA variants, 4 doubles per lane. Tails fall back to scalar loops.
// Compiled with -mavx2 -mfma; only reached after a runtime CPU check.

#include "reveal/simd/kernels.hpp"

#if defined(REVEAL_HAVE_AVX2)

#include <immintrin.h>

namespace reveal::simd::detail {
namespace {

constexpr std::size_t kLane = 4;

inline double hsum(__m256d v)
{
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double sum_avx2(const double* x, std::size_t n)
{
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kLane <= n; i += 2 * kLane) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
        acc1 = _mm256_add_pd(acc1, _mm256_loadu_pd(x + i + kLane));
    }
    for (; i + kLane <= n; i += kLane) {
        acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(x + i));
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        s += x[i];
    }
    return s;
}

double dot_avx2(const double* x, const double* y, std::size_t n)
{
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 2 * kLane <= n; i += 2 * kLane) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + kLane), _mm256_loadu_pd(y + i + kLane), acc1);
    }
    for (; i + kLane <= n; i += kLane) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        s += x[i] * y[i];
    }
    return s;
}

double centered_sumsq_avx2(const double* x, std::size_t n, double mean)
{
    const __m256d m = _mm256_set1_pd(mean);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + kLane <= n; i += kLane) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), m);
        acc = _mm256_fmadd_pd(d, d, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - mean;
        s += d * d;
    }
    return s;
}

CenteredMoments centered_moments_avx2(const double* x, double mx, const double* y, double my,
                                      std::size_t n)
{
    const __m256d vmx = _mm256_set1_pd(mx);
    const __m256d vmy = _mm256_set1_pd(my);
    __m256d axx = _mm256_setzero_pd();
    __m256d ayy = _mm256_setzero_pd();
    __m256d axy = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + kLane <= n; i += kLane) {
        const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(x + i), vmx);
        const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(y + i), vmy);
        axx = _mm256_fmadd_pd(dx, dx, axx);
        ayy = _mm256_fmadd_pd(dy, dy, ayy);
        axy = _mm256_fmadd_pd(dx, dy, axy);
    }
    CenteredMoments m{hsum(axx), hsum(ayy), hsum(axy)};
    for (; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        m.sxx += dx * dx;
        m.syy += dy * dy;
        m.sxy += dx * dy;
    }
    return m;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n)
{
    const __m256d a = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + kLane <= n; i += kLane) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(a, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

// Four columns per sweep so each y block is loaded/stored once per 4 FMAs.
void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y)
{
    for (std::size_t i = 0; i < rows; ++i) {
        y[i] = 0.0;
    }
    std::size_t j = 0;
    for (; j + 4 <= cols; j += 4) {
        const double* c0 = a + j * rows;
        const double* c1 = c0 + rows;
        const double* c2 = c1 + rows;
        const double* c3 = c2 + rows;
        const __m256d x0 = _mm256_set1_pd(x[j]);
        const __m256d x1 = _mm256_set1_pd(x[j + 1]);
        const __m256d x2 = _mm256_set1_pd(x[j + 2]);
        const __m256d x3 = _mm256_set1_pd(x[j + 3]);
        std::size_t i = 0;
        for (; i + kLane <= rows; i += kLane) {
            __m256d acc = _mm256_loadu_pd(y + i);
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(c0 + i), x0, acc);
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(c1 + i), x1, acc);
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(c2 + i), x2, acc);
            acc = _mm256_fmadd_pd(_mm256_loadu_pd(c3 + i), x3, acc);
            _mm256_storeu_pd(y + i, acc);
        }
        for (; i < rows; ++i) {
            y[i] += c0[i] * x[j] + c1[i] * x[j + 1] + c2[i] * x[j + 2] + c3[i] * x[j + 3];
        }
    }
    for (; j < cols; ++j) {
        axpy_avx2(x[j], a + j * rows, y, rows);
    }
}

constexpr KernelTable kAvx2{
    sum_avx2, dot_avx2, centered_sumsq_avx2, centered_moments_avx2, axpy_avx2, gemv_avx2,
};

} // namespace

const KernelTable* avx2_table() noexcept { return &kAvx2; }

} // namespace reveal::simd::detail

#else

namespace reveal::simd::detail {
const KernelTable* avx2_table() noexcept { return nullptr; }
} // namespace reveal::simd::detail

#endif
