#include "reveal/simd/kernels.hpp"

namespace reveal::simd::detail {
namespace {

double sum_scalar(const double* x, std::size_t n)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += x[i];
    }
    return s;
}

double dot_scalar(const double* x, const double* y, std::size_t n)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        s += x[i] * y[i];
    }
    return s;
}

double centered_sumsq_scalar(const double* x, std::size_t n, double mean)
{
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = x[i] - mean;
        s += d * d;
    }
    return s;
}

CenteredMoments centered_moments_scalar(const double* x, double mx, const double* y, double my,
                                        std::size_t n)
{
    CenteredMoments m;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        m.sxx += dx * dx;
        m.syy += dy * dy;
        m.sxy += dx * dy;
    }
    return m;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y)
{
    for (std::size_t i = 0; i < rows; ++i) {
        y[i] = 0.0;
    }
    for (std::size_t j = 0; j < cols; ++j) {
        const double xj = x[j];
        const double* col = a + j * rows;
        for (std::size_t i = 0; i < rows; ++i) {
            y[i] += col[i] * xj;
        }
    }
}

constexpr KernelTable kScalar{
    sum_scalar, dot_scalar, centered_sumsq_scalar, centered_moments_scalar, axpy_scalar, gemv_scalar,
};

} // namespace

const KernelTable& scalar_table() noexcept { return kScalar; }

} // namespace reveal::simd::detail
