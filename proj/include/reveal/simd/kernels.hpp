#pragma once

// Data-parallel inner loops shared by rendering, correlation and sampling.
//
// Every kernel has a scalar reference implementation; vectorized variants are
// selected once at startup from the host CPU and can be overridden with
// REVEAL_SIMD=scalar|avx2 or set_active_isa(). All matrices are column-major.

#include <cstddef>
#include <span>
#include <string_view>

namespace reveal::simd {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;

/// Second-order moments of two vectors about given means.
struct CenteredMoments {
    double sxx = 0.0;
    double syy = 0.0;
    double sxy = 0.0;
};

struct KernelTable {
    double (*sum)(const double* x, std::size_t n);
    double (*dot)(const double* x, const double* y, std::size_t n);
    /// sum (x_i - mean)^2
    double (*centered_sumsq)(const double* x, std::size_t n, double mean);
    CenteredMoments (*centered_moments)(const double* x, double mx, const double* y, double my,
                                        std::size_t n);
    /// y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    /// y = A x for a rows x cols column-major A.
    void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
};

bool isa_supported(Isa isa) noexcept;
const KernelTable& kernels_for(Isa isa);

Isa active_isa() noexcept;
void set_active_isa(Isa isa);
const KernelTable& kernels() noexcept;

// Span front-ends over the active table.

double sum(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);
double centered_sumsq(std::span<const double> x, double mean);
CenteredMoments centered_moments(std::span<const double> x, double mx, std::span<const double> y,
                                 double my);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y);

namespace detail {
const KernelTable& scalar_table() noexcept;
const KernelTable* avx2_table() noexcept; // nullptr when not compiled in
} // namespace detail

} // namespace reveal::simd
