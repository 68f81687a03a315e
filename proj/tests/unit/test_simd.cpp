#include "reveal/simd/kernels.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

using namespace reveal::simd;

namespace {

std::vector<double> random_vec(std::size_t n, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    std::vector<double> v(n);
    for (auto& x : v) {
        x = u(rng);
    }
    return v;
}

bool close(double a, double b, double scale)
{
    return std::abs(a - b) <= 1e-12 * std::max(1.0, scale);
}

} // namespace

TEST_CASE("vector kernels agree with the scalar reference on every length")
{
    if (!isa_supported(Isa::Avx2)) {
        MESSAGE("AVX2 not available; equivalence test skipped");
        return;
    }
    const KernelTable& ref = kernels_for(Isa::Scalar);
    const KernelTable& vec = kernels_for(Isa::Avx2);
    std::mt19937_64 rng(11);
    for (std::size_t n = 0; n <= 67; ++n) {
        const auto x = random_vec(n, rng);
        const auto y = random_vec(n, rng);
        const double scale = static_cast<double>(n) * 4.0;
        CHECK(close(ref.sum(x.data(), n), vec.sum(x.data(), n), scale));
        CHECK(close(ref.dot(x.data(), y.data(), n), vec.dot(x.data(), y.data(), n), scale));
        CHECK(close(ref.centered_sumsq(x.data(), n, 0.3), vec.centered_sumsq(x.data(), n, 0.3), scale));
        const auto a = ref.centered_moments(x.data(), 0.1, y.data(), -0.2, n);
        const auto b = vec.centered_moments(x.data(), 0.1, y.data(), -0.2, n);
        CHECK(close(a.sxx, b.sxx, scale));
        CHECK(close(a.syy, b.syy, scale));
        CHECK(close(a.sxy, b.sxy, scale));
        auto y1 = y;
        auto y2 = y;
        ref.axpy(1.7, x.data(), y1.data(), n);
        vec.axpy(1.7, x.data(), y2.data(), n);
        for (std::size_t i = 0; i < n; ++i) {
            CHECK(close(y1[i], y2[i], 4.0));
        }
    }
}

TEST_CASE("gemv kernels agree for ragged shapes")
{
    if (!isa_supported(Isa::Avx2)) {
        return;
    }
    std::mt19937_64 rng(5);
    for (std::size_t rows : {1u, 3u, 4u, 7u, 64u, 129u}) {
        for (std::size_t cols : {1u, 2u, 4u, 5u, 9u, 33u}) {
            const auto a = random_vec(rows * cols, rng);
            const auto x = random_vec(cols, rng);
            std::vector<double> y1(rows, 99.0), y2(rows, -99.0);
            kernels_for(Isa::Scalar).gemv(a.data(), rows, cols, x.data(), y1.data());
            kernels_for(Isa::Avx2).gemv(a.data(), rows, cols, x.data(), y2.data());
            for (std::size_t i = 0; i < rows; ++i) {
                CHECK(close(y1[i], y2[i], 4.0 * static_cast<double>(cols)));
            }
        }
    }
}

TEST_CASE("gemv matches a hand-computed product")
{
    // column-major 2x3: [[1,3,5],[2,4,6]]
    const std::vector<double> a{1, 2, 3, 4, 5, 6};
    const std::vector<double> x{1, 0, -1};
    std::vector<double> y(2);
    gemv(a, 2, 3, x, y);
    CHECK(y[0] == doctest::Approx(-4.0));
    CHECK(y[1] == doctest::Approx(-4.0));
}

TEST_CASE("active instruction set can be switched")
{
    const Isa before = active_isa();
    set_active_isa(Isa::Scalar);
    CHECK(active_isa() == Isa::Scalar);
    const std::vector<double> v{1, 2, 3};
    CHECK(sum(v) == 6.0);
    set_active_isa(before);
    CHECK(active_isa() == before);
}
