#include "reveal/simd/kernels.hpp"

#include "reveal/error.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace reveal::simd {
namespace {

bool cpu_has_avx2() noexcept
{
#if defined(REVEAL_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Isa detect_isa() noexcept
{
    if (const char* env = std::getenv("REVEAL_SIMD")) {
        const std::string want(env);
        if (want == "scalar") {
            return Isa::Scalar;
        }
        if (want == "avx2" && cpu_has_avx2()) {
            return Isa::Avx2;
        }
    }
    return cpu_has_avx2() ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<const KernelTable*>& active_table()
{
    static std::atomic<const KernelTable*> table{&kernels_for(detect_isa())};
    return table;
}

std::atomic<Isa>& active_isa_slot()
{
    static std::atomic<Isa> isa{detect_isa()};
    return isa;
}

void check_len(std::size_t a, std::size_t b)
{
    require(a == b, ErrorCode::InvalidInput, "simd: length mismatch");
}

} // namespace

std::string_view isa_name(Isa isa) noexcept
{
    switch (isa) {
    case Isa::Scalar: return "scalar";
    case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

bool isa_supported(Isa isa) noexcept
{
    switch (isa) {
    case Isa::Scalar: return true;
    case Isa::Avx2: return detail::avx2_table() != nullptr && cpu_has_avx2();
    }
    return false;
}

const KernelTable& kernels_for(Isa isa)
{
    require(isa_supported(isa), ErrorCode::InvalidInput,
            "simd: instruction set not available: " + std::string(isa_name(isa)));
    return isa == Isa::Avx2 ? *detail::avx2_table() : detail::scalar_table();
}

Isa active_isa() noexcept { return active_isa_slot().load(); }

void set_active_isa(Isa isa)
{
    const KernelTable& table = kernels_for(isa);
    active_table().store(&table);
    active_isa_slot().store(isa);
}

const KernelTable& kernels() noexcept { return *active_table().load(std::memory_order_relaxed); }

double sum(std::span<const double> x) { return kernels().sum(x.data(), x.size()); }

double dot(std::span<const double> x, std::span<const double> y)
{
    check_len(x.size(), y.size());
    return kernels().dot(x.data(), y.data(), x.size());
}

double centered_sumsq(std::span<const double> x, double mean)
{
    return kernels().centered_sumsq(x.data(), x.size(), mean);
}

CenteredMoments centered_moments(std::span<const double> x, double mx, std::span<const double> y,
                                 double my)
{
    check_len(x.size(), y.size());
    return kernels().centered_moments(x.data(), mx, y.data(), my, x.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y)
{
    check_len(x.size(), y.size());
    kernels().axpy(alpha, x.data(), y.data(), x.size());
}

void gemv(std::span<const double> a, std::size_t rows, std::size_t cols, std::span<const double> x,
          std::span<double> y)
{
    check_len(a.size(), rows * cols);
    check_len(x.size(), cols);
    check_len(y.size(), rows);
    kernels().gemv(a.data(), rows, cols, x.data(), y.data());
}

} // namespace reveal::simd
