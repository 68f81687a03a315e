#include "reveal/similarity.hpp"

#include "reveal/error.hpp"
#include "reveal/hash.hpp"
#include "reveal/io/binary.hpp"
#include "reveal/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace reveal {
namespace {

constexpr const char* kChanceMagic = "RVLCHNC";
constexpr std::uint32_t kChanceVersion = 1;

} // namespace

double pixel_correlation(std::span<const double> a, std::span<const double> b)
{
    require(a.size() == b.size() && !a.empty(), ErrorCode::InvalidInput, "correlation needs equal, non-empty images");
    const double n = static_cast<double>(a.size());
    const double ma = simd::sum(a) / n;
    const double mb = simd::sum(b) / n;
    const simd::CenteredMoments m = simd::centered_moments(a, ma, b, mb);
    require(m.sxx > 0.0 && m.syy > 0.0, ErrorCode::UndefinedCorrelation, "correlation with a constant image");
    return std::clamp(m.sxy / std::sqrt(m.sxx * m.syy), -1.0, 1.0);
}

double pixel_correlation(const WorkingImage& a, const WorkingImage& b)
{
    require(a.side() == b.side(), ErrorCode::InvalidInput, "correlation needs equal dimensions");
    return pixel_correlation(a.pixels(), b.pixels());
}

CorrelationTarget::CorrelationTarget(const WorkingImage& target)
    : image_(target), centered_(target.data()), id_(sha256_hex(target.pixels()))
{
    const double mean = target.mean();
    for (double& v : centered_) {
        v -= mean;
    }
    norm_ = std::sqrt(simd::dot(centered_, centered_));
    require(norm_ > 0.0, ErrorCode::UndefinedCorrelation, "constant target image");
}

double CorrelationTarget::correlate(std::span<const double> pixels) const
{
    require(pixels.size() == centered_.size(), ErrorCode::InvalidInput, "image size does not match target");
    // sum (x - mean x)(t - mean t) == sum x (t - mean t)
    const double n = static_cast<double>(pixels.size());
    const double mean = simd::sum(pixels) / n;
    const double sxx = simd::centered_sumsq(pixels, mean);
    require(sxx > 0.0, ErrorCode::UndefinedCorrelation, "correlation with a constant image");
    const double sxy = simd::dot(pixels, centered_);
    return std::clamp(sxy / (std::sqrt(sxx) * norm_), -1.0, 1.0);
}

double ChanceDistribution::quantile(double percentile) const
{
    require(!samples.empty(), ErrorCode::InvalidInput, "empty chance distribution");
    const double p = std::clamp(percentile, 0.0, 100.0);
    const auto n = static_cast<double>(samples.size());
    auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * n));
    rank = std::clamp<std::size_t>(rank, 1, samples.size());
    return samples[rank - 1];
}

double percentile_of(const ChanceDistribution& chance, double value)
{
    require(!chance.samples.empty(), ErrorCode::InvalidInput, "empty chance distribution");
    const auto below = std::lower_bound(chance.samples.begin(), chance.samples.end(), value) - chance.samples.begin();
    return 100.0 * static_cast<double>(below) / static_cast<double>(chance.samples.size());
}

void ChanceDistribution::save(const std::filesystem::path& path) const
{
    io::BinaryWriter w(kChanceMagic, kChanceVersion);
    w.str(target_id);
    w.str(model_id);
    w.u64(seed);
    w.f64s(samples);
    w.save_atomic(path);
}

ChanceDistribution ChanceDistribution::load(const std::filesystem::path& path)
{
    auto r = io::BinaryReader::open(path, kChanceMagic);
    require(r.version() == kChanceVersion, ErrorCode::Format, "unsupported chance file version");
    ChanceDistribution c;
    c.target_id = r.str();
    c.model_id = r.str();
    c.seed = r.u64();
    c.samples = r.f64s();
    require(std::is_sorted(c.samples.begin(), c.samples.end()) && r.at_end(), ErrorCode::Format,
            "corrupt chance file");
    return c;
}

void ChanceDistribution::write_text(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
    char buf[32];
    for (double v : samples) {
        std::snprintf(buf, sizeof buf, "%.17g\n", v);
        out << buf;
    }
}

} // namespace reveal
