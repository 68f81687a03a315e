#pragma once

// Pixel correlation and empirical chance distributions.

#include "reveal/image.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace reveal {

/// Pearson correlation over all pixels. Throws UndefinedCorrelation when
/// either image is constant.
double pixel_correlation(const WorkingImage& a, const WorkingImage& b);
double pixel_correlation(std::span<const double> a, std::span<const double> b);

/// Target prepared for repeated correlation against many images.
class CorrelationTarget {
public:
    explicit CorrelationTarget(const WorkingImage& target);

    double correlate(std::span<const double> pixels) const;
    double correlate(const WorkingImage& image) const { return correlate(image.pixels()); }

    const WorkingImage& image() const noexcept { return image_; }
    /// SHA-256 of the target pixels.
    const std::string& id() const noexcept { return id_; }

private:
    WorkingImage image_;
    std::vector<double> centered_;
    double norm_ = 0.0;
    std::string id_;
};

/// Sorted correlations of random noise images against one target.
struct ChanceDistribution {
    std::string target_id;
    std::string model_id;
    std::uint64_t seed = 0;
    std::vector<double> samples; // ascending

    std::size_t size() const noexcept { return samples.size(); }
    /// Nearest-rank quantile: smallest sample with at least p% of samples at or below it.
    double quantile(double percentile) const;

    void save(const std::filesystem::path& path) const;
    static ChanceDistribution load(const std::filesystem::path& path);
    /// One value per line, ascending.
    void write_text(const std::filesystem::path& path) const;
};

/// Percentage of chance samples strictly below `value`.
double percentile_of(const ChanceDistribution& chance, double value);

} // namespace reveal
