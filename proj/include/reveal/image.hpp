#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reveal {

/// Square grayscale luminance image in row-major order.
///
/// Corpus images live in [0,1]. Rendered images (noise, reconstructions) are
/// unclipped linear combinations and may stray outside; they are clipped only
/// when exported to 8-bit files.
class WorkingImage {
public:
    WorkingImage() = default;
    WorkingImage(int side, std::vector<double> pixels, std::string source_id = {},
                 std::optional<std::string> category_label = std::nullopt);

    static WorkingImage flat(int side, double value, std::string source_id = {});

    int side() const noexcept { return side_; }
    std::size_t size() const noexcept { return pixels_.size(); }
    bool empty() const noexcept { return pixels_.empty(); }

    std::span<const double> pixels() const noexcept { return pixels_; }
    std::span<double> pixels() noexcept { return pixels_; }
    const std::vector<double>& data() const noexcept { return pixels_; }

    double at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * side_ + x]; }
    double& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * side_ + x]; }

    double mean() const;
    /// True when every pixel is within [0,1].
    bool in_unit_range() const;

    const std::string& source_id() const noexcept { return source_id_; }
    void set_source_id(std::string id) { source_id_ = std::move(id); }
    const std::optional<std::string>& category_label() const noexcept { return label_; }
    void set_category_label(std::optional<std::string> label) { label_ = std::move(label); }

    friend bool operator==(const WorkingImage& a, const WorkingImage& b)
    {
        return a.side_ == b.side_ && a.pixels_ == b.pixels_;
    }

private:
    int side_ = 0;
    std::vector<double> pixels_;
    std::string source_id_;
    std::optional<std::string> label_;
};

/// Copy with every pixel clamped to [0,1].
WorkingImage clipped(const WorkingImage& image);

} // namespace reveal
