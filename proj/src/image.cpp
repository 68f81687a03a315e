#include "reveal/image.hpp"

#include "reveal/error.hpp"
#include "reveal/simd/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace reveal {

WorkingImage::WorkingImage(int side, std::vector<double> pixels, std::string source_id,
                           std::optional<std::string> category_label)
    : side_(side), pixels_(std::move(pixels)), source_id_(std::move(source_id)),
      label_(std::move(category_label))
{
    require(side > 0, ErrorCode::InvalidInput, "image side must be positive");
    require(pixels_.size() == static_cast<std::size_t>(side) * side, ErrorCode::InvalidInput,
            "image is not square: pixel count does not match side");
    require(std::all_of(pixels_.begin(), pixels_.end(), [](double v) { return std::isfinite(v); }),
            ErrorCode::InvalidInput, "image contains non-finite pixels");
}

WorkingImage WorkingImage::flat(int side, double value, std::string source_id)
{
    return WorkingImage(side, std::vector<double>(static_cast<std::size_t>(side) * side, value),
                        std::move(source_id));
}

double WorkingImage::mean() const
{
    return pixels_.empty() ? 0.0 : simd::sum(pixels_) / static_cast<double>(pixels_.size());
}

bool WorkingImage::in_unit_range() const
{
    return std::all_of(pixels_.begin(), pixels_.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

WorkingImage clipped(const WorkingImage& image)
{
    std::vector<double> px(image.data());
    for (double& v : px) {
        v = std::clamp(v, 0.0, 1.0);
    }
    return WorkingImage(image.side(), std::move(px), image.source_id(), image.category_label());
}

} // namespace reveal
