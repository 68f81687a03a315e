#include "reveal/corpus.hpp"

#include "reveal/error.hpp"
#include "reveal/io/image_io.hpp"
#include "reveal/rng.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace reveal {

Corpus::Corpus(std::vector<WorkingImage> images) : images_(std::move(images))
{
    std::set<std::string> ids;
    for (const auto& img : images_) {
        require(img.side() == images_.front().side(), ErrorCode::InvalidInput,
                "corpus images must share one side");
        require(ids.insert(img.source_id()).second, ErrorCode::InvalidInput,
                "duplicate source id in corpus: " + img.source_id());
    }
}

bool Corpus::labeled() const
{
    return !images_.empty() &&
           std::all_of(images_.begin(), images_.end(), [](const auto& i) { return i.category_label().has_value(); });
}

std::vector<std::optional<std::string>> Corpus::labels() const
{
    std::vector<std::optional<std::string>> out;
    out.reserve(images_.size());
    for (const auto& img : images_) {
        out.push_back(img.category_label());
    }
    return out;
}

WorkingImage Corpus::mean_image() const
{
    require(!images_.empty(), ErrorCode::NoImages, "mean of empty corpus");
    std::vector<double> acc(images_.front().size(), 0.0);
    for (const auto& img : images_) {
        const auto px = img.pixels();
        for (std::size_t i = 0; i < acc.size(); ++i) {
            acc[i] += px[i];
        }
    }
    for (double& v : acc) {
        v /= static_cast<double>(images_.size());
    }
    return WorkingImage(side(), std::move(acc), "corpus-mean");
}

namespace {

bool has_image_extension(const std::filesystem::path& p)
{
    std::string ext = p.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".pgm";
}

} // namespace

Corpus load_corpus(const std::filesystem::path& dir, int side)
{
    namespace fs = std::filesystem;
    require(side > 0, ErrorCode::InvalidInput, "side must be positive");
    require(fs::is_directory(dir), ErrorCode::NoImages, "not a directory: " + dir.string());

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && has_image_extension(entry.path())) {
            files.push_back(fs::relative(entry.path(), dir));
        } else if (entry.is_directory()) {
            for (const auto& sub : fs::directory_iterator(entry.path())) {
                if (sub.is_regular_file() && has_image_extension(sub.path())) {
                    files.push_back(fs::relative(sub.path(), dir));
                }
            }
        }
    }
    std::sort(files.begin(), files.end());
    require(!files.empty(), ErrorCode::NoImages, "no image files in " + dir.string());

    std::vector<WorkingImage> images;
    for (const auto& rel : files) {
        try {
            const io::GrayRaster raster = io::read_raster(dir / rel);
            std::vector<double> px = (raster.width == side && raster.height == side)
                                         ? raster.values
                                         : io::resample_area(raster, side);
            std::optional<std::string> label;
            if (rel.has_parent_path()) {
                label = rel.parent_path().string();
            }
            images.emplace_back(side, std::move(px), rel.generic_string(), std::move(label));
        } catch (const Error& e) {
            spdlog::warn("skipping {}: {}", rel.string(), e.what());
        }
    }
    require(!images.empty(), ErrorCode::NoImages, "no decodable images in " + dir.string());
    return Corpus(std::move(images));
}

// ---------------------------------------------------------------------------
// Synthetic scenes

namespace {

double smoothstep(double edge0, double edge1, double x)
{
    const double t = std::clamp((x - edge0) / (edge1 - edge0), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Separable Gaussian blur with mirrored borders.
std::vector<double> blur(const std::vector<double>& in, int side, double sigma)
{
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(2 * radius + 1);
    double ks = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
        ks += k[i + radius];
    }
    for (double& v : k) {
        v /= ks;
    }
    auto mirror = [side](int i) {
        while (i < 0 || i >= side) {
            i = i < 0 ? -i - 1 : 2 * side - i - 1;
        }
        return i;
    };
    std::vector<double> tmp(in.size()), out(in.size());
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                acc += k[d + radius] * in[static_cast<std::size_t>(y) * side + mirror(x + d)];
            }
            tmp[static_cast<std::size_t>(y) * side + x] = acc;
        }
    }
    for (int y = 0; y < side; ++y) {
        for (int x = 0; x < side; ++x) {
            double acc = 0.0;
            for (int d = -radius; d <= radius; ++d) {
                acc += k[d + radius] * tmp[static_cast<std::size_t>(mirror(y + d)) * side + x];
            }
            out[static_cast<std::size_t>(y) * side + x] = acc;
        }
    }
    return out;
}

// Zero-mean, unit-std band-limited texture.
std::vector<double> texture(int side, double sigma_px, Rng& rng)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> white(static_cast<std::size_t>(side) * side);
    for (double& v : white) {
        v = gauss(rng);
    }
    std::vector<double> t = blur(white, side, sigma_px);
    double mean = 0.0;
    for (double v : t) {
        mean += v;
    }
    mean /= static_cast<double>(t.size());
    double var = 0.0;
    for (double v : t) {
        var += (v - mean) * (v - mean);
    }
    const double sd = std::sqrt(var / static_cast<double>(t.size()));
    for (double& v : t) {
        v = (v - mean) / (sd > 0.0 ? sd : 1.0);
    }
    return t;
}

// Road converging on a vanishing point, facades on both sides, bright sky.
void paint_street(std::vector<double>& px, int side, Rng& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double horizon = 0.35 + 0.15 * u(rng);
    const double vx = 0.35 + 0.3 * u(rng);
    const double road_half = 0.25 + 0.2 * u(rng);
    const double sky = 0.75 + 0.2 * u(rng);
    const double road = 0.25 + 0.15 * u(rng);
    const double left_facade = 0.3 + 0.4 * u(rng);
    const double right_facade = 0.3 + 0.4 * u(rng);
    const double roof_left = 0.1 + 0.2 * u(rng);
    const double roof_right = 0.1 + 0.2 * u(rng);
    const double soft = 1.5 / side;
    for (int y = 0; y < side; ++y) {
        const double v = (y + 0.5) / side;
        for (int x = 0; x < side; ++x) {
            const double uu = (x + 0.5) / side;
            // depth fraction below horizon: 0 at horizon, 1 at bottom
            const double depth = (v - horizon) / (1.0 - horizon);
            double val = sky - 0.2 * v;
            if (v > horizon) {
                const double half = road_half * depth;
                const double inside = smoothstep(half + soft, half - soft, std::abs(uu - vx));
                val = road * inside + (0.45 + 0.1 * depth) * (1.0 - inside);
            }
            // Facades: rooflines slope toward the vanishing point.
            const double dl = vx - uu;
            const double dr = uu - vx;
            if (dl > 0.0) {
                const double roof = horizon - roof_left * dl / std::max(vx, 0.05) * 2.0;
                const double base = horizon + (1.0 - horizon) * dl / std::max(vx, 0.05) * 0.6;
                const double w = smoothstep(roof - soft, roof + soft, v) * smoothstep(base + soft, base - soft, v) *
                                 smoothstep(0.08, 0.2, dl);
                val = val * (1.0 - w) + left_facade * w;
            }
            if (dr > 0.0) {
                const double roof = horizon - roof_right * dr / std::max(1.0 - vx, 0.05) * 2.0;
                const double base = horizon + (1.0 - horizon) * dr / std::max(1.0 - vx, 0.05) * 0.6;
                const double w = smoothstep(roof - soft, roof + soft, v) * smoothstep(base + soft, base - soft, v) *
                                 smoothstep(0.08, 0.2, dr);
                val = val * (1.0 - w) + right_facade * w;
            }
            px[static_cast<std::size_t>(y) * side + x] = val;
        }
    }
}

// One or two ridgelines against a sky gradient.
void paint_mountain(std::vector<double>& px, int side, Rng& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double base = 0.35 + 0.25 * u(rng);
    double amp[3], freq[3], phase[3];
    for (int i = 0; i < 3; ++i) {
        amp[i] = (0.12 + 0.1 * u(rng)) / (i + 1);
        freq[i] = (1.0 + 2.0 * u(rng)) * (i + 1);
        phase[i] = 2.0 * std::numbers::pi * u(rng);
    }
    const double far_shift = 0.05 + 0.1 * u(rng);
    const double sky = 0.7 + 0.25 * u(rng);
    const double rock = 0.2 + 0.25 * u(rng);
    const double far_rock = 0.45 + 0.2 * u(rng);
    const double soft = 1.5 / side;
    for (int x = 0; x < side; ++x) {
        const double uu = (x + 0.5) / side;
        double ridge = base;
        double far_ridge = base - far_shift;
        for (int i = 0; i < 3; ++i) {
            ridge -= amp[i] * std::sin(2.0 * std::numbers::pi * freq[i] * uu + phase[i]);
            far_ridge -= 0.7 * amp[i] * std::sin(2.0 * std::numbers::pi * freq[i] * uu + phase[i] + 1.3);
        }
        for (int y = 0; y < side; ++y) {
            const double v = (y + 0.5) / side;
            double val = sky - 0.25 * v;
            const double wf = smoothstep(far_ridge - soft, far_ridge + soft, v);
            val = val * (1.0 - wf) + far_rock * wf;
            const double wn = smoothstep(ridge - soft, ridge + soft, v);
            val = val * (1.0 - wn) + (rock + 0.15 * (v - ridge)) * wn;
            px[static_cast<std::size_t>(y) * side + x] = val;
        }
    }
}

// Vertical trunks over a dark canopy with a lighter ground band.
void paint_forest(std::vector<double>& px, int side, Rng& rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double canopy = 0.2 + 0.2 * u(rng);
    const double ground_line = 0.7 + 0.2 * u(rng);
    const double ground = 0.45 + 0.2 * u(rng);
    const int trunks = 3 + static_cast<int>(u(rng) * 5.0);
    const double soft = 1.5 / side;
    for (std::size_t i = 0; i < px.size(); ++i) {
        const double v = (static_cast<double>(i / side) + 0.5) / side;
        const double wg = smoothstep(ground_line - soft, ground_line + soft, v);
        px[i] = canopy * (1.0 - wg) + ground * wg + 0.1 * (1.0 - v);
    }
    for (int t = 0; t < trunks; ++t) {
        const double cx = u(rng);
        const double half = 0.01 + 0.04 * u(rng);
        const double shade = 0.05 + 0.6 * u(rng);
        const double bottom = ground_line + 0.1 * u(rng);
        for (int y = 0; y < side; ++y) {
            const double v = (y + 0.5) / side;
            const double wy = smoothstep(bottom + soft, bottom - soft, v);
            for (int x = 0; x < side; ++x) {
                const double uu = (x + 0.5) / side;
                const double w = wy * smoothstep(half + soft, half - soft, std::abs(uu - cx));
                auto& p = px[static_cast<std::size_t>(y) * side + x];
                p = p * (1.0 - w) + shade * w;
            }
        }
    }
}

} // namespace

WorkingImage synthesize_scene(int family, int side, std::uint64_t seed, std::uint64_t stream)
{
    require(family >= 0 && family < 3, ErrorCode::InvalidInput, "unknown scene family");
    require(side >= 4, ErrorCode::InvalidInput, "side too small for synthetic scenes");
    Rng rng = stream_rng(seed, stream);
    std::vector<double> px(static_cast<std::size_t>(side) * side);
    switch (family) {
    case 0: paint_street(px, side, rng); break;
    case 1: paint_mountain(px, side, rng); break;
    default: paint_forest(px, side, rng); break;
    }
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double sigma = side * (0.01 + 0.05 * u(rng));
    const double amp = 0.04 + 0.08 * u(rng);
    const std::vector<double> tex = texture(side, std::max(0.5, sigma), rng);
    for (std::size_t i = 0; i < px.size(); ++i) {
        px[i] = std::clamp(px[i] + amp * tex[i], 0.0, 1.0);
    }
    return WorkingImage(side, std::move(px), "synthetic-" + std::to_string(seed) + "-" + std::to_string(stream),
                        std::string(kSyntheticFamilies[family]));
}

Corpus synthesize_test_corpus(std::size_t n, int side, std::uint64_t seed)
{
    require(n >= 1, ErrorCode::InvalidInput, "synthetic corpus needs n >= 1");
    std::vector<WorkingImage> images;
    images.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        images.push_back(synthesize_scene(static_cast<int>(i % 3), side, seed, i));
    }
    return Corpus(std::move(images));
}

} // namespace reveal
