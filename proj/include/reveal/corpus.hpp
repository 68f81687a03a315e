#pragma once

#include "reveal/image.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace reveal {

/// Ordered set of same-sized working images with unique source ids.
class Corpus {
public:
    Corpus() = default;
    explicit Corpus(std::vector<WorkingImage> images);

    int side() const noexcept { return images_.empty() ? 0 : images_.front().side(); }
    std::size_t size() const noexcept { return images_.size(); }
    bool empty() const noexcept { return images_.empty(); }
    const WorkingImage& operator[](std::size_t i) const { return images_[i]; }
    const std::vector<WorkingImage>& images() const noexcept { return images_; }

    /// True when every image carries a category label.
    bool labeled() const;
    std::vector<std::optional<std::string>> labels() const;

    /// Pixel-wise mean of all images.
    WorkingImage mean_image() const;

    auto begin() const noexcept { return images_.begin(); }
    auto end() const noexcept { return images_.end(); }

private:
    std::vector<WorkingImage> images_;
};

/// Loads every decodable PNG/JPEG/PGM under `dir` as grayscale side x side.
///
/// Files directly in `dir` are unlabeled; files in an immediate subdirectory
/// are labeled with that subdirectory's name. Ordering is by sorted relative
/// path. Undecodable files are skipped with a warning.
Corpus load_corpus(const std::filesystem::path& dir, int side);

inline constexpr const char* kSyntheticFamilies[] = {"street", "mountain", "forest"};

/// Procedural scene corpus: band-limited texture over one of three layout
/// families. Image i is family i % 3 and is drawn from its own RNG stream, so
/// a corpus of n images is a prefix of any larger corpus with the same seed.
Corpus synthesize_test_corpus(std::size_t n, int side, std::uint64_t seed);

/// Single scene from a family (0..2), used for held-out targets.
WorkingImage synthesize_scene(int family, int side, std::uint64_t seed, std::uint64_t stream);

} // namespace reveal
