#pragma once

// Reconstruction evaluation: retrieval, classification, averaging and the
// chance baselines that go with them.

#include "reveal/corpus.hpp"
#include "reveal/featurespace.hpp"
#include "reveal/io/image_io.hpp"
#include "reveal/noise.hpp"
#include "reveal/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace reveal {

struct RetrievalHit {
    std::string source_id;
    double correlation = 0.0;
    std::optional<std::string> category_label;
    std::size_t index = 0; // position in the database
};

struct RetrievalResult {
    std::string query_id;
    std::vector<RetrievalHit> hits; // correlation non-increasing
    std::size_t k = 0;

    /// Share of hits labeled `category`.
    double category_fraction(const std::string& category) const;
};

/// Top-k database images by pixel correlation with `query`; ties broken by
/// source id. k larger than the database yields the full ranking. Constant
/// database images rank last with correlation 0.
RetrievalResult nearest_neighbors(const WorkingImage& query, const Corpus& db, std::size_t k, unsigned jobs = 1);

/// Same ranking computed on PCA scores instead of pixels.
RetrievalResult nearest_neighbors(const WorkingImage& query, const Corpus& db, std::size_t k,
                                  const FeatureModel& model, unsigned jobs = 1);

struct ClassifierResult {
    std::vector<int> assignment;   // target index per reconstruction; -1 when excluded
    std::vector<std::size_t> excluded;
    std::size_t correct = 0;
    std::size_t evaluated = 0;
    double accuracy = 0.0;
    double chance = 0.0;
    double p_value = 1.0; // exact one-sided binomial, P(X >= correct)
};

/// Assigns each reconstruction to its best-correlated target and scores the
/// assignment against `truth` (target index per reconstruction).
ClassifierResult correlation_classifier(const std::vector<WorkingImage>& reconstructions,
                                        const std::vector<WorkingImage>& targets, const std::vector<int>& truth);

/// Upper tail P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::size_t k, std::size_t n, double p);

/// Pixel-wise mean.
WorkingImage average_reconstructions(const std::vector<WorkingImage>& images);

struct ProportionSummary {
    std::vector<double> proportions; // one per bootstrap draw, in draw order
    double mean = 0.0;
    double sd = 0.0;
    double quantile(double percentile) const;
};

/// B draws of k distinct database images; the share labeled `category` per draw.
ProportionSummary bootstrap_category_chance(const Corpus& db, std::size_t k, std::size_t draws,
                                            const std::string& category, Rng& rng);

/// For each of `m` noise images (image i from stream_rng(seed, i)), the
/// maximum correlation over the database. Sorted ascending.
std::vector<double> retrieval_chance_max(const NoiseSpace& space, const Corpus& db, std::size_t m,
                                         std::uint64_t seed, unsigned jobs = 1);

/// Tab-separated rank, source id, correlation and label.
void write_retrieval_table(const std::filesystem::path& path, const RetrievalResult& result);

/// Query followed by its hits in one row, separated by a gap of `gap` pixels
/// at mid-gray.
io::GrayRaster gallery_strip(const WorkingImage& query, const std::vector<WorkingImage>& hits, int gap = 4);

/// Grid of images, `columns` per row.
io::GrayRaster gallery_grid(const std::vector<WorkingImage>& images, int columns, int gap = 4);

} // namespace reveal
