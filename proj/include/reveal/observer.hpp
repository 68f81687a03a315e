#pragma once

// Simulated observers: empirical chance distributions, the ideal observer
// driving the GA, and two baselines (superstitious classification images and
// a GA over pixel white noise).

#include "reveal/evolve.hpp"
#include "reveal/noise.hpp"
#include "reveal/similarity.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

namespace reveal {

/// `n` independent noise samples correlated against `target`, sorted.
/// Sample i is drawn from stream_rng(seed, i); `jobs` does not affect results.
ChanceDistribution build_chance(const NoiseSpace& space, const CorrelationTarget& target, std::size_t n,
                                std::uint64_t seed, unsigned jobs = 1);
ChanceDistribution build_chance(const FeatureModel& model, const WorkingImage& target, std::size_t n,
                                std::uint64_t seed, unsigned jobs = 1);

/// Reuses a cached distribution keyed by (model id, target id, n, seed).
ChanceDistribution cached_chance(const std::filesystem::path& cache_dir, const FeatureModel& model,
                                 const CorrelationTarget& target, std::size_t n, std::uint64_t seed,
                                 unsigned jobs = 1);

/// 0 when `a` correlates better with the target, 1 for `b`; exact ties are a coin flip.
int ideal_choice(const Individual& a, const Individual& b, const CorrelationTarget& target, Rng& rng);

/// Answers every open trial of `gen` as the ideal observer.
void rank_ideal(Generation& gen, const CorrelationTarget& target, Rng& rng);

struct StopCriterion {
    std::optional<double> percentile;  // best exceeds this chance percentile
    std::optional<double> correlation; // best reaches this correlation
    int max_generations = 100;
};

struct GenerationStats {
    int index = 0;
    double mean_correlation = 0.0;
    double max_correlation = 0.0;
    double best_percentile = 0.0; // NaN without a chance distribution
};

struct IdealRunResult {
    std::vector<GenerationStats> curve;
    /// Chance percentile -> first generation whose best Individual is at or
    /// above it (at least that share of chance samples strictly below).
    std::map<double, int> generations_to_percentile;
    Individual best; // best Individual seen in any generation
    double best_correlation = -1.0;
    int generations = 0;
    bool converged = false;
    Generation final_generation;
};

struct IdealRunOptions {
    GAConfig config;
    StopCriterion stop;
    const ChanceDistribution* chance = nullptr; // required for percentile stops and initial rejection
    std::vector<double> tracked_percentiles{95.0, 99.0, 99.99};
};

IdealRunResult run_ideal(const NoiseSpace& space, const CorrelationTarget& target, const IdealRunOptions& options,
                         Rng& rng);

/// Same GA loop over per-pixel uniform white noise: crossover interleaves
/// odd/even pixels, mutation perturbs pixels by mut_scale of the pixel std.
IdealRunResult run_whitenoise_baseline(int side, const CorrelationTarget& target, GAConfig config, int budget,
                                       Rng& rng);

struct SuperstitiousResult {
    WorkingImage classification_image;
    std::size_t accepted = 0;
    std::size_t trials = 0;
    double correlation = 0.0; // classification image vs target
};

/// One noise image per trial, accepted iff its correlation with the target
/// exceeds the chance distribution's `criterion_percentile` value
/// (criterion <= 0 accepts everything). Classification image =
/// mean(accepted) - mean(rejected); with nothing rejected the reference is
/// the sampler's expected image.
SuperstitiousResult superstitious_sim(const NoiseSpace& space, const CorrelationTarget& target,
                                      const ChanceDistribution& chance, std::size_t trials,
                                      double criterion_percentile, std::uint64_t seed, unsigned jobs = 1);

} // namespace reveal
