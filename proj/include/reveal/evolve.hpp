#pragma once

// Genetic algorithm over noise genomes, driven by pairwise (2AFC) choices.
//
// One generation: every Individual is shown in exactly `views` scheduled
// pairs; each answered pair credits one win. Advancing applies, in order,
// roulette selection into a proto-generation, odd/even crossover, Gaussian
// mutation and migration (replacement by fresh noise).

#include "reveal/noise.hpp"
#include "reveal/rng.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace reveal {

enum class MutationMode {
    Additive,       // s_k += N(0, (scale * std_k)^2)
    Multiplicative, // s_k *= 1 + N(0, scale^2)
};

struct GAConfig {
    int population = 100;
    int views = 5;
    double p_cross = 0.4;
    double p_mut = 0.3;
    double mut_scale = 0.05;
    double mig_initial = 0.6; // migration probability when creating generation 2
    double mig_decay = 0.5;
    /// Reject initial noise at or above this chance percentile (needs a target).
    std::optional<double> initial_rejection_percentile;
    MutationMode mutation = MutationMode::Additive;

    void validate() const;
    std::size_t trials_per_generation() const
    {
        return static_cast<std::size_t>(population) * static_cast<std::size_t>(views) / 2;
    }
};

struct TrialPair {
    int first = 0;
    int second = 0;
    friend bool operator==(const TrialPair&, const TrialPair&) = default;
};

/// Each index in [0, population) appears exactly `views` times, never paired
/// with itself. Built from a shuffled multiset with local repair of self-pairs.
std::vector<TrialPair> schedule_pairs(int population, int views, Rng& rng);

struct Generation {
    int index = 1; // the initial population is generation 1
    std::vector<Individual> population;
    std::vector<TrialPair> schedule;
    std::vector<int> wins;
    /// Per scheduled trial: -1 unanswered, 0 first won, 1 second won.
    std::vector<std::int8_t> outcomes;
    std::uint64_t next_id = 1;

    std::size_t answered() const;
    bool complete() const { return answered() == schedule.size(); }
    /// Credits the winner of scheduled trial `trial`; side 0 = first, 1 = second.
    void record(std::size_t trial, int winning_side);
    /// Index of the Individual with most wins (ties: lineage wins, then lowest id).
    std::size_t best_by_wins() const;
};

/// Generation 1. With `chance` and `target`, each Individual is drawn with
/// rejection at config.initial_rejection_percentile.
Generation initial_generation(const NoiseSpace& space, const GAConfig& config, Rng& rng,
                              const ChanceDistribution* chance = nullptr,
                              const CorrelationTarget* target = nullptr);

/// Roulette selection: `count` draws with replacement from a pool holding
/// wins[i] copies of Individual i. Returns population indices.
std::vector<std::size_t> select_proto(std::span<const int> wins, std::size_t count, Rng& rng);

/// Child takes 1-based odd components from `a` and even components from `b`.
Eigen::VectorXd crossover_scores(const Eigen::VectorXd& a, const Eigen::VectorXd& b);
Individual crossover(const Individual& a, const Individual& b, const NoiseSpace& space);

Eigen::VectorXd mutate_scores(const Eigen::VectorXd& scores, const Eigen::VectorXd& gene_std, Rng& rng,
                              double mut_scale, MutationMode mode = MutationMode::Additive);
Individual mutate(const Individual& ind, const NoiseSpace& space, Rng& rng, double mut_scale,
                  MutationMode mode = MutationMode::Additive);

/// mig_initial * mig_decay^(index - 2); defined for index >= 2.
double migration_rate(int generation_index, const GAConfig& config = {});

/// Requires every trial of `gen` to be answered.
Generation advance_generation(const Generation& gen, const GAConfig& config, const NoiseSpace& space, Rng& rng);

// Checkpoints: config, RNG state, genomes, wins, outcomes and provenance.

struct Checkpoint {
    GAConfig config;
    std::string rng_state;
    Generation generation;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);
/// Genomes are re-rendered through `space`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const NoiseSpace& space);

} // namespace reveal
