#pragma once

#include "reveal/featurespace.hpp"
#include "reveal/rng.hpp"
#include "reveal/similarity.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <string>

namespace reveal {

/// Provenance bits recorded on every Individual.
enum Provenance : std::uint8_t {
    kInitial = 1u << 0,
    kSelected = 1u << 1,  // copied from a winner of the previous generation
    kCrossover = 1u << 2,
    kMutated = 1u << 3,
    kMigrant = 1u << 4,   // fresh random replacement
};

std::string provenance_string(std::uint8_t flags);

/// One noise image: its genome (PC scores, or pixels for the white-noise
/// baseline) plus the eagerly rendered pixels.
struct Individual {
    std::uint64_t id = 0;
    int birth_generation = 1;
    Eigen::VectorXd scores;
    WorkingImage rendered;
    std::uint8_t provenance = kInitial;
    std::uint64_t parent_a = 0; // 0 = none; ids start at 1
    std::uint64_t parent_b = 0;
    /// Wins accumulated by this Individual's ancestors along the parent_a line.
    std::int64_t lineage_wins = 0;
};

enum class NoiseDistribution { Uniform, Gaussian };

/// A genome space the GA can search: how to draw, scale and render genomes.
class NoiseSpace {
public:
    virtual ~NoiseSpace() = default;

    virtual std::size_t dims() const = 0;
    virtual int side() const = 0;
    virtual Eigen::VectorXd sample(Rng& rng) const = 0;
    /// Reference spread per gene; mutation steps are a fraction of it.
    virtual const Eigen::VectorXd& gene_std() const = 0;
    virtual void render_into(std::span<const double> genes, std::span<double> pixels) const = 0;
    /// Mean genome of the sampling distribution.
    virtual Eigen::VectorXd expected_genes() const = 0;

    WorkingImage render(const Eigen::VectorXd& genes) const;
    Individual make_individual(Eigen::VectorXd genes, std::uint64_t id, int generation,
                               std::uint8_t provenance) const;
};

/// Natural-statistics noise: scores drawn per component from the model's
/// observed range (uniform, default) or N(0, std_k^2).
class PcNoiseSpace final : public NoiseSpace {
public:
    explicit PcNoiseSpace(FeatureModel model, NoiseDistribution dist = NoiseDistribution::Uniform);

    std::size_t dims() const override { return static_cast<std::size_t>(model_.k()); }
    int side() const override { return model_.side(); }
    Eigen::VectorXd sample(Rng& rng) const override;
    const Eigen::VectorXd& gene_std() const override { return model_.score_stats().std; }
    void render_into(std::span<const double> genes, std::span<double> pixels) const override;
    Eigen::VectorXd expected_genes() const override;

    const FeatureModel& model() const noexcept { return model_; }

private:
    FeatureModel model_;
    NoiseDistribution dist_;
};

/// Per-pixel i.i.d. uniform [0,1] noise; genes are the pixels themselves.
class WhiteNoiseSpace final : public NoiseSpace {
public:
    explicit WhiteNoiseSpace(int side);

    std::size_t dims() const override { return static_cast<std::size_t>(side_) * side_; }
    int side() const override { return side_; }
    Eigen::VectorXd sample(Rng& rng) const override;
    const Eigen::VectorXd& gene_std() const override { return std_; }
    void render_into(std::span<const double> genes, std::span<double> pixels) const override;
    Eigen::VectorXd expected_genes() const override;

private:
    int side_;
    Eigen::VectorXd std_;
};

Individual sample_noise(const NoiseSpace& space, Rng& rng, std::uint64_t id = 0, int generation = 1);
Individual sample_noise(const FeatureModel& model, Rng& rng);

inline constexpr int kMaxConsecutiveRejections = 10'000;

/// Draws until the correlation with `target` is strictly below the chance
/// distribution's `percentile` value. percentile >= 100 accepts the first draw.
Individual sample_rejecting(const NoiseSpace& space, Rng& rng, const ChanceDistribution& chance,
                            const CorrelationTarget& target, double percentile, std::uint64_t id = 0,
                            int generation = 1);

} // namespace reveal
