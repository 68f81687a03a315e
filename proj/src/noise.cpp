#include "reveal/noise.hpp"

#include "reveal/error.hpp"

#include <cmath>
#include <random>

namespace reveal {

std::string provenance_string(std::uint8_t flags)
{
    std::string s;
    auto add = [&](std::uint8_t bit, const char* name) {
        if (flags & bit) {
            if (!s.empty()) {
                s += '+';
            }
            s += name;
        }
    };
    add(kInitial, "initial");
    add(kSelected, "selected");
    add(kCrossover, "crossover");
    add(kMutated, "mutated");
    add(kMigrant, "migrant");
    return s.empty() ? "none" : s;
}

WorkingImage NoiseSpace::render(const Eigen::VectorXd& genes) const
{
    require(genes.size() == static_cast<Eigen::Index>(dims()), ErrorCode::InvalidInput, "genome length mismatch");
    std::vector<double> px(static_cast<std::size_t>(side()) * side());
    render_into({genes.data(), static_cast<std::size_t>(genes.size())}, px);
    return WorkingImage(side(), std::move(px));
}

Individual NoiseSpace::make_individual(Eigen::VectorXd genes, std::uint64_t id, int generation,
                                       std::uint8_t provenance) const
{
    Individual ind;
    ind.id = id;
    ind.birth_generation = generation;
    ind.rendered = render(genes);
    ind.scores = std::move(genes);
    ind.provenance = provenance;
    return ind;
}

PcNoiseSpace::PcNoiseSpace(FeatureModel model, NoiseDistribution dist) : model_(std::move(model)), dist_(dist) {}

Eigen::VectorXd PcNoiseSpace::sample(Rng& rng) const
{
    const auto& st = model_.score_stats();
    Eigen::VectorXd s(model_.k());
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (dist_ == NoiseDistribution::Uniform) {
            std::uniform_real_distribution<double> u(st.min[k], st.max[k]);
            s[k] = st.max[k] > st.min[k] ? u(rng) : st.min[k];
        } else {
            std::normal_distribution<double> g(0.0, st.std[k]);
            s[k] = st.std[k] > 0.0 ? g(rng) : 0.0;
        }
    }
    return s;
}

void PcNoiseSpace::render_into(std::span<const double> genes, std::span<double> pixels) const
{
    model_.reconstruct_into(genes, pixels);
}

Eigen::VectorXd PcNoiseSpace::expected_genes() const
{
    const auto& st = model_.score_stats();
    if (dist_ == NoiseDistribution::Gaussian) {
        return Eigen::VectorXd::Zero(model_.k());
    }
    return 0.5 * (st.min + st.max);
}

WhiteNoiseSpace::WhiteNoiseSpace(int side) : side_(side)
{
    require(side > 0, ErrorCode::InvalidInput, "white noise side must be positive");
    std_ = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dims()), 1.0 / std::sqrt(12.0));
}

Eigen::VectorXd WhiteNoiseSpace::sample(Rng& rng) const
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::VectorXd px(static_cast<Eigen::Index>(dims()));
    for (auto& v : px) {
        v = u(rng);
    }
    return px;
}

void WhiteNoiseSpace::render_into(std::span<const double> genes, std::span<double> pixels) const
{
    require(genes.size() == pixels.size(), ErrorCode::InvalidInput, "genome length mismatch");
    std::copy(genes.begin(), genes.end(), pixels.begin());
}

Eigen::VectorXd WhiteNoiseSpace::expected_genes() const
{
    return Eigen::VectorXd::Constant(static_cast<Eigen::Index>(dims()), 0.5);
}

Individual sample_noise(const NoiseSpace& space, Rng& rng, std::uint64_t id, int generation)
{
    return space.make_individual(space.sample(rng), id, generation, kInitial);
}

Individual sample_noise(const FeatureModel& model, Rng& rng) { return sample_noise(PcNoiseSpace(model), rng); }

Individual sample_rejecting(const NoiseSpace& space, Rng& rng, const ChanceDistribution& chance,
                            const CorrelationTarget& target, double percentile, std::uint64_t id, int generation)
{
    require(chance.target_id == target.id(), ErrorCode::InvalidInput,
            "chance distribution was built against a different target");
    if (percentile >= 100.0) {
        return sample_noise(space, rng, id, generation);
    }
    const double threshold = chance.quantile(percentile);
    for (int attempt = 0; attempt < kMaxConsecutiveRejections; ++attempt) {
        Individual ind = sample_noise(space, rng, id, generation);
        if (target.correlate(ind.rendered) < threshold) {
            return ind;
        }
    }
    fail(ErrorCode::RejectionStuck, "10000 consecutive noise samples rejected; degenerate target?");
}

} // namespace reveal
