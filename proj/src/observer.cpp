#include "reveal/observer.hpp"

#include "reveal/error.hpp"
#include "reveal/hash.hpp"
#include "reveal/parallel.hpp"
#include "reveal/simd/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace reveal {

ChanceDistribution build_chance(const NoiseSpace& space, const CorrelationTarget& target, std::size_t n,
                                std::uint64_t seed, unsigned jobs)
{
    require(target.image().side() == space.side(), ErrorCode::InvalidInput, "target side does not match model");
    require(n >= 1, ErrorCode::InvalidInput, "chance distribution needs n >= 1");
    ChanceDistribution c;
    c.target_id = target.id();
    c.seed = seed;
    c.samples.resize(n);
    const std::size_t pixels = static_cast<std::size_t>(space.side()) * space.side();
    parallel_for(n, jobs, [&](std::size_t i) {
        Rng rng = stream_rng(seed, i);
        const Eigen::VectorXd genes = space.sample(rng);
        std::vector<double> px(pixels);
        space.render_into({genes.data(), static_cast<std::size_t>(genes.size())}, px);
        c.samples[i] = target.correlate(px);
    });
    std::sort(c.samples.begin(), c.samples.end());
    return c;
}

ChanceDistribution build_chance(const FeatureModel& model, const WorkingImage& target, std::size_t n,
                                std::uint64_t seed, unsigned jobs)
{
    ChanceDistribution c = build_chance(PcNoiseSpace(model), CorrelationTarget(target), n, seed, jobs);
    c.model_id = model.id();
    return c;
}

ChanceDistribution cached_chance(const std::filesystem::path& cache_dir, const FeatureModel& model,
                                 const CorrelationTarget& target, std::size_t n, std::uint64_t seed, unsigned jobs)
{
    const std::string key = model.id() + ":" + target.id() + ":" + std::to_string(n) + ":" + std::to_string(seed);
    const std::string digest = sha256_hex({reinterpret_cast<const std::uint8_t*>(key.data()), key.size()});
    const auto path = cache_dir / ("chance-" + digest.substr(0, 16) + ".bin");
    if (std::filesystem::exists(path)) {
        ChanceDistribution c = ChanceDistribution::load(path);
        if (c.model_id == model.id() && c.target_id == target.id() && c.seed == seed && c.size() == n) {
            return c;
        }
    }
    ChanceDistribution c = build_chance(PcNoiseSpace(model), target, n, seed, jobs);
    c.model_id = model.id();
    std::filesystem::create_directories(cache_dir);
    c.save(path);
    return c;
}

int ideal_choice(const Individual& a, const Individual& b, const CorrelationTarget& target, Rng& rng)
{
    const double ra = target.correlate(a.rendered);
    const double rb = target.correlate(b.rendered);
    if (ra == rb) {
        return std::bernoulli_distribution(0.5)(rng) ? 1 : 0;
    }
    return ra > rb ? 0 : 1;
}

namespace {

std::vector<double> population_correlations(const Generation& gen, const CorrelationTarget& target)
{
    std::vector<double> r(gen.population.size());
    for (std::size_t i = 0; i < r.size(); ++i) {
        r[i] = target.correlate(gen.population[i].rendered);
    }
    return r;
}

void rank_with(Generation& gen, const std::vector<double>& corr, Rng& rng)
{
    std::bernoulli_distribution coin(0.5);
    for (std::size_t t = 0; t < gen.schedule.size(); ++t) {
        if (gen.outcomes[t] >= 0) {
            continue;
        }
        const double ra = corr[static_cast<std::size_t>(gen.schedule[t].first)];
        const double rb = corr[static_cast<std::size_t>(gen.schedule[t].second)];
        const int side = ra == rb ? (coin(rng) ? 1 : 0) : (ra > rb ? 0 : 1);
        gen.record(t, side);
    }
}

} // namespace

void rank_ideal(Generation& gen, const CorrelationTarget& target, Rng& rng)
{
    rank_with(gen, population_correlations(gen, target), rng);
}

IdealRunResult run_ideal(const NoiseSpace& space, const CorrelationTarget& target, const IdealRunOptions& options,
                         Rng& rng)
{
    const StopCriterion& stop = options.stop;
    require(stop.max_generations >= 1, ErrorCode::InvalidInput, "max_generations must be >= 1");
    require(!stop.percentile || options.chance != nullptr, ErrorCode::InvalidInput,
            "a percentile stop needs a chance distribution");
    require(!stop.percentile || (*stop.percentile >= 0.0 && *stop.percentile <= 100.0), ErrorCode::InvalidInput,
            "stop percentile must lie in [0,100]");
    require(!stop.correlation || (*stop.correlation >= -1.0 && *stop.correlation <= 1.0), ErrorCode::InvalidInput,
            "stop correlation must lie in [-1,1]");
    const ChanceDistribution* chance = options.chance;

    IdealRunResult result;
    Generation gen = initial_generation(space, options.config, rng, chance, chance ? &target : nullptr);
    for (;;) {
        const std::vector<double> corr = population_correlations(gen, target);
        const auto best_it = std::max_element(corr.begin(), corr.end());
        const auto best_idx = static_cast<std::size_t>(best_it - corr.begin());
        GenerationStats st;
        st.index = gen.index;
        st.max_correlation = *best_it;
        double sum = 0.0;
        for (double r : corr) {
            sum += r;
        }
        st.mean_correlation = sum / static_cast<double>(corr.size());
        st.best_percentile = chance ? percentile_of(*chance, st.max_correlation)
                                    : std::numeric_limits<double>::quiet_NaN();
        result.curve.push_back(st);
        if (st.max_correlation > result.best_correlation) {
            result.best_correlation = st.max_correlation;
            result.best = gen.population[best_idx];
        }
        if (chance) {
            for (double p : options.tracked_percentiles) {
                if (!result.generations_to_percentile.contains(p) && st.best_percentile >= p) {
                    result.generations_to_percentile[p] = gen.index;
                }
            }
        }
        result.generations = gen.index;

        const bool has_criterion = stop.percentile.has_value() || stop.correlation.has_value();
        const bool met = (stop.percentile && st.best_percentile >= *stop.percentile) ||
                         (stop.correlation && st.max_correlation >= *stop.correlation);
        if (met || gen.index >= stop.max_generations) {
            result.converged = met || !has_criterion;
            break;
        }
        rank_with(gen, corr, rng);
        gen = advance_generation(gen, options.config, space, rng);
    }
    result.final_generation = std::move(gen);
    return result;
}

IdealRunResult run_whitenoise_baseline(int side, const CorrelationTarget& target, GAConfig config, int budget,
                                       Rng& rng)
{
    require(budget >= 1, ErrorCode::InvalidInput, "budget must be >= 1 generation");
    config.initial_rejection_percentile.reset();
    const WhiteNoiseSpace space(side);
    IdealRunOptions opts;
    opts.config = config;
    opts.stop.max_generations = budget;
    return run_ideal(space, target, opts, rng);
}

SuperstitiousResult superstitious_sim(const NoiseSpace& space, const CorrelationTarget& target,
                                      const ChanceDistribution& chance, std::size_t trials,
                                      double criterion_percentile, std::uint64_t seed, unsigned jobs)
{
    require(trials >= 100, ErrorCode::InvalidInput, "superstitious simulation needs >= 100 trials");
    require(chance.target_id == target.id(), ErrorCode::InvalidInput,
            "chance distribution was built against a different target");
    const bool accept_all = criterion_percentile <= 0.0;
    const double threshold = accept_all ? 0.0 : chance.quantile(criterion_percentile);
    const std::size_t pixels = static_cast<std::size_t>(space.side()) * space.side();

    // Per-trial decision first, then ordered accumulation so sums do not
    // depend on thread scheduling.
    std::vector<std::uint8_t> accept(trials);
    parallel_for(trials, jobs, [&](std::size_t i) {
        Rng rng = stream_rng(seed, i);
        const Eigen::VectorXd genes = space.sample(rng);
        std::vector<double> px(pixels);
        space.render_into({genes.data(), static_cast<std::size_t>(genes.size())}, px);
        accept[i] = accept_all || target.correlate(px) > threshold;
    });

    Eigen::VectorXd sum_acc = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(space.dims()));
    Eigen::VectorXd sum_rej = sum_acc;
    std::size_t n_acc = 0;
    for (std::size_t i = 0; i < trials; ++i) {
        Rng rng = stream_rng(seed, i);
        const Eigen::VectorXd genes = space.sample(rng);
        if (accept[i]) {
            sum_acc += genes;
            ++n_acc;
        } else {
            sum_rej += genes;
        }
    }
    require(n_acc > 0, ErrorCode::DegenerateCriterion, "criterion accepted no trials");
    const std::size_t n_rej = trials - n_acc;
    const Eigen::VectorXd mean_acc = sum_acc / static_cast<double>(n_acc);
    const Eigen::VectorXd reference = n_rej > 0 ? Eigen::VectorXd(sum_rej / static_cast<double>(n_rej))
                                                : space.expected_genes();
    // Rendering is affine in the genome, so the image difference is
    // render(mean_acc) - render(reference).
    const WorkingImage acc_img = space.render(mean_acc);
    const WorkingImage ref_img = space.render(reference);
    std::vector<double> ci(acc_img.data());
    simd::axpy(-1.0, ref_img.pixels(), ci);

    SuperstitiousResult out;
    out.classification_image = WorkingImage(space.side(), std::move(ci), "classification-image");
    out.accepted = n_acc;
    out.trials = trials;
    out.correlation = target.correlate(out.classification_image);
    return out;
}

} // namespace reveal
