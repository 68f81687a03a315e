#include "reveal/evolve.hpp"

#include "reveal/error.hpp"
#include "reveal/io/binary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

namespace reveal {

void GAConfig::validate() const
{
    require(population >= 2, ErrorCode::InvalidInput, "population must be >= 2");
    require(views >= 1, ErrorCode::InvalidInput, "views must be >= 1");
    for (double p : {p_cross, p_mut, mig_initial, mig_decay}) {
        require(p >= 0.0 && p <= 1.0, ErrorCode::InvalidInput, "GA probabilities must lie in [0,1]");
    }
    require(mut_scale >= 0.0, ErrorCode::InvalidInput, "mutation scale must be >= 0");
    if (initial_rejection_percentile) {
        require(*initial_rejection_percentile >= 0.0 && *initial_rejection_percentile <= 100.0,
                ErrorCode::InvalidInput, "rejection percentile must lie in [0,100]");
    }
}

std::vector<TrialPair> schedule_pairs(int population, int views, Rng& rng)
{
    require(population >= 2 && views >= 1, ErrorCode::InvalidSchedule, "schedule needs population >= 2, views >= 1");
    require((static_cast<long>(population) * views) % 2 == 0, ErrorCode::InvalidSchedule,
            "population * views must be even");
    std::vector<int> slots;
    slots.reserve(static_cast<std::size_t>(population) * views);
    for (int i = 0; i < population; ++i) {
        slots.insert(slots.end(), static_cast<std::size_t>(views), i);
    }
    std::shuffle(slots.begin(), slots.end(), rng);

    std::vector<TrialPair> pairs(slots.size() / 2);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        pairs[p] = {slots[2 * p], slots[2 * p + 1]};
    }
    // Repair (x,x) by swapping with a pair that contains no x; one always
    // exists when population >= 2.
    std::uniform_int_distribution<std::size_t> pick(0, pairs.size() - 1);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
        if (pairs[p].first != pairs[p].second) {
            continue;
        }
        const int x = pairs[p].first;
        const std::size_t start = pick(rng);
        for (std::size_t step = 0; step < pairs.size(); ++step) {
            TrialPair& other = pairs[(start + step) % pairs.size()];
            if (other.first != x && other.second != x) {
                std::swap(pairs[p].second, other.first);
                break;
            }
        }
        require(pairs[p].first != pairs[p].second, ErrorCode::InvalidSchedule, "could not repair self-pair");
    }
    return pairs;
}

std::size_t Generation::answered() const
{
    return static_cast<std::size_t>(std::count_if(outcomes.begin(), outcomes.end(), [](auto o) { return o >= 0; }));
}

void Generation::record(std::size_t trial, int winning_side)
{
    require(trial < schedule.size(), ErrorCode::NotFound, "no such trial");
    require(winning_side == 0 || winning_side == 1, ErrorCode::InvalidInput, "winning side must be 0 or 1");
    require(outcomes[trial] < 0, ErrorCode::Conflict, "trial already answered");
    outcomes[trial] = static_cast<std::int8_t>(winning_side);
    const TrialPair& p = schedule[trial];
    ++wins[static_cast<std::size_t>(winning_side == 0 ? p.first : p.second)];
}

std::size_t Generation::best_by_wins() const
{
    require(!population.empty(), ErrorCode::InvalidState, "empty population");
    std::size_t best = 0;
    for (std::size_t i = 1; i < population.size(); ++i) {
        const auto key = [&](std::size_t j) {
            return std::tuple(wins[j], population[j].lineage_wins + wins[j]);
        };
        if (key(i) > key(best) || (key(i) == key(best) && population[i].id < population[best].id)) {
            best = i;
        }
    }
    return best;
}

namespace {

Generation with_schedule(Generation g, const GAConfig& config, Rng& rng)
{
    g.schedule = schedule_pairs(config.population, config.views, rng);
    g.wins.assign(g.population.size(), 0);
    g.outcomes.assign(g.schedule.size(), -1);
    return g;
}

} // namespace

Generation initial_generation(const NoiseSpace& space, const GAConfig& config, Rng& rng,
                              const ChanceDistribution* chance, const CorrelationTarget* target)
{
    config.validate();
    const bool reject = config.initial_rejection_percentile.has_value() && chance != nullptr && target != nullptr;
    Generation g;
    g.index = 1;
    for (int i = 0; i < config.population; ++i) {
        const std::uint64_t id = g.next_id++;
        g.population.push_back(reject ? sample_rejecting(space, rng, *chance, *target,
                                                         *config.initial_rejection_percentile, id, 1)
                                      : sample_noise(space, rng, id, 1));
    }
    return with_schedule(std::move(g), config, rng);
}

std::vector<std::size_t> select_proto(std::span<const int> wins, std::size_t count, Rng& rng)
{
    require(std::all_of(wins.begin(), wins.end(), [](int w) { return w >= 0; }), ErrorCode::InvalidInput,
            "negative win count");
    require(std::accumulate(wins.begin(), wins.end(), 0L) > 0, ErrorCode::InvalidState,
            "no wins recorded; cannot select");
    std::discrete_distribution<std::size_t> wheel(wins.begin(), wins.end());
    std::vector<std::size_t> out(count);
    for (auto& o : out) {
        o = wheel(rng);
    }
    return out;
}

Eigen::VectorXd crossover_scores(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    require(a.size() == b.size(), ErrorCode::InvalidInput, "crossover parents differ in length");
    Eigen::VectorXd child = a;
    for (Eigen::Index k = 1; k < child.size(); k += 2) {
        child[k] = b[k];
    }
    return child;
}

Individual crossover(const Individual& a, const Individual& b, const NoiseSpace& space)
{
    Individual child =
        space.make_individual(crossover_scores(a.scores, b.scores), 0, a.birth_generation, a.provenance | kCrossover);
    child.parent_a = a.id;
    child.parent_b = b.id;
    child.lineage_wins = a.lineage_wins;
    return child;
}

Eigen::VectorXd mutate_scores(const Eigen::VectorXd& scores, const Eigen::VectorXd& gene_std, Rng& rng,
                              double mut_scale, MutationMode mode)
{
    require(scores.size() == gene_std.size(), ErrorCode::InvalidInput, "mutation scale length mismatch");
    Eigen::VectorXd out = scores;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index k = 0; k < out.size(); ++k) {
        const double z = gauss(rng);
        if (mode == MutationMode::Additive) {
            out[k] += z * mut_scale * gene_std[k];
        } else {
            out[k] *= 1.0 + z * mut_scale;
        }
    }
    return out;
}

Individual mutate(const Individual& ind, const NoiseSpace& space, Rng& rng, double mut_scale, MutationMode mode)
{
    Individual out = ind;
    out.scores = mutate_scores(ind.scores, space.gene_std(), rng, mut_scale, mode);
    out.rendered = space.render(out.scores);
    out.provenance |= kMutated;
    return out;
}

double migration_rate(int generation_index, const GAConfig& config)
{
    require(generation_index >= 2, ErrorCode::InvalidInput, "migration applies from generation 2 onward");
    return config.mig_initial * std::pow(config.mig_decay, generation_index - 2);
}

Generation advance_generation(const Generation& gen, const GAConfig& config, const NoiseSpace& space, Rng& rng)
{
    config.validate();
    require(gen.complete(), ErrorCode::InvalidState, "generation has unanswered trials");
    require(gen.population.size() == static_cast<std::size_t>(config.population), ErrorCode::InvalidState,
            "population size does not match config");
    const int next_index = gen.index + 1;
    const std::size_t n = gen.population.size();

    Generation next;
    next.index = next_index;
    next.next_id = gen.next_id;

    // Selection.
    for (std::size_t src : select_proto(gen.wins, n, rng)) {
        const Individual& parent = gen.population[src];
        Individual copy;
        copy.id = next.next_id++;
        copy.birth_generation = next_index;
        copy.scores = parent.scores;
        copy.rendered = parent.rendered;
        copy.provenance = kSelected;
        copy.parent_a = parent.id;
        copy.lineage_wins = parent.lineage_wins + gen.wins[src];
        next.population.push_back(std::move(copy));
    }
    std::vector<bool> dirty(n, false);

    // Crossover against a snapshot of the proto-generation.
    const std::vector<Individual> proto = next.population;
    std::bernoulli_distribution cross(config.p_cross);
    std::uniform_int_distribution<std::size_t> partner(0, n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        if (!cross(rng)) {
            continue;
        }
        const Individual& mate = proto[partner(rng)];
        Individual& child = next.population[i];
        child.scores = crossover_scores(proto[i].scores, mate.scores);
        child.parent_b = mate.parent_a;
        child.provenance |= kCrossover;
        dirty[i] = true;
    }

    std::bernoulli_distribution mut(config.p_mut);
    for (std::size_t i = 0; i < n; ++i) {
        if (!mut(rng)) {
            continue;
        }
        Individual& ind = next.population[i];
        ind.scores = mutate_scores(ind.scores, space.gene_std(), rng, config.mut_scale, config.mutation);
        ind.provenance |= kMutated;
        dirty[i] = true;
    }

    std::bernoulli_distribution migrate(migration_rate(next_index, config));
    for (std::size_t i = 0; i < n; ++i) {
        if (!migrate(rng)) {
            continue;
        }
        Individual& ind = next.population[i];
        ind.scores = space.sample(rng);
        ind.provenance = kMigrant;
        ind.parent_a = 0;
        ind.parent_b = 0;
        ind.lineage_wins = 0;
        dirty[i] = true;
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (dirty[i]) {
            next.population[i].rendered = space.render(next.population[i].scores);
        }
    }
    return with_schedule(std::move(next), config, rng);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr const char* kCheckpointMagic = "RVLCKPT";
constexpr std::uint32_t kCheckpointVersion = 1;

void write_config(io::BinaryWriter& w, const GAConfig& c)
{
    w.u32(static_cast<std::uint32_t>(c.population));
    w.u32(static_cast<std::uint32_t>(c.views));
    w.f64(c.p_cross);
    w.f64(c.p_mut);
    w.f64(c.mut_scale);
    w.f64(c.mig_initial);
    w.f64(c.mig_decay);
    w.f64(c.initial_rejection_percentile.value_or(-1.0));
    w.u32(c.mutation == MutationMode::Additive ? 0 : 1);
}

GAConfig read_config(io::BinaryReader& r)
{
    GAConfig c;
    c.population = static_cast<int>(r.u32());
    c.views = static_cast<int>(r.u32());
    c.p_cross = r.f64();
    c.p_mut = r.f64();
    c.mut_scale = r.f64();
    c.mig_initial = r.f64();
    c.mig_decay = r.f64();
    const double rej = r.f64();
    if (rej >= 0.0) {
        c.initial_rejection_percentile = rej;
    }
    c.mutation = r.u32() == 0 ? MutationMode::Additive : MutationMode::Multiplicative;
    return c;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp)
{
    io::BinaryWriter w(kCheckpointMagic, kCheckpointVersion);
    write_config(w, cp.config);
    w.str(cp.rng_state);
    const Generation& g = cp.generation;
    w.i64(g.index);
    w.u64(g.next_id);
    w.u64(g.population.size());
    for (const auto& ind : g.population) {
        w.u64(ind.id);
        w.i64(ind.birth_generation);
        w.u32(ind.provenance);
        w.u64(ind.parent_a);
        w.u64(ind.parent_b);
        w.i64(ind.lineage_wins);
        w.f64s({ind.scores.data(), static_cast<std::size_t>(ind.scores.size())});
    }
    w.u64(g.schedule.size());
    for (std::size_t t = 0; t < g.schedule.size(); ++t) {
        w.u32(static_cast<std::uint32_t>(g.schedule[t].first));
        w.u32(static_cast<std::uint32_t>(g.schedule[t].second));
        w.i64(g.outcomes[t]);
    }
    for (int win : g.wins) {
        w.i64(win);
    }
    w.save_atomic(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const NoiseSpace& space)
{
    auto r = io::BinaryReader::open(path, kCheckpointMagic);
    require(r.version() == kCheckpointVersion, ErrorCode::Format, "unsupported checkpoint version");
    Checkpoint cp;
    cp.config = read_config(r);
    cp.rng_state = r.str();
    Generation& g = cp.generation;
    g.index = static_cast<int>(r.i64());
    g.next_id = r.u64();
    const std::uint64_t n = r.u64();
    require(n == static_cast<std::uint64_t>(cp.config.population), ErrorCode::Format, "checkpoint population mismatch");
    for (std::uint64_t i = 0; i < n; ++i) {
        Individual ind;
        ind.id = r.u64();
        ind.birth_generation = static_cast<int>(r.i64());
        ind.provenance = static_cast<std::uint8_t>(r.u32());
        ind.parent_a = r.u64();
        ind.parent_b = r.u64();
        ind.lineage_wins = r.i64();
        const auto scores = r.f64s();
        require(scores.size() == space.dims(), ErrorCode::Format, "checkpoint genome does not match space");
        ind.scores = Eigen::Map<const Eigen::VectorXd>(scores.data(), static_cast<Eigen::Index>(scores.size()));
        ind.rendered = space.render(ind.scores);
        g.population.push_back(std::move(ind));
    }
    const std::uint64_t trials = r.u64();
    require(trials <= n * n, ErrorCode::Format, "implausible schedule size");
    g.schedule.resize(trials);
    g.outcomes.resize(trials);
    for (std::uint64_t t = 0; t < trials; ++t) {
        g.schedule[t].first = static_cast<int>(r.u32());
        g.schedule[t].second = static_cast<int>(r.u32());
        g.outcomes[t] = static_cast<std::int8_t>(r.i64());
    }
    g.wins.resize(n);
    for (auto& win : g.wins) {
        win = static_cast<int>(r.i64());
    }
    require(r.at_end(), ErrorCode::Format, "trailing bytes in checkpoint");
    return cp;
}

} // namespace reveal
