#include "reveal/analysis.hpp"

#include "reveal/error.hpp"
#include "reveal/parallel.hpp"
#include "reveal/similarity.hpp"

#include <boost/math/distributions/binomial.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>

namespace reveal {

double RetrievalResult::category_fraction(const std::string& category) const
{
    if (hits.empty()) {
        return 0.0;
    }
    const auto n = std::count_if(hits.begin(), hits.end(),
                                 [&](const RetrievalHit& h) { return h.category_label == category; });
    return static_cast<double>(n) / static_cast<double>(hits.size());
}

namespace {

RetrievalResult rank(const WorkingImage& query, const Corpus& db, std::size_t k, std::vector<double> r)
{
    std::vector<std::size_t> order(db.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (r[a] != r[b]) {
            return r[a] > r[b];
        }
        if (db[a].source_id() != db[b].source_id()) {
            return db[a].source_id() < db[b].source_id();
        }
        return a < b;
    });
    RetrievalResult out;
    out.query_id = query.source_id();
    out.k = k;
    const std::size_t n = std::min(k, db.size());
    out.hits.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = order[i];
        out.hits.push_back({db[j].source_id(), r[j], db[j].category_label(), j});
    }
    return out;
}

void check_retrieval(const WorkingImage& query, const Corpus& db, std::size_t k)
{
    require(k >= 1, ErrorCode::InvalidInput, "k must be >= 1");
    require(db.empty() || db.side() == query.side(), ErrorCode::InvalidInput,
            "query size does not match the database");
}

} // namespace

RetrievalResult nearest_neighbors(const WorkingImage& query, const Corpus& db, std::size_t k, unsigned jobs)
{
    check_retrieval(query, db, k);
    const CorrelationTarget target(query);
    std::vector<double> r(db.size(), 0.0);
    parallel_for(db.size(), jobs, [&](std::size_t i) {
        try {
            r[i] = target.correlate(db[i]);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::UndefinedCorrelation) {
                throw;
            }
        }
    });
    return rank(query, db, k, std::move(r));
}

RetrievalResult nearest_neighbors(const WorkingImage& query, const Corpus& db, std::size_t k,
                                  const FeatureModel& model, unsigned jobs)
{
    check_retrieval(query, db, k);
    require(query.side() == model.side(), ErrorCode::InvalidInput, "query size does not match the model");
    const ScoreVector q = model.project(query);
    std::vector<double> r(db.size(), 0.0);
    parallel_for(db.size(), jobs, [&](std::size_t i) {
        const ScoreVector s = model.project(db[i]);
        try {
            r[i] = pixel_correlation({q.data(), static_cast<std::size_t>(q.size())},
                                     {s.data(), static_cast<std::size_t>(s.size())});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::UndefinedCorrelation) {
                throw;
            }
        }
    });
    return rank(query, db, k, std::move(r));
}

double binomial_upper_tail(std::size_t k, std::size_t n, double p)
{
    require(k <= n, ErrorCode::InvalidInput, "successes exceed trials");
    if (k == 0) {
        return 1.0;
    }
    const boost::math::binomial_distribution<double> dist(static_cast<double>(n), p);
    return boost::math::cdf(boost::math::complement(dist, static_cast<double>(k - 1)));
}

ClassifierResult correlation_classifier(const std::vector<WorkingImage>& reconstructions,
                                        const std::vector<WorkingImage>& targets, const std::vector<int>& truth)
{
    require(targets.size() >= 2, ErrorCode::InvalidInput, "classifier needs at least two targets");
    require(truth.size() == reconstructions.size(), ErrorCode::InvalidInput,
            "one ground-truth label per reconstruction");
    std::vector<CorrelationTarget> prepared;
    prepared.reserve(targets.size());
    for (const auto& t : targets) {
        require(t.side() == targets.front().side(), ErrorCode::InvalidInput, "targets differ in size");
        prepared.emplace_back(t);
    }
    ClassifierResult out;
    out.chance = 1.0 / static_cast<double>(targets.size());
    out.assignment.assign(reconstructions.size(), -1);
    for (std::size_t i = 0; i < reconstructions.size(); ++i) {
        require(truth[i] >= 0 && static_cast<std::size_t>(truth[i]) < targets.size(), ErrorCode::InvalidInput,
                "ground-truth label out of range");
        const auto& rec = reconstructions[i];
        require(rec.side() == targets.front().side(), ErrorCode::InvalidInput,
                "reconstruction size does not match targets");
        const auto [lo, hi] = std::minmax_element(rec.data().begin(), rec.data().end());
        if (*lo == *hi) {
            spdlog::warn("reconstruction {} is constant; excluded from classification", i);
            out.excluded.push_back(i);
            continue;
        }
        int best = 0;
        double best_r = -std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < prepared.size(); ++t) {
            const double r = prepared[t].correlate(rec);
            if (r > best_r) {
                best_r = r;
                best = static_cast<int>(t);
            }
        }
        out.assignment[i] = best;
        ++out.evaluated;
        out.correct += best == truth[i] ? 1 : 0;
    }
    if (out.evaluated > 0) {
        out.accuracy = static_cast<double>(out.correct) / static_cast<double>(out.evaluated);
    }
    out.p_value = binomial_upper_tail(out.correct, out.evaluated, out.chance);
    return out;
}

WorkingImage average_reconstructions(const std::vector<WorkingImage>& images)
{
    require(!images.empty(), ErrorCode::InvalidInput, "nothing to average");
    const int side = images.front().side();
    std::vector<double> acc(images.front().size(), 0.0);
    for (const auto& im : images) {
        require(im.side() == side, ErrorCode::InvalidInput, "images differ in size");
        for (std::size_t p = 0; p < acc.size(); ++p) {
            acc[p] += im.data()[p];
        }
    }
    const double inv = 1.0 / static_cast<double>(images.size());
    for (double& v : acc) {
        v *= inv;
    }
    return WorkingImage(side, std::move(acc), "average");
}

double ProportionSummary::quantile(double percentile) const
{
    require(!proportions.empty(), ErrorCode::InvalidState, "empty bootstrap distribution");
    require(percentile >= 0.0 && percentile <= 100.0, ErrorCode::InvalidInput, "percentile outside [0, 100]");
    std::vector<double> s = proportions;
    std::sort(s.begin(), s.end());
    const auto rank = static_cast<std::size_t>(std::ceil(percentile / 100.0 * static_cast<double>(s.size())));
    return s[rank == 0 ? 0 : rank - 1];
}

ProportionSummary bootstrap_category_chance(const Corpus& db, std::size_t k, std::size_t draws,
                                            const std::string& category, Rng& rng)
{
    require(db.labeled(), ErrorCode::InvalidInput, "bootstrap chance needs a labeled database");
    require(k >= 1 && k <= db.size(), ErrorCode::InvalidInput, "sample size must be in [1, database size]");
    require(draws >= 1, ErrorCode::InvalidInput, "need at least one bootstrap draw");
    std::vector<char> match(db.size());
    for (std::size_t i = 0; i < db.size(); ++i) {
        match[i] = db[i].category_label() == category ? 1 : 0;
    }
    std::vector<std::size_t> all(db.size());
    std::iota(all.begin(), all.end(), 0);
    std::vector<std::size_t> picked(k);

    ProportionSummary out;
    out.proportions.reserve(draws);
    for (std::size_t b = 0; b < draws; ++b) {
        std::sample(all.begin(), all.end(), picked.begin(), k, rng);
        std::size_t hits = 0;
        for (std::size_t j : picked) {
            hits += static_cast<std::size_t>(match[j]);
        }
        out.proportions.push_back(static_cast<double>(hits) / static_cast<double>(k));
    }
    const double n = static_cast<double>(draws);
    out.mean = std::accumulate(out.proportions.begin(), out.proportions.end(), 0.0) / n;
    double ss = 0.0;
    for (double p : out.proportions) {
        ss += (p - out.mean) * (p - out.mean);
    }
    out.sd = draws > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    return out;
}

std::vector<double> retrieval_chance_max(const NoiseSpace& space, const Corpus& db, std::size_t m,
                                         std::uint64_t seed, unsigned jobs)
{
    require(!db.empty(), ErrorCode::InvalidInput, "empty database");
    require(db.side() == space.side(), ErrorCode::InvalidInput, "database size does not match the noise space");
    std::vector<CorrelationTarget> targets;
    for (const auto& im : db) {
        try {
            targets.emplace_back(im);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::UndefinedCorrelation) {
                throw;
            }
            spdlog::warn("skipping constant database image {}", im.source_id());
        }
    }
    require(!targets.empty(), ErrorCode::InvalidInput, "every database image is constant");
    std::vector<double> maxima(m);
    const std::size_t pixels = static_cast<std::size_t>(space.side()) * space.side();
    parallel_for(m, jobs, [&](std::size_t i) {
        Rng rng = stream_rng(seed, i);
        const Eigen::VectorXd genes = space.sample(rng);
        std::vector<double> px(pixels);
        space.render_into({genes.data(), static_cast<std::size_t>(genes.size())}, px);
        double best = -1.0;
        for (const auto& t : targets) {
            best = std::max(best, t.correlate(px));
        }
        maxima[i] = best;
    });
    std::sort(maxima.begin(), maxima.end());
    return maxima;
}

void write_retrieval_table(const std::filesystem::path& path, const RetrievalResult& result)
{
    std::ofstream out(path);
    require(static_cast<bool>(out), ErrorCode::Io, "cannot write " + path.string());
    out << "rank\tsource_id\tcorrelation\tlabel\n" << std::setprecision(17);
    for (std::size_t i = 0; i < result.hits.size(); ++i) {
        const auto& h = result.hits[i];
        out << (i + 1) << '\t' << h.source_id << '\t' << h.correlation << '\t' << h.category_label.value_or("")
            << '\n';
    }
    require(static_cast<bool>(out), ErrorCode::Io, "write failed for " + path.string());
}

io::GrayRaster gallery_grid(const std::vector<WorkingImage>& images, int columns, int gap)
{
    require(!images.empty(), ErrorCode::InvalidInput, "empty gallery");
    require(columns >= 1 && gap >= 0, ErrorCode::InvalidInput, "bad gallery layout");
    const int side = images.front().side();
    const int n = static_cast<int>(images.size());
    const int cols = std::min(columns, n);
    const int rows = (n + cols - 1) / cols;
    io::GrayRaster g;
    g.width = cols * side + (cols - 1) * gap;
    g.height = rows * side + (rows - 1) * gap;
    g.values.assign(static_cast<std::size_t>(g.width) * g.height, 0.5);
    for (int i = 0; i < n; ++i) {
        require(images[i].side() == side, ErrorCode::InvalidInput, "gallery images differ in size");
        const int x0 = (i % cols) * (side + gap);
        const int y0 = (i / cols) * (side + gap);
        for (int y = 0; y < side; ++y) {
            for (int x = 0; x < side; ++x) {
                g.values[static_cast<std::size_t>(y0 + y) * g.width + x0 + x] = images[i].at(x, y);
            }
        }
    }
    return g;
}

io::GrayRaster gallery_strip(const WorkingImage& query, const std::vector<WorkingImage>& hits, int gap)
{
    std::vector<WorkingImage> all;
    all.reserve(hits.size() + 1);
    all.push_back(query);
    all.insert(all.end(), hits.begin(), hits.end());
    return gallery_grid(all, static_cast<int>(all.size()), gap);
}

} // namespace reveal
