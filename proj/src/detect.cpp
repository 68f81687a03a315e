#include "reveal/detect.hpp"

#include "reveal/error.hpp"
#include "reveal/io/binary.hpp"

#include <boost/math/distributions/normal.hpp>
#include <fftw3.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <mutex>
#include <set>

namespace reveal {

namespace {

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& fftw_mutex()
{
    static std::mutex m;
    return m;
}

struct Spectrum {
    int side = 0;
    int half = 0;
    std::vector<std::complex<double>> bins; // side x half, row-major
};

Spectrum forward(std::span<const double> pixels, int side)
{
    Spectrum s;
    s.side = side;
    s.half = side / 2 + 1;
    s.bins.resize(static_cast<std::size_t>(side) * s.half);
    std::vector<double> in(pixels.begin(), pixels.end());
    auto* out = reinterpret_cast<fftw_complex*>(s.bins.data());
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_mutex());
        plan = fftw_plan_dft_r2c_2d(side, side, in.data(), out, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_mutex());
        fftw_destroy_plan(plan);
    }
    return s;
}

std::vector<double> inverse(Spectrum s)
{
    const int side = s.side;
    std::vector<double> out(static_cast<std::size_t>(side) * side);
    auto* in = reinterpret_cast<fftw_complex*>(s.bins.data());
    fftw_plan plan;
    {
        std::lock_guard lock(fftw_mutex());
        plan = fftw_plan_dft_c2r_2d(side, side, in, out.data(), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard lock(fftw_mutex());
        fftw_destroy_plan(plan);
    }
    const double scale = 1.0 / (static_cast<double>(side) * side);
    for (double& v : out) {
        v *= scale;
    }
    return out;
}

} // namespace

std::vector<double> amplitude_spectrum(const WorkingImage& image)
{
    require(!image.empty(), ErrorCode::InvalidInput, "empty image");
    const Spectrum s = forward(image.pixels(), image.side());
    std::vector<double> a(s.bins.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = std::abs(s.bins[i]);
    }
    return a;
}

ScrambleResult phase_scramble_full(const WorkingImage& image, Rng& rng)
{
    require(!image.empty(), ErrorCode::InvalidInput, "empty image");
    const int side = image.side();
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> noise(image.size());
    for (double& v : noise) {
        v = gauss(rng);
    }
    Spectrum s = forward(image.pixels(), side);
    const Spectrum n = forward(noise, side);
    for (std::size_t i = 1; i < s.bins.size(); ++i) {
        const double amp = std::abs(s.bins[i]);
        const double na = std::abs(n.bins[i]);
        s.bins[i] = na > 0.0 ? amp * (n.bins[i] / na) : std::complex<double>(amp, 0.0);
    }

    ScrambleResult out;
    out.raw = WorkingImage(side, inverse(std::move(s)), image.source_id() + "#scrambled", image.category_label());
    out.image = out.raw;
    const auto [lo, hi] = std::minmax_element(out.raw.data().begin(), out.raw.data().end());
    if (*lo < 0.0 || *hi > 1.0) {
        // Contract about the mean so the DC term and the spectrum's shape survive.
        const double m = std::clamp(out.raw.mean(), 0.0, 1.0);
        double k = 1.0;
        if (*hi > 1.0) {
            k = std::min(k, (1.0 - m) / (*hi - m));
        }
        if (*lo < 0.0) {
            k = std::min(k, m / (m - *lo));
        }
        for (double& v : out.image.pixels()) {
            v = std::clamp(m + (v - m) * k, 0.0, 1.0);
        }
        out.rescaled = true;
    }
    return out;
}

WorkingImage phase_scramble(const WorkingImage& image, Rng& rng) { return phase_scramble_full(image, rng).image; }

StaircaseState staircase_update(StaircaseState state, bool correct)
{
    require(state.step > 0 && state.floor <= state.ceiling, ErrorCode::InvalidInput, "invalid staircase bounds");
    require(state.current_duration >= state.floor && state.current_duration <= state.ceiling,
            ErrorCode::InvalidInput, "staircase duration outside its bounds");
    state.history.emplace_back(state.current_duration, correct);
    if (!correct) {
        state.current_duration = std::min(state.ceiling, state.current_duration + state.step);
        state.consecutive_correct = 0;
    } else if (++state.consecutive_correct == 3) {
        state.current_duration = std::max(state.floor, state.current_duration - state.step);
        state.consecutive_correct = 0;
    }
    return state;
}

int threshold_estimate(std::span<const int> durations)
{
    const std::set<int> distinct(durations.begin(), durations.end());
    require(distinct.size() >= 2, ErrorCode::InsufficientVariation,
            "threshold needs at least two distinct presentation times");
    return *std::next(distinct.begin());
}

int threshold_estimate(const StaircaseState& state)
{
    std::vector<int> d;
    d.reserve(state.history.size());
    for (const auto& [duration, correct] : state.history) {
        d.push_back(duration);
    }
    return threshold_estimate(d);
}

DetectionStimuli select_detection_stimuli(const WorkingImage& reconstruction, const Corpus& db,
                                          std::size_t n_per_group)
{
    require(n_per_group >= 1, ErrorCode::InvalidInput, "need at least one image per group");
    require(db.size() >= 2 * n_per_group, ErrorCode::InvalidInput, "database smaller than both groups");
    const RetrievalResult ranked = nearest_neighbors(reconstruction, db, db.size());
    DetectionStimuli out;
    out.most.assign(ranked.hits.begin(), ranked.hits.begin() + static_cast<std::ptrdiff_t>(n_per_group));
    out.least.assign(ranked.hits.rbegin(), ranked.hits.rbegin() + static_cast<std::ptrdiff_t>(n_per_group));
    return out;
}

double dprime(std::size_t hits, std::size_t misses, std::size_t false_alarms, std::size_t correct_rejections)
{
    const std::size_t signal = hits + misses;
    const std::size_t noise = false_alarms + correct_rejections;
    require(signal >= 1 && noise >= 1, ErrorCode::InvalidInput, "d' needs signal and noise trials");
    auto rate = [](std::size_t k, std::size_t n) {
        const double half = 0.5 / static_cast<double>(n);
        return std::clamp(static_cast<double>(k) / static_cast<double>(n), half, 1.0 - half);
    };
    const boost::math::normal_distribution<double> z;
    return boost::math::quantile(z, rate(hits, signal)) - boost::math::quantile(z, rate(false_alarms, noise));
}

std::string_view to_string(SimilarityGroup g) noexcept
{
    switch (g) {
    case SimilarityGroup::Most: return "most";
    case SimilarityGroup::Least: return "least";
    case SimilarityGroup::ThresholdBlock: return "threshold-block";
    }
    return "?";
}

std::string_view to_string(DetectionResponse r) noexcept
{
    return r == DetectionResponse::Intact ? "intact" : "scrambled";
}

double rt_gap(std::span<const DetectionTrial> trials)
{
    double sum_most = 0.0, sum_least = 0.0;
    std::size_t n_most = 0, n_least = 0;
    for (const auto& t : trials) {
        if (!t.is_intact) {
            continue;
        }
        if (t.similarity_group == SimilarityGroup::Most) {
            sum_most += t.rt;
            ++n_most;
        } else if (t.similarity_group == SimilarityGroup::Least) {
            sum_least += t.rt;
            ++n_least;
        }
    }
    require(n_most > 0 && n_least > 0, ErrorCode::InvalidInput,
            "RT gap needs intact trials from both similarity groups");
    const double overall = (sum_most + sum_least) / static_cast<double>(n_most + n_least);
    require(overall > 0.0, ErrorCode::InvalidInput, "mean reaction time must be positive");
    return (sum_least / static_cast<double>(n_least) - sum_most / static_cast<double>(n_most)) / overall;
}

std::string detection_trial_json(const DetectionTrial& t)
{
    const nlohmann::json j = {
        {"image_id", t.image_id},
        {"is_intact", t.is_intact},
        {"similarity_group", std::string(to_string(t.similarity_group))},
        {"duration", t.duration},
        {"response", std::string(to_string(t.response))},
        {"rt", t.rt},
    };
    return j.dump();
}

DetectionTrial parse_detection_trial(const std::string& line)
{
    const auto j = nlohmann::json::parse(line, nullptr, false);
    require(!j.is_discarded() && j.is_object(), ErrorCode::Format, "detection record is not a JSON object");
    DetectionTrial t;
    try {
        t.image_id = j.at("image_id").get<std::string>();
        t.is_intact = j.at("is_intact").get<bool>();
        const auto group = j.at("similarity_group").get<std::string>();
        if (group == "most") {
            t.similarity_group = SimilarityGroup::Most;
        } else if (group == "least") {
            t.similarity_group = SimilarityGroup::Least;
        } else if (group == "threshold-block") {
            t.similarity_group = SimilarityGroup::ThresholdBlock;
        } else {
            fail(ErrorCode::Format, "unknown similarity_group '" + group + "'");
        }
        t.duration = j.at("duration").get<double>();
        const auto response = j.at("response").get<std::string>();
        if (response == "intact") {
            t.response = DetectionResponse::Intact;
        } else if (response == "scrambled") {
            t.response = DetectionResponse::Scrambled;
        } else {
            fail(ErrorCode::Format, "unknown response '" + response + "'");
        }
        t.rt = j.at("rt").get<double>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::Format, std::string("bad detection record: ") + e.what());
    }
    require(std::isfinite(t.duration) && t.duration >= 0.0, ErrorCode::Format, "bad duration");
    require(std::isfinite(t.rt) && t.rt >= 0.0, ErrorCode::Format, "bad rt");
    return t;
}

void write_detection_log(std::ostream& out, std::span<const DetectionTrial> trials)
{
    for (const auto& t : trials) {
        out << detection_trial_json(t) << '\n';
    }
}

void write_detection_log(const std::filesystem::path& path, std::span<const DetectionTrial> trials)
{
    std::string text;
    for (const auto& t : trials) {
        text += detection_trial_json(t);
        text += '\n';
    }
    io::write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::vector<DetectionTrial> read_detection_log(std::istream& in)
{
    std::vector<DetectionTrial> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(parse_detection_trial(line));
        } catch (const Error& e) {
            fail(ErrorCode::Format, "line " + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

std::vector<DetectionTrial> read_detection_log(const std::filesystem::path& path)
{
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorCode::Io, "cannot open " + path.string());
    return read_detection_log(in);
}

DetectionSummary analyze_detection(std::span<const DetectionTrial> trials)
{
    DetectionSummary s;
    s.trials = trials.size();
    std::vector<int> threshold_durations;
    for (const auto& t : trials) {
        if (t.similarity_group == SimilarityGroup::ThresholdBlock) {
            threshold_durations.push_back(static_cast<int>(std::lround(t.duration)));
            continue;
        }
        GroupCounts& g = t.similarity_group == SimilarityGroup::Most ? s.most : s.least;
        const bool said_intact = t.response == DetectionResponse::Intact;
        if (t.is_intact) {
            (said_intact ? g.hits : g.misses)++;
        } else {
            (said_intact ? g.false_alarms : g.correct_rejections)++;
        }
    }
    auto dp = [](const GroupCounts& g) -> std::optional<double> {
        if (g.hits + g.misses == 0 || g.false_alarms + g.correct_rejections == 0) {
            return std::nullopt;
        }
        return dprime(g.hits, g.misses, g.false_alarms, g.correct_rejections);
    };
    s.dprime_most = dp(s.most);
    s.dprime_least = dp(s.least);
    if (s.most.hits + s.most.misses > 0 && s.least.hits + s.least.misses > 0) {
        s.rt_gap = rt_gap(trials);
    }
    if (std::set<int>(threshold_durations.begin(), threshold_durations.end()).size() >= 2) {
        s.threshold = threshold_estimate(threshold_durations);
    }
    return s;
}

double LogisticObserver::p_correct(double duration_ms) const
{
    require(slope_ms > 0.0 && guess >= 0.0 && lapse >= 0.0 && guess + lapse < 1.0, ErrorCode::InvalidInput,
            "invalid psychometric parameters");
    const double f75 = (0.75 - guess) / (1.0 - guess - lapse);
    require(f75 > 0.0 && f75 < 1.0, ErrorCode::InvalidInput, "75% correct is unreachable with these rates");
    const double midpoint = threshold_ms - slope_ms * std::log(f75 / (1.0 - f75));
    const double f = 1.0 / (1.0 + std::exp(-(duration_ms - midpoint) / slope_ms));
    return guess + (1.0 - guess - lapse) * f;
}

bool LogisticObserver::respond(double duration_ms, Rng& rng) const
{
    return std::bernoulli_distribution(p_correct(duration_ms))(rng);
}

StaircaseState run_staircase(const LogisticObserver& observer, std::size_t trials, Rng& rng, StaircaseState start)
{
    StaircaseState s = std::move(start);
    for (std::size_t i = 0; i < trials; ++i) {
        s = staircase_update(std::move(s), observer.respond(s.current_duration, rng));
    }
    return s;
}

} // namespace reveal
