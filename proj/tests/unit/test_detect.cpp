#include "fixtures.hpp"

#include "reveal/detect.hpp"
#include "reveal/error.hpp"
#include "reveal/similarity.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <set>
#include <sstream>

using namespace reveal;

namespace {

// |F(u,v)| by direct summation over the half plane v in [0, side/2].
std::vector<double> naive_amplitude(const WorkingImage& im)
{
    const int n = im.side();
    const int half = n / 2 + 1;
    std::vector<double> out(static_cast<std::size_t>(n) * half);
    for (int u = 0; u < n; ++u) {
        for (int v = 0; v < half; ++v) {
            std::complex<double> acc = 0.0;
            for (int y = 0; y < n; ++y) {
                for (int x = 0; x < n; ++x) {
                    const double a = -2.0 * std::numbers::pi * (static_cast<double>(u) * y + static_cast<double>(v) * x) / n;
                    acc += im.at(x, y) * std::complex<double>(std::cos(a), std::sin(a));
                }
            }
            out[static_cast<std::size_t>(u) * half + v] = std::abs(acc);
        }
    }
    return out;
}

// Inverse standard normal CDF by bisection on Phi(x) = erfc(-x / sqrt 2) / 2.
double probit(double p)
{
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (0.5 * std::erfc(-mid / std::numbers::sqrt2) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

double sumsq(const std::vector<double>& v)
{
    double s = 0.0;
    for (double x : v) {
        s += x * x;
    }
    return s;
}

DetectionTrial trial(SimilarityGroup g, bool intact, DetectionResponse r, double rt, double duration = 40)
{
    DetectionTrial t;
    t.image_id = "img";
    t.is_intact = intact;
    t.similarity_group = g;
    t.duration = duration;
    t.response = r;
    t.rt = rt;
    return t;
}

} // namespace

TEST_CASE("amplitude spectrum matches a naive DFT")
{
    const WorkingImage im = [] {
        const WorkingImage big = fixtures::held_out_target(1);
        std::vector<double> px(64);
        for (int y = 0; y < 8; ++y) {
            for (int x = 0; x < 8; ++x) {
                px[static_cast<std::size_t>(y * 8 + x)] = big.at(3 * x + 1, 3 * y + 2);
            }
        }
        return WorkingImage(8, px);
    }();
    const auto fast = amplitude_spectrum(im);
    const auto slow = naive_amplitude(im);
    REQUIRE(fast.size() == slow.size());
    for (std::size_t i = 0; i < fast.size(); ++i) {
        CHECK(fast[i] == doctest::Approx(slow[i]).epsilon(1e-10));
    }
}

TEST_CASE("phase scrambling keeps the amplitude spectrum, DC and total power")
{
    const WorkingImage im = fixtures::held_out_target(0);
    const auto before = amplitude_spectrum(im);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        const ScrambleResult s = phase_scramble_full(im, rng);
        const auto after = amplitude_spectrum(s.raw);
        for (std::size_t i = 0; i < before.size(); ++i) {
            CHECK(std::abs(after[i] - before[i]) < 1e-8 * std::max(1.0, before[i]));
        }
        CHECK(s.raw.mean() == doctest::Approx(im.mean()).epsilon(1e-12));
        CHECK(sumsq(s.raw.data()) == doctest::Approx(sumsq(im.data())).epsilon(1e-10));
        CHECK(s.image.in_unit_range());
        if (!s.rescaled) {
            CHECK(s.image == s.raw);
        }
    }
}

TEST_CASE("phase scrambling leaves a constant image unchanged")
{
    const WorkingImage flat = WorkingImage::flat(16, 0.37);
    Rng rng(1);
    const WorkingImage s = phase_scramble(flat, rng);
    for (double v : s.data()) {
        CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
    }
}

TEST_CASE("scramble correlation has the spread predicted by the power spectrum")
{
    // r = sum_k P_k cos(theta_k) / sum_k P_k over non-DC bins with independent
    // uniform phase differences, so E r = 0 and Var r = sum P^2 / (sum P)^2.
    const WorkingImage im = fixtures::held_out_target(2);
    const auto amp = amplitude_spectrum(im);
    const int n = im.side(), half = n / 2 + 1;
    double sp = 0.0, sp2 = 0.0;
    for (int u = 0; u < n; ++u) {
        for (int v = 0; v < half; ++v) {
            if (u == 0 && v == 0) {
                continue;
            }
            const double p = amp[static_cast<std::size_t>(u * half + v)] * amp[static_cast<std::size_t>(u * half + v)];
            const double mult = (v == 0 || v == n / 2) ? 1.0 : 2.0;
            sp += mult * p;
            sp2 += mult * p * p;
        }
    }
    const double theory_sd = std::sqrt(sp2) / sp;

    const int runs = 400;
    double sum = 0.0, sq = 0.0;
    for (int seed = 0; seed < runs; ++seed) {
        Rng rng(static_cast<std::uint64_t>(seed));
        const double r = pixel_correlation(im, phase_scramble_full(im, rng).raw);
        sum += r;
        sq += r * r;
    }
    const double mean = sum / runs;
    const double sd = std::sqrt(sq / runs - mean * mean);
    CHECK(std::abs(mean) < 3.0 * theory_sd / std::sqrt(runs));
    CHECK(sd == doctest::Approx(theory_sd).epsilon(0.1));
}

TEST_CASE("broadband images are decorrelated by scrambling")
{
    // 1/f amplitude spectrum with random phases, one cosine per conjugate pair.
    const int n = 64;
    Rng gen(3);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    std::vector<double> px(static_cast<std::size_t>(n) * n, 0.5);
    for (int u = -n / 2 + 1; u < n / 2; ++u) {
        for (int v = 0; v < n / 2; ++v) {
            if (v == 0 && u <= 0) {
                continue;
            }
            const double amp = 0.02 / std::hypot(u, v);
            const double ph = phase(gen);
            for (int y = 0; y < n; ++y) {
                for (int x = 0; x < n; ++x) {
                    px[static_cast<std::size_t>(y * n + x)] +=
                        amp * std::cos(2.0 * std::numbers::pi * (u * y + v * x) / n + ph);
                }
            }
        }
    }
    const WorkingImage im(n, px);
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        Rng rng(seed);
        sum += std::abs(pixel_correlation(im, phase_scramble_full(im, rng).raw));
    }
    CHECK(sum / 100.0 < 0.1);
}

TEST_CASE("staircase follows 3-down/1-up with clamping")
{
    StaircaseState s;
    CHECK(s.current_duration == 50);
    s = staircase_update(s, true);
    s = staircase_update(s, true);
    CHECK(s.current_duration == 50);
    s = staircase_update(s, true);
    CHECK(s.current_duration == 40);
    CHECK(s.consecutive_correct == 0);

    StaircaseState r;
    r = staircase_update(r, true);
    r = staircase_update(r, true);
    r = staircase_update(r, false);
    CHECK(r.current_duration == 60);
    CHECK(r.consecutive_correct == 0);
    CHECK(r.history.size() == 3);
    CHECK(r.history[2] == std::pair<int, bool>{50, false});

    StaircaseState low;
    low.current_duration = 10;
    for (int i = 0; i < 6; ++i) {
        low = staircase_update(low, true);
    }
    CHECK(low.current_duration == 10);
    low = staircase_update(low, false);
    CHECK(low.current_duration == 20);

    StaircaseState high;
    high.current_duration = 200;
    high = staircase_update(high, false);
    CHECK(high.current_duration == 200);

    StaircaseState bad;
    bad.current_duration = 5;
    CHECK_THROWS_AS(staircase_update(bad, true), Error);
}

TEST_CASE("staircase never leaves its bounds under random responses")
{
    Rng rng(4);
    std::bernoulli_distribution coin(0.6);
    StaircaseState s;
    for (int i = 0; i < 5000; ++i) {
        s = staircase_update(std::move(s), coin(rng));
        CHECK(s.current_duration >= s.floor);
        CHECK(s.current_duration <= s.ceiling);
        CHECK(s.consecutive_correct <= 2);
    }
}

TEST_CASE("threshold is the second-lowest distinct duration")
{
    const std::vector<int> a{50, 40, 30, 40};
    CHECK(threshold_estimate(a) == 40);
    const std::vector<int> b{10, 20, 10, 20};
    CHECK(threshold_estimate(b) == 20);
    const std::vector<int> c{30, 30, 30};
    try {
        threshold_estimate(c);
        FAIL("expected InsufficientVariation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InsufficientVariation);
    }
}

TEST_CASE("logistic observer sits at 75% correct at its threshold")
{
    const LogisticObserver obs;
    CHECK(obs.p_correct(35.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(obs.p_correct(0.0) > 0.5);
    CHECK(obs.p_correct(200.0) == doctest::Approx(1.0).epsilon(1e-6));
    LogisticObserver lapsing{40.0, 8.0, 0.5, 0.05};
    CHECK(lapsing.p_correct(40.0) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(lapsing.p_correct(1000.0) == doctest::Approx(0.95).epsilon(1e-9));

    Rng rng(5);
    const StaircaseState s = run_staircase(obs, 100, rng);
    CHECK(s.history.size() == 100);
}

TEST_CASE("detection stimuli split the ranking into disjoint extremes")
{
    const Corpus& db = fixtures::small_corpus();
    const WorkingImage recon = fixtures::held_out_target(0);
    const auto st = select_detection_stimuli(recon, db, 10);
    REQUIRE(st.most.size() == 10);
    REQUIRE(st.least.size() == 10);
    std::set<std::string> ids;
    for (const auto& h : st.most) {
        ids.insert(h.source_id);
    }
    for (const auto& h : st.least) {
        ids.insert(h.source_id);
    }
    CHECK(ids.size() == 20);
    CHECK(st.most.back().correlation > st.least.back().correlation);
    CHECK(st.least.front().correlation <= st.least.back().correlation);

    // Independent of database order.
    std::vector<WorkingImage> rev;
    for (std::size_t i = db.size(); i-- > 0;) {
        rev.push_back(db[i]);
    }
    const auto st2 = select_detection_stimuli(recon, Corpus(rev), 10);
    for (std::size_t i = 0; i < 10; ++i) {
        CHECK(st2.most[i].source_id == st.most[i].source_id);
        CHECK(st2.least[i].source_id == st.least[i].source_id);
    }

    const Corpus two({db[0], db[1]});
    const auto pair = select_detection_stimuli(recon, two, 1);
    CHECK(pair.most[0].source_id != pair.least[0].source_id);
    CHECK_THROWS_AS(select_detection_stimuli(recon, two, 2), Error);
}

TEST_CASE("d-prime against an inverse-normal oracle")
{
    const double oracle = probit(0.99) - probit(0.01);
    CHECK(oracle == doctest::Approx(4.6527).epsilon(1e-4));
    CHECK(std::abs(dprime(99, 1, 1, 99) - oracle) < 0.02);
    CHECK(dprime(99, 1, 1, 99) == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(dprime(30, 20, 30, 20) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(dprime(7, 3, 2, 8) == doctest::Approx(-dprime(2, 8, 7, 3)).epsilon(1e-12));
    // Perfect rates move to 1 - 1/(2N) and 1/(2N).
    CHECK(dprime(20, 0, 0, 20) == doctest::Approx(probit(1.0 - 1.0 / 40.0) - probit(1.0 / 40.0)).epsilon(1e-9));
    CHECK_THROWS_AS(dprime(0, 0, 1, 1), Error);
    CHECK_THROWS_AS(dprime(1, 1, 0, 0), Error);
}

TEST_CASE("RT gap is normalized by the overall intact mean")
{
    std::vector<DetectionTrial> t{
        trial(SimilarityGroup::Least, true, DetectionResponse::Intact, 540),
        trial(SimilarityGroup::Most, true, DetectionResponse::Intact, 460),
        trial(SimilarityGroup::Most, false, DetectionResponse::Scrambled, 9000),
    };
    CHECK(rt_gap(t) == doctest::Approx(0.16));
    t[0].rt = 460;
    CHECK(rt_gap(t) == 0.0);
    t.erase(t.begin());
    CHECK_THROWS_AS(rt_gap(t), Error);
}

TEST_CASE("detection log round trip and malformed lines")
{
    std::vector<DetectionTrial> t{
        trial(SimilarityGroup::Most, true, DetectionResponse::Intact, 512.5, 30),
        trial(SimilarityGroup::ThresholdBlock, false, DetectionResponse::Intact, 700, 50),
        trial(SimilarityGroup::Least, false, DetectionResponse::Scrambled, 610, 30),
    };
    t[1].image_id = "street/a.png";
    std::stringstream ss;
    write_detection_log(ss, t);
    CHECK(read_detection_log(ss) == t);

    const auto one = parse_detection_trial(
        R"({"image_id":"x","is_intact":true,"similarity_group":"threshold-block","duration":40,"response":"scrambled","rt":300,"extra":1})");
    CHECK(one.similarity_group == SimilarityGroup::ThresholdBlock);
    CHECK_FALSE(one.correct());

    std::stringstream bad;
    bad << detection_trial_json(t[0]) << "\n\n" << R"({"image_id":"x","is_intact":true})" << "\n";
    try {
        read_detection_log(bad);
        FAIL("expected Format");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::Format);
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_detection_trial("not json"), Error);
    CHECK_THROWS_AS(
        parse_detection_trial(
            R"({"image_id":"x","is_intact":true,"similarity_group":"medium","duration":40,"response":"intact","rt":1})"),
        Error);

    fixtures::TempDir dir("dlog");
    write_detection_log(dir / "a.jsonl", t);
    CHECK(read_detection_log(dir / "a.jsonl") == t);
}

TEST_CASE("detection summary counts per group")
{
    std::vector<DetectionTrial> t;
    for (int i = 0; i < 9; ++i) {
        t.push_back(trial(SimilarityGroup::Most, true, DetectionResponse::Intact, 400));
    }
    t.push_back(trial(SimilarityGroup::Most, true, DetectionResponse::Scrambled, 400));
    for (int i = 0; i < 10; ++i) {
        t.push_back(trial(SimilarityGroup::Most, false, i < 1 ? DetectionResponse::Intact : DetectionResponse::Scrambled, 450));
    }
    t.push_back(trial(SimilarityGroup::Least, true, DetectionResponse::Intact, 500));
    t.push_back(trial(SimilarityGroup::Least, false, DetectionResponse::Scrambled, 500));
    t.push_back(trial(SimilarityGroup::ThresholdBlock, true, DetectionResponse::Intact, 300, 50));
    t.push_back(trial(SimilarityGroup::ThresholdBlock, true, DetectionResponse::Intact, 300, 40));
    t.push_back(trial(SimilarityGroup::ThresholdBlock, true, DetectionResponse::Intact, 300, 30));

    const auto s = analyze_detection(t);
    CHECK(s.trials == t.size());
    CHECK(s.most.hits == 9);
    CHECK(s.most.misses == 1);
    CHECK(s.most.false_alarms == 1);
    CHECK(s.most.correct_rejections == 9);
    REQUIRE(s.dprime_most.has_value());
    CHECK(*s.dprime_most == doctest::Approx(probit(0.9) - probit(0.1)).epsilon(1e-9));
    REQUIRE(s.rt_gap.has_value());
    CHECK(*s.rt_gap == doctest::Approx((500.0 - 400.0) / (4500.0 / 11.0)));
    CHECK(s.threshold == std::optional<int>(40));
}
