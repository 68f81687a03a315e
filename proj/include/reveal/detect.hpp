#pragma once

// Rapid-detection kit: phase-scrambled masks, the presentation-time
// staircase, stimulus selection and the sensitivity/RT analyses.

#include "reveal/analysis.hpp"
#include "reveal/corpus.hpp"
#include "reveal/rng.hpp"

#include <filesystem>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace reveal {

struct ScrambleResult {
    WorkingImage raw;   // inverse transform, unclipped
    WorkingImage image; // raw, or raw contracted about its mean when it left [0,1]
    bool rescaled = false;
};

/// Keeps the amplitude spectrum and DC term of `image`; every other phase is
/// taken from the spectrum of Gaussian white noise, which is uniform and
/// conjugate-symmetric, so the output stays real.
ScrambleResult phase_scramble_full(const WorkingImage& image, Rng& rng);
WorkingImage phase_scramble(const WorkingImage& image, Rng& rng);

/// |F(u,v)| over the non-redundant half plane (side x (side/2 + 1), row-major).
std::vector<double> amplitude_spectrum(const WorkingImage& image);

struct StaircaseState {
    int current_duration = 50; // ms
    int step = 10;
    int floor = 10;
    int ceiling = 200;
    int consecutive_correct = 0;
    std::vector<std::pair<int, bool>> history; // (duration shown, correct)
};

/// 3-down/1-up: three correct in a row shortens the next presentation by one
/// step, any error lengthens it by one step. Durations stay in [floor, ceiling].
StaircaseState staircase_update(StaircaseState state, bool correct);

/// Second-smallest distinct duration. Throws InsufficientVariation when fewer
/// than two distinct durations were shown.
int threshold_estimate(std::span<const int> durations);
int threshold_estimate(const StaircaseState& state);

struct DetectionStimuli {
    std::vector<RetrievalHit> most;  // highest correlation first
    std::vector<RetrievalHit> least; // lowest correlation first
};

/// Top and bottom `n_per_group` database images by pixel correlation with the
/// reconstruction.
DetectionStimuli select_detection_stimuli(const WorkingImage& reconstruction, const Corpus& db,
                                          std::size_t n_per_group);

/// z(hit rate) - z(false-alarm rate). Rates of 0 or 1 move to 1/(2N) and
/// 1 - 1/(2N), N being the trials in that class.
double dprime(std::size_t hits, std::size_t misses, std::size_t false_alarms, std::size_t correct_rejections);

enum class SimilarityGroup { Most, Least, ThresholdBlock };
enum class DetectionResponse { Intact, Scrambled };

std::string_view to_string(SimilarityGroup g) noexcept;
std::string_view to_string(DetectionResponse r) noexcept;

struct DetectionTrial {
    std::string image_id;
    bool is_intact = true;
    SimilarityGroup similarity_group = SimilarityGroup::ThresholdBlock;
    double duration = 0.0; // ms
    DetectionResponse response = DetectionResponse::Intact;
    double rt = 0.0; // ms

    bool correct() const noexcept { return is_intact == (response == DetectionResponse::Intact); }
    friend bool operator==(const DetectionTrial&, const DetectionTrial&) = default;
};

/// (mean RT least - mean RT most) / mean RT over both, intact trials only.
double rt_gap(std::span<const DetectionTrial> trials);

/// One JSON object per line.
void write_detection_log(std::ostream& out, std::span<const DetectionTrial> trials);
void write_detection_log(const std::filesystem::path& path, std::span<const DetectionTrial> trials);
/// Throws Format with the offending line number. Unknown fields are ignored.
std::vector<DetectionTrial> read_detection_log(std::istream& in);
std::vector<DetectionTrial> read_detection_log(const std::filesystem::path& path);
std::string detection_trial_json(const DetectionTrial& trial);
DetectionTrial parse_detection_trial(const std::string& line);

struct GroupCounts {
    std::size_t hits = 0, misses = 0, false_alarms = 0, correct_rejections = 0;
};

struct DetectionSummary {
    GroupCounts most, least;
    std::optional<double> dprime_most, dprime_least;
    std::optional<double> rt_gap;
    std::optional<int> threshold; // from the threshold-block durations
    std::size_t trials = 0;
};

DetectionSummary analyze_detection(std::span<const DetectionTrial> trials);

/// Simulated observer for closing the loop without participants: a logistic
/// psychometric function of duration with guess and lapse rates, placed so
/// that P(correct) = 0.75 at `threshold_ms`.
struct LogisticObserver {
    double threshold_ms = 35.0;
    double slope_ms = 5.0; // logistic scale
    double guess = 0.5;
    double lapse = 0.0;

    double p_correct(double duration_ms) const;
    bool respond(double duration_ms, Rng& rng) const;
};

/// Runs `trials` staircase trials against the observer from `start`.
StaircaseState run_staircase(const LogisticObserver& observer, std::size_t trials, Rng& rng,
                             StaircaseState start = {});

} // namespace reveal
