#pragma once

// Live 2AFC reconstruction sessions.
//
// Each session owns one directory under <data_dir>/sessions/<id>:
//   meta.json        creation parameters and terminal status
//   target.bin       working-resolution target (image-target mode only)
//   gen-NNNN.ckpt    population, schedule and RNG state at generation start
//   trials.jsonl     one TrialRecord per answered trial, fsync'd before ack
//   final/           reconstruction exports written on termination
// State after a restart is the newest checkpoint plus the log records of
// that generation.

#include "reveal/evolve.hpp"
#include "reveal/featurespace.hpp"
#include "reveal/noise.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace reveal {

enum class SessionMode { ImageTarget, ConceptTarget };
enum class SessionStatus { Active, AwaitingAdvance, Terminated };
enum class Choice { Left, Right };

std::string_view to_string(SessionMode m) noexcept;
std::string_view to_string(SessionStatus s) noexcept;
std::string_view to_string(Choice c) noexcept;
SessionMode parse_session_mode(std::string_view s);
Choice parse_choice(std::string_view s);

nlohmann::json ga_config_to_json(const GAConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
GAConfig ga_config_from_json(const nlohmann::json& j, GAConfig base = {});

struct SessionOptions {
    SessionMode mode = SessionMode::ConceptTarget;
    std::optional<WorkingImage> target; // image-target mode
    std::string label;                  // concept word; optional caption in image mode
    GAConfig config;
    std::uint64_t seed = 1;
    std::size_t min_trials = 750;
    std::size_t chance_samples = 2000;
    double rejection_percentile = 80.0; // image-target mode
    std::string id;                     // empty: next free "session-NNNN"
};

struct SessionSummary {
    std::string id;
    SessionMode mode = SessionMode::ConceptTarget;
    std::string label;
    SessionStatus status = SessionStatus::Active;
    int generation = 1;
    std::size_t answered = 0;  // in the current generation
    std::size_t scheduled = 0; // in the current generation
    std::size_t total_answered = 0;
    std::size_t min_trials = 0;
    std::uint64_t seed = 0;
    std::int64_t created_at = 0; // ms since epoch
};

struct TrialPayload {
    std::string session_id;
    int generation = 1;
    std::size_t trial = 0;
    std::string token;
    std::uint64_t left_id = 0;
    std::uint64_t right_id = 0;
    WorkingImage left;
    WorkingImage right;
    SessionMode mode = SessionMode::ConceptTarget;
    std::string label;
    std::size_t answered = 0;
    std::size_t scheduled = 0;
};

struct ChoiceAck {
    std::string session_id;
    int generation = 1;
    std::size_t trial = 0;
    std::uint64_t winner_id = 0;
    std::size_t answered = 0;
    std::size_t scheduled = 0;
    std::size_t total_answered = 0;
    SessionStatus status = SessionStatus::Active;
};

struct TrialRecord {
    std::string session_id;
    int generation = 1;
    std::size_t trial = 0;
    std::uint64_t first_id = 0;
    std::uint64_t second_id = 0;
    std::uint64_t left_id = 0;
    std::uint64_t right_id = 0;
    Choice choice = Choice::Left;
    std::string token;
    std::int64_t issued_at = 0;
    std::int64_t answered_at = 0;

    nlohmann::json to_json() const;
    static TrialRecord from_json(const nlohmann::json& j);
};

struct FinalReconstruction {
    int generation = 0;
    Individual best;
    int best_wins = 0;
    WorkingImage mean_image; // pixel mean of that generation's population
};

class SessionManager {
public:
    /// `model` may be null; creating sessions then fails with NotReady.
    /// Existing sessions under `data_dir` are recovered.
    SessionManager(std::filesystem::path data_dir, std::shared_ptr<const FeatureModel> model, unsigned jobs = 1);
    ~SessionManager();

    SessionManager(const SessionManager&) = delete;
    SessionManager& operator=(const SessionManager&) = delete;

    bool ready() const noexcept { return model_ != nullptr; }
    const FeatureModel* model() const noexcept { return model_.get(); }
    const std::filesystem::path& data_dir() const noexcept { return data_dir_; }

    SessionSummary create(const SessionOptions& options);
    /// First unanswered pair of the current generation; repeated calls return
    /// the same pair until it is answered.
    TrialPayload next_trial(const std::string& id);
    ChoiceAck submit_choice(const std::string& id, const std::string& token, Choice choice);
    SessionSummary advance(const std::string& id);
    FinalReconstruction terminate(const std::string& id, bool force = false);

    SessionSummary status(const std::string& id) const;
    std::vector<SessionSummary> list() const;
    /// Best-by-wins of the last completed generation.
    FinalReconstruction reconstruction(const std::string& id) const;
    /// Current generation, or an earlier one rebuilt from its checkpoint and the log.
    Generation generation(const std::string& id, std::optional<int> index = std::nullopt) const;
    WorkingImage individual_image(const std::string& id, std::uint64_t individual_id) const;
    /// Throws NotFound for concept-target sessions.
    WorkingImage target_image(const std::string& id) const;

    std::filesystem::path session_dir(const std::string& id) const;

    /// Deterministic per-trial token and placement.
    static std::string trial_token(const std::string& id, std::uint64_t seed, int generation, std::size_t trial);
    static bool left_is_first(const std::string& id, std::uint64_t seed, int generation, std::size_t trial);

private:
    struct State;
    std::shared_ptr<State> find(const std::string& id) const;
    void recover();
    std::shared_ptr<State> load_session(const std::filesystem::path& dir);
    Generation replay(const State& s, int index) const;

    std::filesystem::path data_dir_;
    std::shared_ptr<const FeatureModel> model_;
    std::unique_ptr<PcNoiseSpace> space_;
    unsigned jobs_ = 1;
    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::shared_ptr<State>> sessions_;
};

nlohmann::json to_json(const SessionSummary& s);

} // namespace reveal
