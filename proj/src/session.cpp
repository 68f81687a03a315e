#include "reveal/session.hpp"

#include "reveal/error.hpp"
#include "reveal/hash.hpp"
#include "reveal/io/binary.hpp"
#include "reveal/io/image_io.hpp"
#include "reveal/observer.hpp"
#include "reveal/similarity.hpp"

#include <spdlog/spdlog.h>

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <regex>
#include <sstream>

namespace reveal {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(SessionMode m) noexcept
{
    return m == SessionMode::ImageTarget ? "image-target" : "concept-target";
}

std::string_view to_string(SessionStatus s) noexcept
{
    switch (s) {
    case SessionStatus::Active: return "active";
    case SessionStatus::AwaitingAdvance: return "awaiting-advance";
    case SessionStatus::Terminated: return "terminated";
    }
    return "?";
}

std::string_view to_string(Choice c) noexcept { return c == Choice::Left ? "left" : "right"; }

SessionMode parse_session_mode(std::string_view s)
{
    if (s == "image-target") {
        return SessionMode::ImageTarget;
    }
    if (s == "concept-target") {
        return SessionMode::ConceptTarget;
    }
    fail(ErrorCode::InvalidInput, "unknown session mode '" + std::string(s) + "'");
}

Choice parse_choice(std::string_view s)
{
    if (s == "left") {
        return Choice::Left;
    }
    if (s == "right") {
        return Choice::Right;
    }
    fail(ErrorCode::InvalidInput, "choice must be 'left' or 'right'");
}

json ga_config_to_json(const GAConfig& c)
{
    json j = {
        {"population", c.population},
        {"views", c.views},
        {"p_cross", c.p_cross},
        {"p_mut", c.p_mut},
        {"mut_scale", c.mut_scale},
        {"mig_initial", c.mig_initial},
        {"mig_decay", c.mig_decay},
        {"mutation", c.mutation == MutationMode::Additive ? "additive" : "multiplicative"},
    };
    j["initial_rejection_percentile"] =
        c.initial_rejection_percentile ? json(*c.initial_rejection_percentile) : json(nullptr);
    return j;
}

GAConfig ga_config_from_json(const json& j, GAConfig c)
{
    require(j.is_object(), ErrorCode::InvalidInput, "GA config must be an object");
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "population") {
                c.population = v.get<int>();
            } else if (key == "views") {
                c.views = v.get<int>();
            } else if (key == "p_cross") {
                c.p_cross = v.get<double>();
            } else if (key == "p_mut") {
                c.p_mut = v.get<double>();
            } else if (key == "mut_scale") {
                c.mut_scale = v.get<double>();
            } else if (key == "mig_initial") {
                c.mig_initial = v.get<double>();
            } else if (key == "mig_decay") {
                c.mig_decay = v.get<double>();
            } else if (key == "initial_rejection_percentile") {
                c.initial_rejection_percentile =
                    v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
            } else if (key == "mutation") {
                const auto m = v.get<std::string>();
                require(m == "additive" || m == "multiplicative", ErrorCode::InvalidInput,
                        "mutation must be 'additive' or 'multiplicative'");
                c.mutation = m == "additive" ? MutationMode::Additive : MutationMode::Multiplicative;
            } else {
                fail(ErrorCode::InvalidInput, "unknown GA config key '" + key + "'");
            }
        }
    } catch (const json::exception& e) {
        fail(ErrorCode::InvalidInput, std::string("bad GA config: ") + e.what());
    }
    c.validate();
    return c;
}

json TrialRecord::to_json() const
{
    return {
        {"session_id", session_id}, {"generation", generation}, {"trial", trial},
        {"first_id", first_id},     {"second_id", second_id},   {"left_id", left_id},
        {"right_id", right_id},     {"choice", std::string(reveal::to_string(choice))},
        {"token", token},           {"issued_at", issued_at},   {"answered_at", answered_at},
    };
}

TrialRecord TrialRecord::from_json(const json& j)
{
    TrialRecord r;
    try {
        r.session_id = j.at("session_id").get<std::string>();
        r.generation = j.at("generation").get<int>();
        r.trial = j.at("trial").get<std::size_t>();
        r.first_id = j.at("first_id").get<std::uint64_t>();
        r.second_id = j.at("second_id").get<std::uint64_t>();
        r.left_id = j.at("left_id").get<std::uint64_t>();
        r.right_id = j.at("right_id").get<std::uint64_t>();
        r.choice = parse_choice(j.at("choice").get<std::string>());
        r.token = j.at("token").get<std::string>();
        r.issued_at = j.at("issued_at").get<std::int64_t>();
        r.answered_at = j.at("answered_at").get<std::int64_t>();
    } catch (const json::exception& e) {
        fail(ErrorCode::Format, std::string("bad trial record: ") + e.what());
    }
    return r;
}

json to_json(const SessionSummary& s)
{
    return {
        {"session_id", s.id},
        {"mode", std::string(to_string(s.mode))},
        {"label", s.label},
        {"status", std::string(to_string(s.status))},
        {"generation", s.generation},
        {"answered", s.answered},
        {"scheduled", s.scheduled},
        {"total_answered", s.total_answered},
        {"min_trials", s.min_trials},
        {"seed", s.seed},
        {"created_at", s.created_at},
    };
}

namespace {

std::int64_t now_ms()
{
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string checkpoint_name(int index)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "gen-%04d.ckpt", index);
    return buf;
}

void fsync_path(const fs::path& p, int flags)
{
    const int fd = ::open(p.c_str(), flags);
    if (fd >= 0) {
        ::fsync(fd);
        ::close(fd);
    }
}

void append_durable(const fs::path& path, const std::string& line)
{
    const int fd = ::open(path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    require(fd >= 0, ErrorCode::Io, "cannot open " + path.string() + ": " + std::strerror(errno));
    std::size_t done = 0;
    while (done < line.size()) {
        const ssize_t n = ::write(fd, line.data() + done, line.size() - done);
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n < 0) {
            const int err = errno;
            ::close(fd);
            fail(ErrorCode::Io, "append to " + path.string() + " failed: " + std::strerror(err));
        }
        done += static_cast<std::size_t>(n);
    }
    const int rc = ::fsync(fd);
    ::close(fd);
    require(rc == 0, ErrorCode::Io, "fsync of " + path.string() + " failed");
}

void write_json_atomic(const fs::path& path, const json& j)
{
    const std::string text = j.dump(2) + "\n";
    io::write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

json read_json_file(const fs::path& path)
{
    const auto bytes = io::read_file(path);
    auto j = json::parse(bytes.begin(), bytes.end(), nullptr, false);
    require(!j.is_discarded(), ErrorCode::Format, "malformed JSON in " + path.string());
    return j;
}

/// Reads the trial log, dropping a torn final line left by a crash mid-append
/// (such a record was never acknowledged).
std::vector<TrialRecord> read_trial_log(const fs::path& path, bool repair)
{
    std::vector<TrialRecord> out;
    if (!fs::exists(path)) {
        return out;
    }
    const auto bytes = io::read_file(path);
    std::string text(bytes.begin(), bytes.end());
    const auto last_newline = text.rfind('\n');
    const std::size_t keep = last_newline == std::string::npos ? 0 : last_newline + 1;
    if (keep != text.size()) {
        spdlog::warn("{}: dropping {} bytes of an unterminated trial record", path.string(), text.size() - keep);
        text.resize(keep);
        if (repair) {
            fs::resize_file(path, keep);
        }
    }
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) {
            continue;
        }
        const auto j = json::parse(line, nullptr, false);
        require(!j.is_discarded(), ErrorCode::Format,
                path.string() + ":" + std::to_string(number) + ": malformed trial record");
        out.push_back(TrialRecord::from_json(j));
    }
    return out;
}

int winning_side(const Generation& g, const TrialRecord& r)
{
    require(r.trial < g.schedule.size(), ErrorCode::Format, "trial record outside the schedule");
    const TrialPair& p = g.schedule[r.trial];
    require(g.population[p.first].id == r.first_id && g.population[p.second].id == r.second_id, ErrorCode::Format,
            "trial record does not match the scheduled pair");
    const std::uint64_t winner = r.choice == Choice::Left ? r.left_id : r.right_id;
    require(winner == r.first_id || winner == r.second_id, ErrorCode::Format, "trial record winner not in pair");
    return winner == r.first_id ? 0 : 1;
}

std::string hash_key(const std::string& id, std::uint64_t seed, int generation, std::size_t trial,
                     std::string_view salt)
{
    std::string key = id;
    key += ':';
    key += std::to_string(seed);
    key += ':';
    key += std::to_string(generation);
    key += ':';
    key += std::to_string(trial);
    key += ':';
    key += salt;
    return sha256_hex({reinterpret_cast<const std::uint8_t*>(key.data()), key.size()});
}

WorkingImage population_mean(const Generation& g)
{
    std::vector<WorkingImage> images;
    images.reserve(g.population.size());
    for (const auto& ind : g.population) {
        images.push_back(ind.rendered);
    }
    std::vector<double> acc(images.front().size(), 0.0);
    for (const auto& im : images) {
        for (std::size_t p = 0; p < acc.size(); ++p) {
            acc[p] += im.data()[p];
        }
    }
    for (double& v : acc) {
        v /= static_cast<double>(images.size());
    }
    return WorkingImage(images.front().side(), std::move(acc), "population-mean");
}

FinalReconstruction final_of(const Generation& g)
{
    FinalReconstruction f;
    f.generation = g.index;
    const std::size_t b = g.best_by_wins();
    f.best = g.population[b];
    f.best_wins = g.wins[b];
    f.mean_image = population_mean(g);
    return f;
}

} // namespace

struct SessionManager::State {
    mutable std::shared_mutex mu;
    fs::path dir;
    std::string id;
    SessionMode mode = SessionMode::ConceptTarget;
    std::string label;
    GAConfig config;
    std::uint64_t seed = 0;
    std::size_t min_trials = 750;
    std::int64_t created_at = 0;
    bool terminated = false;
    std::optional<WorkingImage> target;
    Rng rng;
    Generation gen;
    std::size_t total_answered = 0;
    std::map<std::string, std::pair<int, std::size_t>> tokens;
    std::map<std::size_t, std::int64_t> issued;
    std::optional<FinalReconstruction> final;

    SessionStatus status() const
    {
        if (terminated) {
            return SessionStatus::Terminated;
        }
        return gen.complete() ? SessionStatus::AwaitingAdvance : SessionStatus::Active;
    }

    SessionSummary summary() const
    {
        SessionSummary s;
        s.id = id;
        s.mode = mode;
        s.label = label;
        s.status = status();
        s.generation = gen.index;
        s.answered = gen.answered();
        s.scheduled = gen.schedule.size();
        s.total_answered = total_answered;
        s.min_trials = min_trials;
        s.seed = seed;
        s.created_at = created_at;
        return s;
    }

    void add_tokens(int index)
    {
        for (std::size_t t = 0; t < config.trials_per_generation(); ++t) {
            tokens.emplace(SessionManager::trial_token(id, seed, index, t), std::make_pair(index, t));
        }
    }

    fs::path log_path() const { return dir / "trials.jsonl"; }
};

std::string SessionManager::trial_token(const std::string& id, std::uint64_t seed, int generation, std::size_t trial)
{
    return hash_key(id, seed, generation, trial, "token").substr(0, 24);
}

bool SessionManager::left_is_first(const std::string& id, std::uint64_t seed, int generation, std::size_t trial)
{
    const std::string h = hash_key(id, seed, generation, trial, "placement");
    const int nibble = h[0] <= '9' ? h[0] - '0' : h[0] - 'a' + 10;
    return (nibble & 1) == 0;
}

SessionManager::SessionManager(fs::path data_dir, std::shared_ptr<const FeatureModel> model, unsigned jobs)
    : data_dir_(std::move(data_dir)), model_(std::move(model)), jobs_(jobs)
{
    if (model_) {
        space_ = std::make_unique<PcNoiseSpace>(*model_);
    }
    fs::create_directories(data_dir_ / "sessions");
    recover();
}

SessionManager::~SessionManager() = default;

fs::path SessionManager::session_dir(const std::string& id) const { return data_dir_ / "sessions" / id; }

std::shared_ptr<SessionManager::State> SessionManager::find(const std::string& id) const
{
    std::shared_lock lock(map_mutex_);
    const auto it = sessions_.find(id);
    require(it != sessions_.end(), ErrorCode::NotFound, "no session '" + id + "'");
    return it->second;
}

void SessionManager::recover()
{
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(data_dir_ / "sessions")) {
        if (entry.is_directory() && fs::exists(entry.path() / "meta.json")) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& dir : dirs) {
        try {
            auto s = load_session(dir);
            if (s) {
                spdlog::info("recovered session {} at generation {} ({} trials answered)", s->id, s->gen.index,
                             s->total_answered);
                sessions_.emplace(s->id, std::move(s));
            }
        } catch (const std::exception& e) {
            spdlog::error("cannot recover session in {}: {}", dir.string(), e.what());
        }
    }
}

std::shared_ptr<SessionManager::State> SessionManager::load_session(const fs::path& dir)
{
    const json meta = read_json_file(dir / "meta.json");
    if (!model_) {
        spdlog::warn("session {} not loaded: no model", dir.filename().string());
        return nullptr;
    }
    if (meta.value("model_id", std::string()) != model_->id()) {
        spdlog::error("session {} was created with a different model; skipped", dir.filename().string());
        return nullptr;
    }
    auto s = std::make_shared<State>();
    s->dir = dir;
    s->id = meta.at("session_id").get<std::string>();
    s->mode = parse_session_mode(meta.at("mode").get<std::string>());
    s->label = meta.value("label", std::string());
    s->seed = meta.at("seed").get<std::uint64_t>();
    s->min_trials = meta.at("min_trials").get<std::size_t>();
    s->created_at = meta.at("created_at").get<std::int64_t>();
    s->config = ga_config_from_json(meta.at("config"));
    if (s->mode == SessionMode::ImageTarget) {
        auto r = io::BinaryReader::open(dir / "target.bin", "RVLTRGT");
        const int side = static_cast<int>(r.u32());
        s->target = WorkingImage(side, r.f64s(), "target");
    }

    int latest = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        int index = 0;
        if (std::sscanf(entry.path().filename().c_str(), "gen-%d.ckpt", &index) == 1) {
            latest = std::max(latest, index);
        }
    }
    require(latest >= 1, ErrorCode::Format, "session has no checkpoint");
    Checkpoint cp = load_checkpoint(dir / checkpoint_name(latest), *space_);
    s->rng = rng_from_state(cp.rng_state);
    s->gen = std::move(cp.generation);

    const auto records = read_trial_log(s->log_path(), true);
    s->total_answered = records.size();
    for (const auto& r : records) {
        if (r.generation == s->gen.index) {
            s->gen.record(r.trial, winning_side(s->gen, r));
        }
    }
    for (int g = 1; g <= s->gen.index; ++g) {
        s->add_tokens(g);
    }
    if (meta.value("status", std::string("active")) == "terminated") {
        s->terminated = true;
        s->final = final_of(replay(*s, meta.at("final_generation").get<int>()));
    }
    return s;
}

Generation SessionManager::replay(const State& s, int index) const
{
    if (index == s.gen.index) {
        return s.gen;
    }
    require(index >= 1 && index < s.gen.index, ErrorCode::NotFound, "no generation " + std::to_string(index));
    Generation g = load_checkpoint(s.dir / checkpoint_name(index), *space_).generation;
    for (const auto& r : read_trial_log(s.log_path(), false)) {
        if (r.generation == index) {
            g.record(r.trial, winning_side(g, r));
        }
    }
    return g;
}

SessionSummary SessionManager::create(const SessionOptions& o)
{
    require(model_ != nullptr, ErrorCode::NotReady, "no model loaded");
    o.config.validate();
    if (o.mode == SessionMode::ImageTarget) {
        require(o.target.has_value(), ErrorCode::InvalidInput, "image-target session needs a target image");
        require(o.target->side() == model_->side(), ErrorCode::InvalidInput,
                "target is " + std::to_string(o.target->side()) + " px; model works at " +
                    std::to_string(model_->side()));
        require(o.rejection_percentile > 0.0 && o.rejection_percentile <= 100.0, ErrorCode::InvalidInput,
                "rejection percentile must be in (0, 100]");
        require(o.chance_samples >= 1, ErrorCode::InvalidInput, "chance distribution needs samples");
    } else {
        require(!o.label.empty(), ErrorCode::InvalidInput, "concept-target session needs a label");
    }

    std::unique_lock map_lock(map_mutex_);
    std::string id = o.id;
    if (id.empty()) {
        for (int n = 1;; ++n) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "session-%04d", n);
            if (!sessions_.count(buf) && !fs::exists(session_dir(buf))) {
                id = buf;
                break;
            }
        }
    } else {
        static const std::regex valid("[A-Za-z0-9_-]{1,64}");
        require(std::regex_match(id, valid), ErrorCode::InvalidInput, "session id must match [A-Za-z0-9_-]{1,64}");
        require(!sessions_.count(id) && !fs::exists(session_dir(id)), ErrorCode::Conflict,
                "session '" + id + "' already exists");
    }

    auto s = std::make_shared<State>();
    s->dir = session_dir(id);
    s->id = id;
    s->mode = o.mode;
    s->label = o.label;
    s->config = o.config;
    s->seed = o.seed;
    s->min_trials = o.min_trials;
    s->created_at = now_ms();
    s->rng = stream_rng(o.seed, 0);

    if (o.mode == SessionMode::ImageTarget) {
        s->target = *o.target;
        s->config.initial_rejection_percentile = o.rejection_percentile;
        const CorrelationTarget target(*o.target);
        // A separate seed keeps the chance samples independent of the GA's first draws.
        const ChanceDistribution chance =
            build_chance(*space_, target, o.chance_samples, o.seed ^ 0x6368616e6365ULL, jobs_);
        s->gen = initial_generation(*space_, s->config, s->rng, &chance, &target);
        fs::create_directories(s->dir);
        chance.save(s->dir / "chance.bin");
        io::BinaryWriter w("RVLTRGT", 1);
        w.u32(static_cast<std::uint32_t>(o.target->side()));
        w.f64s(o.target->pixels());
        w.save_atomic(s->dir / "target.bin");
    } else {
        s->config.initial_rejection_percentile.reset();
        s->gen = initial_generation(*space_, s->config, s->rng);
        fs::create_directories(s->dir);
    }
    save_checkpoint(s->dir / checkpoint_name(1), {s->config, rng_state(s->rng), s->gen});
    json meta = {
        {"session_id", id},
        {"mode", std::string(to_string(o.mode))},
        {"label", o.label},
        {"seed", o.seed},
        {"min_trials", o.min_trials},
        {"chance_samples", o.chance_samples},
        {"created_at", s->created_at},
        {"config", ga_config_to_json(s->config)},
        {"model_id", model_->id()},
        {"status", "active"},
    };
    write_json_atomic(s->dir / "meta.json", meta);
    fsync_path(s->dir, O_RDONLY | O_DIRECTORY);
    s->add_tokens(1);
    sessions_.emplace(id, s);
    spdlog::info("created session {} ({}, seed {})", id, to_string(o.mode), o.seed);
    return s->summary();
}

TrialPayload SessionManager::next_trial(const std::string& id)
{
    auto s = find(id);
    std::unique_lock lock(s->mu);
    require(!s->terminated, ErrorCode::Gone, "session '" + id + "' is terminated");
    const auto& g = s->gen;
    const auto it = std::find(g.outcomes.begin(), g.outcomes.end(), std::int8_t{-1});
    require(it != g.outcomes.end(), ErrorCode::AwaitAdvance,
            "generation " + std::to_string(g.index) + " is complete; advance to continue");
    const auto t = static_cast<std::size_t>(it - g.outcomes.begin());
    s->issued.emplace(t, now_ms());

    const Individual& first = g.population[g.schedule[t].first];
    const Individual& second = g.population[g.schedule[t].second];
    const bool lf = left_is_first(s->id, s->seed, g.index, t);
    TrialPayload p;
    p.session_id = s->id;
    p.generation = g.index;
    p.trial = t;
    p.token = trial_token(s->id, s->seed, g.index, t);
    p.left_id = lf ? first.id : second.id;
    p.right_id = lf ? second.id : first.id;
    p.left = lf ? first.rendered : second.rendered;
    p.right = lf ? second.rendered : first.rendered;
    p.mode = s->mode;
    p.label = s->label;
    p.answered = g.answered();
    p.scheduled = g.schedule.size();
    return p;
}

ChoiceAck SessionManager::submit_choice(const std::string& id, const std::string& token, Choice choice)
{
    auto s = find(id);
    std::unique_lock lock(s->mu);
    require(!s->terminated, ErrorCode::Gone, "session '" + id + "' is terminated");
    const auto it = s->tokens.find(token);
    require(it != s->tokens.end(), ErrorCode::NotFound, "unknown trial token");
    const auto [index, t] = it->second;
    auto& g = s->gen;
    require(index == g.index, ErrorCode::Conflict, "stale trial token from generation " + std::to_string(index));
    require(g.outcomes[t] == -1, ErrorCode::Conflict, "trial already answered");

    const Individual& first = g.population[g.schedule[t].first];
    const Individual& second = g.population[g.schedule[t].second];
    const bool lf = left_is_first(s->id, s->seed, g.index, t);
    TrialRecord r;
    r.session_id = s->id;
    r.generation = g.index;
    r.trial = t;
    r.first_id = first.id;
    r.second_id = second.id;
    r.left_id = lf ? first.id : second.id;
    r.right_id = lf ? second.id : first.id;
    r.choice = choice;
    r.token = token;
    r.answered_at = now_ms();
    const auto issued = s->issued.find(t);
    r.issued_at = issued != s->issued.end() ? issued->second : r.answered_at;

    append_durable(s->log_path(), r.to_json().dump() + "\n");
    g.record(t, winning_side(g, r));
    s->issued.erase(t);
    ++s->total_answered;

    ChoiceAck ack;
    ack.session_id = s->id;
    ack.generation = g.index;
    ack.trial = t;
    ack.winner_id = choice == Choice::Left ? r.left_id : r.right_id;
    ack.answered = g.answered();
    ack.scheduled = g.schedule.size();
    ack.total_answered = s->total_answered;
    ack.status = s->status();
    return ack;
}

SessionSummary SessionManager::advance(const std::string& id)
{
    auto s = find(id);
    std::unique_lock lock(s->mu);
    require(!s->terminated, ErrorCode::Gone, "session '" + id + "' is terminated");
    require(s->gen.complete(), ErrorCode::Conflict,
            "generation " + std::to_string(s->gen.index) + " still has unanswered trials");
    Rng rng = s->rng;
    Generation next = advance_generation(s->gen, s->config, *space_, rng);
    save_checkpoint(s->dir / checkpoint_name(next.index), {s->config, rng_state(rng), next});
    s->rng = rng;
    s->gen = std::move(next);
    s->issued.clear();
    s->add_tokens(s->gen.index);
    spdlog::info("session {} advanced to generation {}", s->id, s->gen.index);
    return s->summary();
}

FinalReconstruction SessionManager::terminate(const std::string& id, bool force)
{
    auto s = find(id);
    std::unique_lock lock(s->mu);
    require(!s->terminated, ErrorCode::Gone, "session '" + id + "' is already terminated");
    require(force || s->total_answered >= s->min_trials, ErrorCode::TooEarly,
            std::to_string(s->total_answered) + " trials answered; at least " + std::to_string(s->min_trials) +
                " required");
    const int completed = s->gen.complete() ? s->gen.index : s->gen.index - 1;
    require(completed >= 1, ErrorCode::Conflict, "no completed generation to reconstruct from");
    FinalReconstruction f = final_of(replay(*s, completed));

    const fs::path out = s->dir / "final";
    fs::create_directories(out);
    io::write_png(out / "reconstruction.png", f.best.rendered);
    io::write_png(out / "population-mean.png", f.mean_image);
    io::BinaryWriter w("RVLRECON", 1);
    w.u32(static_cast<std::uint32_t>(f.best.rendered.side()));
    w.f64s(f.best.rendered.pixels());
    w.f64s(f.mean_image.pixels());
    w.save_atomic(out / "reconstruction.bin");
    write_json_atomic(out / "reconstruction.json",
                      {{"generation", f.generation},
                       {"individual_id", f.best.id},
                       {"wins", f.best_wins},
                       {"lineage_wins", f.best.lineage_wins},
                       {"provenance", provenance_string(f.best.provenance)},
                       {"scores", std::vector<double>(f.best.scores.data(), f.best.scores.data() + f.best.scores.size())}});

    json meta = read_json_file(s->dir / "meta.json");
    meta["status"] = "terminated";
    meta["final_generation"] = f.generation;
    meta["terminated_at"] = now_ms();
    meta["total_answered"] = s->total_answered;
    write_json_atomic(s->dir / "meta.json", meta);

    s->terminated = true;
    s->final = f;
    spdlog::info("session {} terminated after {} trials; reconstruction from generation {}", s->id,
                 s->total_answered, f.generation);
    return f;
}

SessionSummary SessionManager::status(const std::string& id) const
{
    auto s = find(id);
    std::shared_lock lock(s->mu);
    return s->summary();
}

std::vector<SessionSummary> SessionManager::list() const
{
    std::vector<std::shared_ptr<State>> all;
    {
        std::shared_lock lock(map_mutex_);
        for (const auto& [id, s] : sessions_) {
            all.push_back(s);
        }
    }
    std::vector<SessionSummary> out;
    for (const auto& s : all) {
        std::shared_lock lock(s->mu);
        out.push_back(s->summary());
    }
    return out;
}

FinalReconstruction SessionManager::reconstruction(const std::string& id) const
{
    auto s = find(id);
    std::shared_lock lock(s->mu);
    if (s->final) {
        return *s->final;
    }
    const int completed = s->gen.complete() ? s->gen.index : s->gen.index - 1;
    require(completed >= 1, ErrorCode::NotReady, "no completed generation yet");
    return final_of(replay(*s, completed));
}

Generation SessionManager::generation(const std::string& id, std::optional<int> index) const
{
    auto s = find(id);
    std::shared_lock lock(s->mu);
    return replay(*s, index.value_or(s->gen.index));
}

WorkingImage SessionManager::individual_image(const std::string& id, std::uint64_t individual_id) const
{
    auto s = find(id);
    std::shared_lock lock(s->mu);
    for (const auto& ind : s->gen.population) {
        if (ind.id == individual_id) {
            return ind.rendered;
        }
    }
    if (s->final && s->final->best.id == individual_id) {
        return s->final->best.rendered;
    }
    fail(ErrorCode::NotFound, "no individual " + std::to_string(individual_id) + " in the current generation");
}

WorkingImage SessionManager::target_image(const std::string& id) const
{
    auto s = find(id);
    std::shared_lock lock(s->mu);
    require(s->mode == SessionMode::ImageTarget && s->target.has_value(), ErrorCode::NotFound,
            "concept-target sessions have no target image");
    return *s->target;
}

} // namespace reveal
