#include "fixtures.hpp"

#include "reveal/detect.hpp"
#include "reveal/error.hpp"
#include "reveal/hash.hpp"
#include "reveal/io/image_io.hpp"
#include "reveal/session.hpp"
#include "reveal/session_http.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

using namespace reveal;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

SessionOptions concept_options(std::uint64_t seed = 3)
{
    SessionOptions o;
    o.mode = SessionMode::ConceptTarget;
    o.label = "street";
    o.seed = seed;
    o.min_trials = 300;
    return o;
}

SessionOptions image_options(std::uint64_t seed = 3)
{
    SessionOptions o;
    o.mode = SessionMode::ImageTarget;
    o.target = fixtures::held_out_target(0);
    o.seed = seed;
    o.chance_samples = 500;
    return o;
}

// Deterministic surrogate participant.
Choice pick(const TrialPayload& t) { return (t.left_id + t.trial) % 3 == 0 ? Choice::Right : Choice::Left; }

void answer(SessionManager& m, const std::string& id, std::size_t n)
{
    for (std::size_t i = 0; i < n; ++i) {
        const TrialPayload t = m.next_trial(id);
        m.submit_choice(id, t.token, pick(t));
    }
}

template <class F>
ErrorCode code_of(F&& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an Error");
    return ErrorCode::Io;
}

std::size_t line_count(const fs::path& p)
{
    std::ifstream in(p);
    std::size_t n = 0;
    for (std::string line; std::getline(in, line);) {
        ++n;
    }
    return n;
}

} // namespace

TEST_CASE("image-target sessions start below the rejection percentile")
{
    fixtures::TempDir dir("sess-img");
    SessionManager m(dir.path(), fixtures::small_model());
    const auto s = m.create(image_options());
    CHECK(s.mode == SessionMode::ImageTarget);
    CHECK(s.scheduled == 250);
    const auto chance = ChanceDistribution::load(m.session_dir(s.id) / "chance.bin");
    const CorrelationTarget target(fixtures::held_out_target(0));
    const Generation g = m.generation(s.id);
    REQUIRE(g.population.size() == 100);
    for (const auto& ind : g.population) {
        CHECK(target.correlate(ind.rendered) < chance.quantile(80));
    }
    CHECK(m.target_image(s.id) == fixtures::held_out_target(0));
}

TEST_CASE("concept sessions carry no target pixels and are seed-deterministic")
{
    fixtures::TempDir a("sess-a"), b("sess-b");
    SessionManager ma(a.path(), fixtures::small_model());
    SessionManager mb(b.path(), fixtures::small_model());
    const auto sa = ma.create(concept_options(9));
    const auto sb = mb.create(concept_options(9));
    CHECK(sa.id == "session-0001");
    CHECK(code_of([&] { ma.target_image(sa.id); }) == ErrorCode::NotFound);
    const Generation ga = ma.generation(sa.id), gb = mb.generation(sb.id);
    for (std::size_t i = 0; i < ga.population.size(); ++i) {
        CHECK(ga.population[i].scores == gb.population[i].scores);
    }
    CHECK(ga.schedule == gb.schedule);
    const TrialPayload t = ma.next_trial(sa.id);
    CHECK(t.label == "street");
    CHECK(t.mode == SessionMode::ConceptTarget);
}

TEST_CASE("a generation takes exactly 250 choices, then waits for advance")
{
    fixtures::TempDir dir("sess-gen");
    SessionManager m(dir.path(), fixtures::small_model());
    const std::string id = m.create(concept_options()).id;

    const TrialPayload first = m.next_trial(id);
    CHECK(m.next_trial(id).token == first.token);
    CHECK(code_of([&] { m.advance(id); }) == ErrorCode::Conflict);

    answer(m, id, 250);
    CHECK(m.status(id).status == SessionStatus::AwaitingAdvance);
    CHECK(code_of([&] { m.next_trial(id); }) == ErrorCode::AwaitAdvance);
    const Generation g = m.generation(id);
    int total = 0;
    for (int w : g.wins) {
        total += w;
    }
    CHECK(total == 250);
    CHECK(line_count(m.session_dir(id) / "trials.jsonl") == 250);

    // Repeated and stale answers.
    CHECK(code_of([&] { m.submit_choice(id, first.token, Choice::Left); }) == ErrorCode::Conflict);
    CHECK(code_of([&] { m.submit_choice(id, "nope", Choice::Left); }) == ErrorCode::NotFound);
    CHECK(code_of([&] { m.next_trial("missing"); }) == ErrorCode::NotFound);

    const auto s2 = m.advance(id);
    CHECK(s2.generation == 2);
    CHECK(s2.answered == 0);
    CHECK(s2.total_answered == 250);
    CHECK(code_of([&] { m.submit_choice(id, first.token, Choice::Left); }) == ErrorCode::Conflict);
    CHECK(fs::exists(m.session_dir(id) / "gen-0002.ckpt"));

    // Earlier generations are rebuilt from their checkpoint and the log.
    const Generation g1 = m.generation(id, 1);
    CHECK(g1.wins == g.wins);
    CHECK(code_of([&] { m.generation(id, 7); }) == ErrorCode::NotFound);
}

TEST_CASE("left/right placement is balanced and the winner follows the choice")
{
    int left_first = 0;
    for (std::size_t t = 0; t < 1000; ++t) {
        left_first += SessionManager::left_is_first("session-0001", 3, 1 + static_cast<int>(t / 250), t % 250);
    }
    CHECK(left_first >= 450);
    CHECK(left_first <= 550);
    CHECK(SessionManager::trial_token("a", 1, 1, 0) != SessionManager::trial_token("a", 1, 1, 1));
    CHECK(SessionManager::trial_token("a", 1, 1, 0) == SessionManager::trial_token("a", 1, 1, 0));

    fixtures::TempDir dir("sess-place");
    SessionManager m(dir.path(), fixtures::small_model());
    const std::string id = m.create(concept_options()).id;
    const TrialPayload t = m.next_trial(id);
    const ChoiceAck ack = m.submit_choice(id, t.token, Choice::Right);
    CHECK(ack.winner_id == t.right_id);
    CHECK(m.individual_image(id, t.right_id) == t.right);
}

TEST_CASE("termination rules")
{
    fixtures::TempDir dir("sess-term");
    SessionManager m(dir.path(), fixtures::small_model());
    const std::string id = m.create(concept_options()).id;
    answer(m, id, 10);
    CHECK(code_of([&] { m.terminate(id); }) == ErrorCode::TooEarly);
    CHECK(code_of([&] { m.terminate(id, true); }) == ErrorCode::Conflict); // nothing completed yet
    answer(m, id, 240);
    CHECK(code_of([&] { m.terminate(id); }) == ErrorCode::TooEarly);
    m.advance(id);
    answer(m, id, 60);
    const FinalReconstruction f = m.terminate(id);
    CHECK(f.generation == 1);
    const Generation g1 = m.generation(id, 1);
    CHECK(f.best.id == g1.population[g1.best_by_wins()].id);
    CHECK(f.best_wins == g1.wins[g1.best_by_wins()]);
    CHECK(m.status(id).status == SessionStatus::Terminated);
    CHECK(code_of([&] { m.next_trial(id); }) == ErrorCode::Gone);
    CHECK(code_of([&] { m.terminate(id, true); }) == ErrorCode::Gone);
    CHECK(fs::exists(m.session_dir(id) / "final" / "reconstruction.png"));
    CHECK(fs::exists(m.session_dir(id) / "final" / "population-mean.png"));

    // Terminated state survives a restart.
    SessionManager again(dir.path(), fixtures::small_model());
    CHECK(again.status(id).status == SessionStatus::Terminated);
    CHECK(again.reconstruction(id).best.id == f.best.id);
}

TEST_CASE("session ids are validated and unique")
{
    fixtures::TempDir dir("sess-id");
    SessionManager m(dir.path(), fixtures::small_model());
    SessionOptions o = concept_options();
    o.id = "pilot_01";
    CHECK(m.create(o).id == "pilot_01");
    CHECK(code_of([&] { m.create(o); }) == ErrorCode::Conflict);
    o.id = "../escape";
    CHECK(code_of([&] { m.create(o); }) == ErrorCode::InvalidInput);
    SessionOptions bad = concept_options();
    bad.label.clear();
    CHECK(code_of([&] { m.create(bad); }) == ErrorCode::InvalidInput);

    SessionManager empty(dir.path() / "none", nullptr);
    CHECK_FALSE(empty.ready());
    CHECK(code_of([&] { empty.create(concept_options()); }) == ErrorCode::NotReady);
}

TEST_CASE("restart mid-generation replays the log exactly")
{
    fixtures::TempDir crash("sess-crash"), clean("sess-clean");
    std::string id;
    {
        SessionManager m(crash.path(), fixtures::small_model());
        id = m.create(image_options(5)).id;
        answer(m, id, 137);
    }
    SessionManager restarted(crash.path(), fixtures::small_model());
    const auto st = restarted.status(id);
    CHECK(st.answered == 137);
    CHECK(st.total_answered == 137);
    answer(restarted, id, 113);
    restarted.advance(id);

    SessionManager reference(clean.path(), fixtures::small_model());
    reference.create(image_options(5));
    answer(reference, id, 250);
    reference.advance(id);

    CHECK(restarted.generation(id, 1).wins == reference.generation(id, 1).wins);
    const Generation a = restarted.generation(id), b = reference.generation(id);
    REQUIRE(a.population.size() == b.population.size());
    for (std::size_t i = 0; i < a.population.size(); ++i) {
        CHECK(a.population[i].id == b.population[i].id);
        CHECK(a.population[i].scores == b.population[i].scores);
        CHECK(a.population[i].rendered == b.population[i].rendered);
    }
    CHECK(a.schedule == b.schedule);
}

TEST_CASE("a torn final log line is discarded on recovery")
{
    fixtures::TempDir dir("sess-torn");
    std::string id;
    {
        SessionManager m(dir.path(), fixtures::small_model());
        id = m.create(concept_options()).id;
        answer(m, id, 20);
    }
    const fs::path log = dir.path() / "sessions" / id / "trials.jsonl";
    std::ofstream(log, std::ios::app) << R"({"session_id":"session-0001","generation":1,"tri)";
    SessionManager m(dir.path(), fixtures::small_model());
    CHECK(m.status(id).answered == 20);
    answer(m, id, 5);
    CHECK(line_count(log) == 25);
    SessionManager again(dir.path(), fixtures::small_model());
    CHECK(again.status(id).answered == 25);
}

TEST_CASE("sessions built on another model are not loaded")
{
    fixtures::TempDir dir("sess-model");
    {
        SessionManager m(dir.path(), fixtures::small_model());
        m.create(concept_options());
    }
    auto other = std::make_shared<const FeatureModel>(
        FeatureModel::fit(fixtures::small_corpus(), fixtures::small_spec(), 20));
    SessionManager m(dir.path(), other);
    CHECK(m.list().empty());
}

TEST_CASE("GA config JSON round trip rejects unknown keys")
{
    GAConfig c;
    c.population = 40;
    c.mutation = MutationMode::Multiplicative;
    c.initial_rejection_percentile = 70.0;
    const GAConfig back = ga_config_from_json(ga_config_to_json(c));
    CHECK(back.population == 40);
    CHECK(back.mutation == MutationMode::Multiplicative);
    CHECK(back.initial_rejection_percentile == std::optional<double>(70.0));
    CHECK(code_of([] { ga_config_from_json(json{{"populaton", 10}}); }) == ErrorCode::InvalidInput);
    CHECK(ga_config_from_json(json{{"views", 4}}).views == 4);
}

TEST_CASE("trial records round trip through JSON")
{
    TrialRecord r;
    r.session_id = "s";
    r.generation = 3;
    r.trial = 17;
    r.first_id = 5;
    r.second_id = 9;
    r.left_id = 9;
    r.right_id = 5;
    r.choice = Choice::Right;
    r.token = "abc";
    r.issued_at = 100;
    r.answered_at = 250;
    const TrialRecord b = TrialRecord::from_json(r.to_json());
    CHECK(b.to_json() == r.to_json());
}

TEST_CASE("HTTP interface")
{
    fixtures::TempDir dir("sess-http");
    SessionManager manager(dir.path(), fixtures::small_model());
    SessionServer server(manager);
    const int port = server.bind("127.0.0.1", 0);
    REQUIRE(port > 0);
    std::thread serving([&] { server.run(); });
    struct Joiner {
        SessionServer& s;
        std::thread& t;
        ~Joiner()
        {
            s.stop();
            t.join();
        }
    } joiner{server, serving};
    for (int i = 0; i < 200 && !server.running(); ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    httplib::Client cli("127.0.0.1", port);
    const std::string api = "/api/v1";

    auto health = cli.Get(api + "/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["model"]["side"] == 32);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

    auto created = cli.Post(api + "/sessions", R"({"mode":"concept-target","label":"forest","seed":4,"min_trials":10})",
                            "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string id = json::parse(created->body)["session_id"];

    auto trial = cli.Get(api + "/sessions/" + id + "/trial");
    REQUIRE(trial);
    CHECK(trial->status == 200);
    const json t = json::parse(trial->body);
    CHECK(t["target"]["kind"] == "label");
    CHECK(t["target"]["text"] == "forest");
    CHECK_FALSE(t["target"].contains("png"));
    const auto left_png = base64_decode(t["left"]["png"].get<std::string>());
    const io::GrayRaster left = io::decode_raster(left_png);
    CHECK(left.width == 32);

    const json choice = {{"token", t["token"]}, {"choice", "left"}};
    auto ack = cli.Post(api + "/sessions/" + id + "/choice", choice.dump(), "application/json");
    REQUIRE(ack);
    CHECK(ack->status == 200);
    CHECK(json::parse(ack->body)["winner_id"] == t["left"]["individual_id"]);
    auto dup = cli.Post(api + "/sessions/" + id + "/choice", choice.dump(), "application/json");
    CHECK(dup->status == 409);
    CHECK(json::parse(dup->body)["error"] == "Conflict");

    auto early = cli.Post(api + "/sessions/" + id + "/terminate", "{}", "application/json");
    CHECK(early->status == 409);
    CHECK(json::parse(early->body)["error"] == "TooEarly");
    CHECK(cli.Get(api + "/sessions/" + id + "/target.png")->status == 404);
    CHECK(cli.Get(api + "/sessions/nobody")->status == 404);
    CHECK(cli.Post(api + "/sessions", "[1]", "application/json")->status == 400);
    CHECK(cli.Post(api + "/sessions/" + id + "/advance", "", "application/json")->status == 409);

    auto img = cli.Get(api + "/sessions/" + id + "/images/" + std::to_string(t["right"]["individual_id"].get<int>()) + ".png");
    REQUIRE(img);
    CHECK(img->status == 200);
    CHECK(img->get_header_value("Content-Type") == "image/png");
    CHECK(cli.Get(api + "/sessions/" + id + "/gallery.png")->status == 200);
    CHECK(cli.Get(api + "/sessions/" + id + "/reconstruction.png")->status == 503);

    // Image-target session from a PNG upload.
    const auto png = io::encode_png(fixtures::held_out_target(1));
    const json body = {{"mode", "image-target"}, {"seed", 2}, {"chance_samples", 200}, {"target_png", base64_encode(png)}};
    auto made = cli.Post(api + "/sessions", body.dump(), "application/json");
    REQUIRE(made);
    CHECK(made->status == 201);
    const std::string img_id = json::parse(made->body)["session_id"];
    const json it = json::parse(cli.Get(api + "/sessions/" + img_id + "/trial")->body);
    CHECK(it["target"]["kind"] == "image");
    CHECK(cli.Get(api + "/sessions/" + img_id + "/target.png")->status == 200);
    CHECK(json::parse(cli.Get(api + "/sessions")->body)["sessions"].size() == 2);

    // Detection logs.
    const std::string log =
        R"({"image_id":"a","is_intact":true,"similarity_group":"most","duration":40,"response":"intact","rt":420})"
        "\n"
        R"({"image_id":"b","is_intact":false,"similarity_group":"most","duration":40,"response":"scrambled","rt":480})"
        "\n";
    auto up = cli.Post(api + "/detection-logs?name=obs1", log, "application/x-ndjson");
    REQUIRE(up);
    CHECK(up->status == 201);
    const json summary = json::parse(up->body);
    CHECK(summary["records"] == 2);
    CHECK(summary["summary"]["most"]["hits"] == 1);
    CHECK(cli.Post(api + "/detection-logs?name=obs1", log, "application/x-ndjson")->status == 409);
    CHECK(cli.Post(api + "/detection-logs?name=bad", "{oops}\n", "application/x-ndjson")->status == 400);
    auto down = cli.Get(api + "/detection-logs/obs1");
    CHECK(down->status == 200);
    std::istringstream sent(log), got(down->body);
    CHECK(read_detection_log(got) == read_detection_log(sent));
    CHECK(cli.Get(api + "/detection-logs/none")->status == 404);
}

TEST_CASE("error codes map to HTTP statuses")
{
    CHECK(http_status(ErrorCode::NotFound) == 404);
    CHECK(http_status(ErrorCode::Conflict) == 409);
    CHECK(http_status(ErrorCode::AwaitAdvance) == 409);
    CHECK(http_status(ErrorCode::TooEarly) == 409);
    CHECK(http_status(ErrorCode::Gone) == 410);
    CHECK(http_status(ErrorCode::NotReady) == 503);
    CHECK(http_status(ErrorCode::InvalidInput) == 400);
    CHECK(http_status(ErrorCode::Io) == 500);
}
