#include "reveal/session_http.hpp"

#include "reveal/analysis.hpp"
#include "reveal/detect.hpp"
#include "reveal/error.hpp"
#include "reveal/hash.hpp"
#include "reveal/io/binary.hpp"
#include "reveal/io/image_io.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <numeric>
#include <regex>
#include <sstream>

namespace reveal {

namespace fs = std::filesystem;
using nlohmann::json;

int http_status(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::AwaitAdvance:
    case ErrorCode::TooEarly:
    case ErrorCode::InvalidState: return 409;
    case ErrorCode::Gone: return 410;
    case ErrorCode::NotReady: return 503;
    case ErrorCode::Io: return 500;
    default: return 400;
    }
}

namespace {

constexpr const char* kPrefix = "/api/v1";

void send_json(httplib::Response& res, const json& j, int status = 200)
{
    res.status = status;
    res.set_content(j.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message)
{
    send_json(res, {{"error", std::string(code)}, {"message", message}}, status);
}

void send_png(httplib::Response& res, const io::GrayRaster& raster)
{
    const auto bytes = io::encode_png(raster);
    res.status = 200;
    res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
}

std::string png_base64(const WorkingImage& image)
{
    return base64_encode(io::encode_png(image));
}

json parse_body(const httplib::Request& req)
{
    if (req.body.empty()) {
        return json::object();
    }
    auto j = json::parse(req.body, nullptr, false);
    require(!j.is_discarded() && j.is_object(), ErrorCode::InvalidInput, "request body must be a JSON object");
    return j;
}

std::string session_url(const std::string& id) { return std::string(kPrefix) + "/sessions/" + id; }

json progress(std::size_t answered, std::size_t scheduled)
{
    return {{"answered", answered}, {"scheduled", scheduled}};
}

} // namespace

struct SessionServer::Impl {
    SessionManager& manager;
    httplib::Server server;
    std::mutex detection_mutex;

    explicit Impl(SessionManager& m) : manager(m) { routes(); }

    using Fn = std::function<void(const httplib::Request&, httplib::Response&)>;

    static httplib::Server::Handler guarded(Fn fn)
    {
        return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
            try {
                fn(req, res);
            } catch (const Error& e) {
                send_error(res, http_status(e.code()), error_name(e.code()), e.what());
            } catch (const json::exception& e) {
                send_error(res, 400, "InvalidInput", e.what());
            } catch (const std::exception& e) {
                spdlog::error("{} {}: {}", req.method, req.path, e.what());
                send_error(res, 500, "Internal", e.what());
            }
        };
    }

    void routes()
    {
        server.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "Content-Type");
            res.status = 204;
        });
        server.set_payload_max_length(64u << 20);

        const std::string p = kPrefix;
        const std::string sid = p + "/sessions/([A-Za-z0-9_-]+)";

        server.Get(p + "/health", guarded([this](const httplib::Request&, httplib::Response& res) {
            json j = {{"status", "ok"}, {"api_version", 1}};
            if (manager.model()) {
                j["model"] = {{"id", manager.model()->id()},
                              {"side", manager.model()->side()},
                              {"components", manager.model()->k()}};
            } else {
                j["model"] = nullptr;
            }
            send_json(res, j);
        }));

        server.Post(p + "/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, to_json(manager.create(options_from(parse_body(req)))), 201);
        }));

        server.Get(p + "/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
            json arr = json::array();
            for (const auto& s : manager.list()) {
                arr.push_back(to_json(s));
            }
            send_json(res, {{"sessions", arr}});
        }));

        server.Get(sid, guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, to_json(manager.status(req.matches[1])));
        }));

        server.Get(sid + "/trial", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, trial_json(manager.next_trial(req.matches[1])));
        }));

        server.Post(sid + "/choice", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            require(body.contains("token") && body.contains("choice"), ErrorCode::InvalidInput,
                    "body needs 'token' and 'choice'");
            const ChoiceAck a = manager.submit_choice(req.matches[1], body.at("token").get<std::string>(),
                                                      parse_choice(body.at("choice").get<std::string>()));
            send_json(res, {{"session_id", a.session_id},
                            {"generation", a.generation},
                            {"trial", a.trial},
                            {"winner_id", a.winner_id},
                            {"progress", progress(a.answered, a.scheduled)},
                            {"total_answered", a.total_answered},
                            {"status", std::string(to_string(a.status))}});
        }));

        server.Post(sid + "/advance", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, to_json(manager.advance(req.matches[1])));
        }));

        server.Post(sid + "/terminate", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const json body = parse_body(req);
            const std::string id = req.matches[1];
            const FinalReconstruction f = manager.terminate(id, body.value("force", false));
            send_json(res, {{"session_id", id},
                            {"generation", f.generation},
                            {"individual_id", f.best.id},
                            {"wins", f.best_wins},
                            {"reconstruction_url", session_url(id) + "/reconstruction.png"},
                            {"mean_url", session_url(id) + "/reconstruction.png?kind=mean"}});
        }));

        server.Get(sid + "/reconstruction.png", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const FinalReconstruction f = manager.reconstruction(req.matches[1]);
            const std::string kind = req.has_param("kind") ? req.get_param_value("kind") : "best";
            require(kind == "best" || kind == "mean", ErrorCode::InvalidInput, "kind must be 'best' or 'mean'");
            send_png(res, io::to_raster(kind == "best" ? f.best.rendered : f.mean_image));
        }));

        server.Get(sid + "/gallery.png", guarded([this](const httplib::Request& req, httplib::Response& res) {
            std::optional<int> index;
            if (req.has_param("generation")) {
                index = std::stoi(req.get_param_value("generation"));
            }
            const Generation g = manager.generation(req.matches[1], index);
            std::vector<std::size_t> order(g.population.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return g.wins[a] > g.wins[b];
            });
            std::vector<WorkingImage> images;
            for (std::size_t i : order) {
                images.push_back(clipped(g.population[i].rendered));
            }
            send_png(res, gallery_grid(images, 10));
        }));

        server.Get(sid + "/images/([0-9]+)\\.png", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_png(res, io::to_raster(manager.individual_image(req.matches[1], std::stoull(req.matches[2]))));
        }));

        server.Get(sid + "/target.png", guarded([this](const httplib::Request& req, httplib::Response& res) {
            send_png(res, io::to_raster(manager.target_image(req.matches[1])));
        }));

        server.Post(p + "/detection-logs", guarded([this](const httplib::Request& req, httplib::Response& res) {
            require(req.has_param("name"), ErrorCode::InvalidInput, "query parameter 'name' is required");
            const std::string name = req.get_param_value("name");
            static const std::regex valid("[A-Za-z0-9_-]{1,64}");
            require(std::regex_match(name, valid), ErrorCode::InvalidInput, "name must match [A-Za-z0-9_-]{1,64}");
            std::istringstream in(req.body);
            const auto trials = read_detection_log(in);
            require(!trials.empty(), ErrorCode::InvalidInput, "empty detection log");
            const fs::path dir = manager.data_dir() / "detection-logs";
            const fs::path path = dir / (name + ".jsonl");
            {
                std::lock_guard lock(detection_mutex);
                fs::create_directories(dir);
                require(!fs::exists(path), ErrorCode::Conflict, "detection log '" + name + "' already exists");
                write_detection_log(path, trials);
            }
            send_json(res, {{"name", name}, {"records", trials.size()}, {"summary", summary_json(analyze_detection(trials))}},
                      201);
        }));

        server.Get(p + "/detection-logs/([A-Za-z0-9_-]+)", guarded([this](const httplib::Request& req, httplib::Response& res) {
            const fs::path path = manager.data_dir() / "detection-logs" / (std::string(req.matches[1]) + ".jsonl");
            require(fs::exists(path), ErrorCode::NotFound, "no detection log '" + std::string(req.matches[1]) + "'");
            const auto bytes = io::read_file(path);
            res.set_content(std::string(bytes.begin(), bytes.end()), "application/x-ndjson");
        }));
    }

    SessionOptions options_from(const json& body) const
    {
        SessionOptions o;
        o.mode = parse_session_mode(body.value("mode", std::string("concept-target")));
        o.label = body.value("label", std::string());
        o.seed = body.value("seed", std::uint64_t{1});
        o.min_trials = body.value("min_trials", std::size_t{750});
        o.chance_samples = body.value("chance_samples", std::size_t{2000});
        o.rejection_percentile = body.value("rejection_percentile", 80.0);
        o.id = body.value("id", std::string());
        if (body.contains("config")) {
            o.config = ga_config_from_json(body.at("config"));
        }
        if (o.mode == SessionMode::ImageTarget) {
            require(body.contains("target_png"), ErrorCode::InvalidInput, "image-target mode needs 'target_png'");
            require(manager.model() != nullptr, ErrorCode::NotReady, "no model loaded");
            const auto bytes = base64_decode(body.at("target_png").get<std::string>());
            const io::GrayRaster raster = io::decode_raster(bytes);
            const int side = manager.model()->side();
            std::vector<double> px = raster.width == side && raster.height == side ? raster.values
                                                                                  : io::resample_area(raster, side);
            o.target = WorkingImage(side, std::move(px), "target");
        }
        return o;
    }

    static json summary_json(const DetectionSummary& s)
    {
        auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
        auto counts = [](const GroupCounts& g) {
            return json{{"hits", g.hits},
                        {"misses", g.misses},
                        {"false_alarms", g.false_alarms},
                        {"correct_rejections", g.correct_rejections}};
        };
        return {{"trials", s.trials},     {"most", counts(s.most)},          {"least", counts(s.least)},
                {"dprime_most", opt(s.dprime_most)}, {"dprime_least", opt(s.dprime_least)},
                {"rt_gap", opt(s.rt_gap)}, {"threshold_ms", opt(s.threshold)}};
    }

    json trial_json(const TrialPayload& t) const
    {
        const std::string base = session_url(t.session_id);
        json j = {
            {"session_id", t.session_id},
            {"generation", t.generation},
            {"trial", t.trial},
            {"token", t.token},
            {"mode", std::string(to_string(t.mode))},
            {"progress", progress(t.answered, t.scheduled)},
            {"left",
             {{"individual_id", t.left_id},
              {"png", png_base64(t.left)},
              {"url", base + "/images/" + std::to_string(t.left_id) + ".png"}}},
            {"right",
             {{"individual_id", t.right_id},
              {"png", png_base64(t.right)},
              {"url", base + "/images/" + std::to_string(t.right_id) + ".png"}}},
        };
        if (t.mode == SessionMode::ConceptTarget) {
            j["target"] = {{"kind", "label"}, {"text", t.label}};
        } else {
            j["target"] = {{"kind", "image"},
                           {"png", png_base64(manager.target_image(t.session_id))},
                           {"url", base + "/target.png"}};
            if (!t.label.empty()) {
                j["target"]["text"] = t.label;
            }
        }
        return j;
    }
};

SessionServer::SessionServer(SessionManager& manager) : impl_(std::make_unique<Impl>(manager)) {}

SessionServer::~SessionServer()
{
    stop();
}

int SessionServer::bind(const std::string& host, int port)
{
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        require(bound > 0, ErrorCode::Io, "cannot bind " + host);
        return bound;
    }
    require(impl_->server.bind_to_port(host, port), ErrorCode::Io,
            "cannot bind " + host + ":" + std::to_string(port));
    return port;
}

void SessionServer::run() { impl_->server.listen_after_bind(); }

void SessionServer::stop()
{
    if (impl_ && impl_->server.is_running()) {
        impl_->server.stop();
    }
}

bool SessionServer::running() const { return impl_->server.is_running(); }

} // namespace reveal
