// revealctl: batch driver for model fitting, simulations, analyses and the
// session server.

#include "reveal/analysis.hpp"
#include "reveal/corpus.hpp"
#include "reveal/detect.hpp"
#include "reveal/error.hpp"
#include "reveal/featurespace.hpp"
#include "reveal/hash.hpp"
#include "reveal/io/binary.hpp"
#include "reveal/io/image_io.hpp"
#include "reveal/noise.hpp"
#include "reveal/observer.hpp"
#include "reveal/session.hpp"
#include "reveal/session_http.hpp"
#include "reveal/simd/kernels.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <thread>

#ifndef REVEAL_VERSION
#define REVEAL_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace reveal;

namespace {

struct Common {
    std::uint64_t seed = 1;
    std::string model;
    unsigned jobs = 1;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool needs_model)
{
    cmd->add_option("--seed", c.seed, "RNG seed")->capture_default_str();
    auto* m = cmd->add_option("--model", c.model, "Model file from fit-model");
    if (needs_model) {
        m->required();
    }
    cmd->add_option("--jobs", c.jobs, "Worker threads for parallel paths (0 = all cores)")->capture_default_str();
}

json hash_inputs(const std::vector<fs::path>& inputs)
{
    json j = json::object();
    for (const auto& p : inputs) {
        if (p.empty()) {
            continue;
        }
        if (fs::is_regular_file(p)) {
            j[p.string()] = sha256_file(p);
        } else if (fs::is_directory(p)) {
            // Directory digest: sorted relative paths with their file hashes.
            std::vector<fs::path> files;
            for (const auto& e : fs::recursive_directory_iterator(p)) {
                if (e.is_regular_file()) {
                    files.push_back(fs::relative(e.path(), p));
                }
            }
            std::sort(files.begin(), files.end());
            std::string listing;
            for (const auto& f : files) {
                listing += f.generic_string() + " " + sha256_file(p / f) + "\n";
            }
            j[p.string()] = sha256_hex({reinterpret_cast<const std::uint8_t*>(listing.data()), listing.size()});
        }
    }
    return j;
}

/// manifest.json inside `out` when it is a directory, otherwise <out>.manifest.json.
void write_manifest(const fs::path& out, const CLI::App& app, const CLI::App& cmd, const Common& c,
                    const std::vector<fs::path>& inputs, json results = json::object())
{
    const fs::path path = fs::is_directory(out) ? out / "manifest.json" : fs::path(out.string() + ".manifest.json");
    json options = json::object();
    for (const CLI::Option* opt : cmd.get_options()) {
        if (opt->get_name() == "--help" || opt->get_name().empty()) {
            continue;
        }
        const auto values = opt->reduced_results();
        std::string name = opt->get_name();
        while (!name.empty() && name.front() == '-') {
            name.erase(name.begin());
        }
        if (values.size() == 1) {
            options[name] = values.front();
        } else if (!values.empty()) {
            options[name] = values;
        } else if (!opt->get_default_str().empty()) {
            options[name] = opt->get_default_str();
        }
    }
    const json m = {
        {"tool", "revealctl"},
        {"version", REVEAL_VERSION},
        {"command", cmd.get_name()},
        {"options", options},
        {"seed", c.seed},
        {"inputs", hash_inputs(inputs)},
        {"simd", simd::active_isa() == simd::Isa::Avx2 ? "avx2" : "scalar"},
        {"config_toml", app.config_to_str(true, false)},
        {"results", results},
    };
    const std::string text = m.dump(2) + "\n";
    io::write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

std::shared_ptr<const FeatureModel> load_model(const std::string& path)
{
    return std::make_shared<const FeatureModel>(FeatureModel::load(path));
}

std::vector<int> parse_int_list(const std::string& s)
{
    std::vector<int> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        require(!item.empty(), ErrorCode::InvalidInput, "empty entry in list '" + s + "'");
        out.push_back(std::stoi(item));
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text)
{
    io::write_file_atomic(path, {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

void write_f64s(const fs::path& path, std::string_view magic, int side, std::span<const double> values)
{
    io::BinaryWriter w(magic, 1);
    w.u32(static_cast<std::uint32_t>(side));
    w.f64s(values);
    w.save_atomic(path);
}

std::string curve_tsv(const IdealRunResult& r)
{
    std::string s = "generation\tmean_correlation\tmax_correlation\tbest_percentile\n";
    char buf[160];
    for (const auto& g : r.curve) {
        std::snprintf(buf, sizeof buf, "%d\t%.17g\t%.17g\t%.17g\n", g.index, g.mean_correlation, g.max_correlation,
                      g.best_percentile);
        s += buf;
    }
    return s;
}

json ideal_summary(const IdealRunResult& r)
{
    json reached = json::object();
    for (const auto& [p, g] : r.generations_to_percentile) {
        char key[32];
        std::snprintf(key, sizeof key, "%g", p);
        reached[key] = g;
    }
    return {{"generations", r.generations},
            {"converged", r.converged},
            {"best_correlation", r.best_correlation},
            {"best_individual", r.best.id},
            {"best_generation", r.best.birth_generation},
            {"generations_to_percentile", reached}};
}

volatile std::sig_atomic_t g_stop = 0;

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"REVEAL pipeline driver", "revealctl"};
    app.set_version_flag("--version", REVEAL_VERSION);
    app.set_config("--config", "", "TOML config file; command-line flags override it");
    app.require_subcommand(1);
    app.fallthrough();
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off")->capture_default_str();

    Common c;

    // make-test-corpus
    auto* mk = app.add_subcommand("make-test-corpus", "Write a synthetic labeled scene corpus as PNG files");
    std::size_t mk_n = 300;
    int mk_side = 64;
    std::size_t mk_targets = 0;
    mk->add_option("--n", mk_n, "Number of images")->capture_default_str();
    mk->add_option("--side", mk_side, "Image side in pixels")->capture_default_str();
    mk->add_option("--targets", mk_targets, "Held-out targets per family, written to <out>/../<out>-targets")
        ->capture_default_str();
    mk->add_option("--out", c.out, "Output directory")->required();
    mk->add_option("--seed", c.seed, "RNG seed")->capture_default_str();

    // fit-model
    auto* fit = app.add_subcommand("fit-model", "Fit the Gabor/PCA feature model to a corpus");
    std::string fit_corpus;
    int fit_k = 150;
    std::optional<double> fit_lambda;
    GaborBankSpec fit_spec;
    fit_spec.side = 64;
    std::string fit_scales = "3,6,11", fit_orients = "0,45,90,135", fit_phases = "0,90";
    fit->add_option("--corpus", fit_corpus, "Image directory")->required();
    fit->add_option("--side", fit_spec.side, "Working resolution")->capture_default_str();
    fit->add_option("--k", fit_k, "Principal components to keep")->capture_default_str();
    fit->add_option("--lambda", fit_lambda, "Ridge penalty (default: 1e-4 * mean Gram diagonal)");
    fit->add_option("--scales", fit_scales, "Wavelets per side at each scale")->capture_default_str();
    fit->add_option("--orientations", fit_orients, "Degrees")->capture_default_str();
    fit->add_option("--phases", fit_phases, "Degrees")->capture_default_str();
    fit->add_option("--bandwidth", fit_spec.bandwidth_octaves, "Octaves")->capture_default_str();
    fit->add_option("--out", c.out, "Model file")->required();

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Print a model summary as JSON");
    std::string inspect_path;
    inspect->add_option("model", inspect_path, "Model file")->required();

    // gen-noise
    auto* gen = app.add_subcommand("gen-noise", "Sample PC-noise images");
    std::size_t gen_n = 10;
    std::string gen_dist = "uniform";
    add_common(gen, c, true);
    gen->add_option("--n", gen_n, "Images to draw")->capture_default_str();
    gen->add_option("--dist", gen_dist, "uniform|gaussian")->capture_default_str();
    gen->add_option("--out", c.out, "Output directory")->required();

    // chance
    auto* chance = app.add_subcommand("chance", "Chance distribution of noise-target correlations");
    std::string target_path;
    std::size_t chance_n = 2000;
    add_common(chance, c, true);
    chance->add_option("--target", target_path, "Target image")->required();
    chance->add_option("--n", chance_n, "Noise samples")->capture_default_str();
    chance->add_option("--out", c.out, "Output text file, one sorted value per line")->required();

    // ideal-run
    auto* ideal = app.add_subcommand("ideal-run", "Evolve noise with the ideal observer");
    GAConfig ga;
    std::optional<double> stop_percentile, stop_correlation, reject_percentile;
    int max_generations = 100;
    add_common(ideal, c, true);
    ideal->add_option("--target", target_path, "Target image")->required();
    ideal->add_option("--stop-percentile", stop_percentile, "Stop once best exceeds this chance percentile");
    ideal->add_option("--stop-correlation", stop_correlation, "Stop once best reaches this correlation");
    ideal->add_option("--max-generations", max_generations)->capture_default_str();
    ideal->add_option("--chance-n", chance_n, "Chance samples")->capture_default_str();
    ideal->add_option("--reject-percentile", reject_percentile, "Initial-population rejection percentile");
    ideal->add_option("--population", ga.population)->capture_default_str();
    ideal->add_option("--views", ga.views)->capture_default_str();
    ideal->add_option("--p-cross", ga.p_cross)->capture_default_str();
    ideal->add_option("--p-mut", ga.p_mut)->capture_default_str();
    ideal->add_option("--mut-scale", ga.mut_scale)->capture_default_str();
    ideal->add_option("--mig-initial", ga.mig_initial)->capture_default_str();
    ideal->add_option("--mig-decay", ga.mig_decay)->capture_default_str();
    ideal->add_option("--out", c.out, "Output directory")->required();

    // superstitious
    auto* sup = app.add_subcommand("superstitious", "Classification image from a thresholding observer");
    std::size_t sup_trials = 5000;
    double sup_criterion = 90.0;
    add_common(sup, c, true);
    sup->add_option("--target", target_path, "Target image")->required();
    sup->add_option("--trials", sup_trials)->capture_default_str();
    sup->add_option("--criterion", sup_criterion, "Chance percentile an image must exceed")->capture_default_str();
    sup->add_option("--chance-n", chance_n, "Chance samples")->capture_default_str();
    sup->add_option("--out", c.out, "Output directory")->required();

    // whitenoise-baseline
    auto* white = app.add_subcommand("whitenoise-baseline", "Ideal-observer GA over pixel white noise");
    int white_generations = 50;
    add_common(white, c, false);
    white->add_option("--target", target_path, "Target image")->required();
    white->add_option("--generations", white_generations)->capture_default_str();
    white->add_option("--out", c.out, "Output directory")->required();

    // serve
    auto* serve = app.add_subcommand("serve", "Run the 2AFC session server");
    std::string data_dir = "reveal-data", host = "127.0.0.1";
    int port = 8080;
    add_common(serve, c, false);
    serve->add_option("--data-dir", data_dir)->capture_default_str();
    serve->add_option("--host", host)->capture_default_str();
    serve->add_option("--port", port, "0 picks a free port")->capture_default_str();

    // analyze-retrieval
    auto* ret = app.add_subcommand("analyze-retrieval", "Nearest-neighbor retrieval and its chance levels");
    std::string query_path, corpus_dir, category;
    std::size_t ret_k = 20, bootstrap_draws = 10000, chance_max_n = 0;
    bool model_space = false;
    add_common(ret, c, false);
    ret->add_option("--query", query_path, "Reconstruction image")->required();
    ret->add_option("--corpus", corpus_dir, "Database directory")->required();
    ret->add_option("--k", ret_k)->capture_default_str();
    ret->add_option("--category", category, "Label counted in the hits and in the bootstrap");
    ret->add_option("--bootstrap", bootstrap_draws)->capture_default_str();
    ret->add_option("--chance-max", chance_max_n, "Noise images for the max-correlation chance (needs --model)")
        ->capture_default_str();
    ret->add_flag("--model-space", model_space, "Rank by PCA-score correlation (needs --model)");
    ret->add_option("--out", c.out, "Output directory")->required();

    // analyze-classifier
    auto* cls = app.add_subcommand("analyze-classifier", "Correlation classifier over reconstructions");
    std::vector<std::string> cls_targets, cls_recons;
    std::vector<int> cls_truth;
    cls->add_option("--target", cls_targets, "Target image (repeat; order defines indices)")->required();
    cls->add_option("--reconstruction", cls_recons, "Reconstruction image (repeat)")->required();
    cls->add_option("--truth", cls_truth, "Target index per reconstruction (repeat)")->required();
    cls->add_option("--out", c.out, "Output JSON file")->required();

    // analyze-detection
    auto* det = app.add_subcommand("analyze-detection", "d', RT gap and threshold from detection logs");
    std::vector<std::string> det_logs;
    det->add_option("--log", det_logs, "Detection log (repeat to pool)")->required();
    det->add_option("--out", c.out, "Output JSON file")->required();

    // export-gallery
    auto* gal = app.add_subcommand("export-gallery", "Query + top-k strip, or a grid of images");
    std::vector<std::string> gal_images;
    int gal_columns = 10;
    gal->add_option("--query", query_path, "Query image for a retrieval strip");
    gal->add_option("--corpus", corpus_dir, "Database for the strip");
    gal->add_option("--k", ret_k)->capture_default_str();
    gal->add_option("--images", gal_images, "Images for a grid");
    gal->add_option("--columns", gal_columns)->capture_default_str();
    gal->add_option("--out", c.out, "Output PNG")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    spdlog::set_level(spdlog::level::from_str(log_level));
    spdlog::set_pattern("[%H:%M:%S.%e] [%l] %v");

    try {
        if (*mk) {
            const Corpus corpus = synthesize_test_corpus(mk_n, mk_side, c.seed);
            const fs::path out = c.out;
            for (const auto& im : corpus) {
                const fs::path p = out / im.category_label().value_or("unlabeled") / (im.source_id() + ".png");
                fs::create_directories(p.parent_path());
                io::write_png(p, im);
            }
            json results = {{"images", corpus.size()}};
            if (mk_targets > 0) {
                const fs::path tdir = out.parent_path() / (out.filename().string() + "-targets");
                for (int f = 0; f < 3; ++f) {
                    for (std::size_t t = 0; t < mk_targets; ++t) {
                        const auto im = synthesize_scene(f, mk_side, c.seed, 1'000'000 + 3 * t + f);
                        const fs::path p = tdir / kSyntheticFamilies[f] / ("target-" + std::to_string(t) + ".png");
                        fs::create_directories(p.parent_path());
                        io::write_png(p, im);
                    }
                }
                results["targets_dir"] = tdir.string();
            }
            write_manifest(out, app, *mk, c, {}, results);
            std::cout << corpus.size() << " images written to " << out.string() << "\n";
        } else if (*fit) {
            fit_spec.scales = parse_int_list(fit_scales);
            fit_spec.orientations_deg.clear();
            for (int v : parse_int_list(fit_orients)) {
                fit_spec.orientations_deg.push_back(v);
            }
            fit_spec.phases_deg.clear();
            for (int v : parse_int_list(fit_phases)) {
                fit_spec.phases_deg.push_back(v);
            }
            const Corpus corpus = load_corpus(fit_corpus, fit_spec.side);
            const FeatureModel model = FeatureModel::fit(corpus, fit_spec, fit_k, fit_lambda);
            model.save(c.out);
            const double kept = model.explained_variance().sum() / model.total_variance();
            write_manifest(c.out, app, *fit, c, {fit_corpus},
                           {{"model_id", model.id()}, {"wavelets", model.bank().size()}, {"explained", kept}});
            std::cout << "model " << model.id().substr(0, 16) << ": " << corpus.size() << " images, "
                      << model.bank().size() << " wavelets, K=" << model.k() << ", explained " << kept << "\n";
        } else if (*inspect) {
            const FeatureModel m = FeatureModel::load(inspect_path);
            const auto& spec = m.bank().spec();
            const json j = {
                {"id", m.id()},
                {"side", m.side()},
                {"wavelets", m.bank().size()},
                {"scales", spec.scales},
                {"orientations", spec.orientations_deg},
                {"phases", spec.phases_deg},
                {"lambda", m.encoder().lambda()},
                {"components", m.k()},
                {"corpus_size", m.corpus_size()},
                {"explained_fraction", m.explained_variance().sum() / m.total_variance()},
                {"top_variances", std::vector<double>(m.explained_variance().data(),
                                                      m.explained_variance().data() +
                                                          std::min<Eigen::Index>(10, m.explained_variance().size()))},
            };
            std::cout << j.dump(2) << "\n";
        } else if (*gen) {
            const auto model = load_model(c.model);
            require(gen_dist == "uniform" || gen_dist == "gaussian", ErrorCode::InvalidInput,
                    "--dist must be uniform or gaussian");
            const PcNoiseSpace space(*model, gen_dist == "uniform" ? NoiseDistribution::Uniform
                                                                   : NoiseDistribution::Gaussian);
            const fs::path out = c.out;
            fs::create_directories(out);
            std::string scores;
            for (std::size_t i = 0; i < gen_n; ++i) {
                Rng rng = stream_rng(c.seed, i);
                const Eigen::VectorXd s = space.sample(rng);
                char name[32];
                std::snprintf(name, sizeof name, "noise-%04zu.png", i);
                io::write_png(out / name, space.render(s));
                for (Eigen::Index k = 0; k < s.size(); ++k) {
                    char buf[32];
                    std::snprintf(buf, sizeof buf, "%s%.17g", k ? "," : "", s[k]);
                    scores += buf;
                }
                scores += "\n";
            }
            write_text(out / "scores.csv", scores);
            write_manifest(out, app, *gen, c, {c.model}, {{"images", gen_n}});
        } else if (*chance) {
            const auto model = load_model(c.model);
            const WorkingImage target = io::read_working_image(target_path, model->side());
            const ChanceDistribution d = build_chance(*model, target, chance_n, c.seed, c.jobs);
            d.write_text(c.out);
            d.save(c.out + ".bin");
            write_manifest(c.out, app, *chance, c, {c.model, target_path},
                           {{"q95", d.quantile(95)}, {"q99", d.quantile(99)}, {"target_id", d.target_id}});
        } else if (*ideal) {
            const auto model = load_model(c.model);
            const PcNoiseSpace space(*model);
            const WorkingImage target_img = io::read_working_image(target_path, model->side());
            const CorrelationTarget target(target_img);
            const ChanceDistribution d = build_chance(*model, target_img, chance_n, c.seed ^ 0x6368616e6365ULL, c.jobs);
            IdealRunOptions opt;
            opt.config = ga;
            opt.config.initial_rejection_percentile = reject_percentile;
            opt.stop.percentile = stop_percentile;
            opt.stop.correlation = stop_correlation;
            opt.stop.max_generations = max_generations;
            opt.chance = &d;
            Rng rng = stream_rng(c.seed, 0);
            const IdealRunResult r = run_ideal(space, target, opt, rng);
            const fs::path out = c.out;
            fs::create_directories(out);
            write_text(out / "curve.tsv", curve_tsv(r));
            io::write_png(out / "reconstruction.png", r.best.rendered);
            write_f64s(out / "reconstruction.bin", "RVLIMAGE", r.best.rendered.side(), r.best.rendered.pixels());
            io::write_png(out / "truncation.png", model->truncate(target_img));
            json summary = ideal_summary(r);
            summary["truncation_correlation"] = pixel_correlation(model->truncate(target_img), target_img);
            summary["chance_q95"] = d.quantile(95);
            write_text(out / "summary.json", summary.dump(2) + "\n");
            write_manifest(out, app, *ideal, c, {c.model, target_path}, summary);
            std::cout << summary.dump(2) << "\n";
        } else if (*sup) {
            const auto model = load_model(c.model);
            const PcNoiseSpace space(*model);
            const WorkingImage target_img = io::read_working_image(target_path, model->side());
            const CorrelationTarget target(target_img);
            const ChanceDistribution d = build_chance(*model, target_img, chance_n, c.seed ^ 0x6368616e6365ULL, c.jobs);
            const SuperstitiousResult r = superstitious_sim(space, target, d, sup_trials, sup_criterion, c.seed, c.jobs);
            const fs::path out = c.out;
            fs::create_directories(out);
            write_f64s(out / "classification.bin", "RVLIMAGE", r.classification_image.side(),
                       r.classification_image.pixels());
            // Display copy: contrast-stretched to [0,1].
            WorkingImage shown = r.classification_image;
            const auto [lo, hi] = std::minmax_element(shown.data().begin(), shown.data().end());
            const double lo_v = *lo, span = *hi - *lo;
            for (double& v : shown.pixels()) {
                v = span > 0 ? (v - lo_v) / span : 0.5;
            }
            io::write_png(out / "classification.png", shown);
            const json summary = {{"trials", r.trials},
                                  {"accepted", r.accepted},
                                  {"acceptance_fraction", static_cast<double>(r.accepted) / r.trials},
                                  {"correlation", r.correlation},
                                  {"correlation_percentile", percentile_of(d, r.correlation)}};
            write_text(out / "summary.json", summary.dump(2) + "\n");
            write_manifest(out, app, *sup, c, {c.model, target_path}, summary);
            std::cout << summary.dump(2) << "\n";
        } else if (*white) {
            const WorkingImage target_img = io::read_working_image(target_path);
            const CorrelationTarget target(target_img);
            Rng rng = stream_rng(c.seed, 0);
            const IdealRunResult r = run_whitenoise_baseline(target_img.side(), target, GAConfig{}, white_generations, rng);
            const fs::path out = c.out;
            fs::create_directories(out);
            write_text(out / "curve.tsv", curve_tsv(r));
            io::write_png(out / "best.png", r.best.rendered);
            const json summary = ideal_summary(r);
            write_text(out / "summary.json", summary.dump(2) + "\n");
            write_manifest(out, app, *white, c, {target_path}, summary);
            std::cout << summary.dump(2) << "\n";
        } else if (*serve) {
            std::shared_ptr<const FeatureModel> model;
            if (!c.model.empty()) {
                model = load_model(c.model);
            } else {
                spdlog::warn("no --model given; session creation will fail with NotReady");
            }
            SessionManager manager(data_dir, model, c.jobs);
            SessionServer server(manager);
            const int bound = server.bind(host, port);
            std::signal(SIGINT, [](int) { g_stop = 1; });
            std::signal(SIGTERM, [](int) { g_stop = 1; });
            std::jthread watcher([&](std::stop_token st) {
                while (!st.stop_requested() && !g_stop) {
                    std::this_thread::sleep_for(std::chrono::milliseconds(100));
                }
                server.stop();
            });
            // Single stdout line so supervisors can discover the port.
            std::cout << "listening on http://" << host << ":" << bound << "/api/v1" << std::endl;
            server.run();
            watcher.request_stop();
        } else if (*ret) {
            const WorkingImage query = io::read_working_image(query_path);
            const Corpus db = load_corpus(corpus_dir, query.side());
            std::shared_ptr<const FeatureModel> model;
            if (!c.model.empty()) {
                model = load_model(c.model);
            }
            require(!model_space || model, ErrorCode::InvalidInput, "--model-space needs --model");
            const RetrievalResult r =
                model_space ? nearest_neighbors(query, db, ret_k, *model, c.jobs) : nearest_neighbors(query, db, ret_k, c.jobs);
            const fs::path out = c.out;
            fs::create_directories(out);
            write_retrieval_table(out / "retrieval.tsv", r);
            std::vector<WorkingImage> hits;
            for (const auto& h : r.hits) {
                hits.push_back(db[h.index]);
            }
            io::write_png(out / "gallery.png", gallery_strip(clipped(query), hits));
            json summary = {{"k", r.k}, {"hits", r.hits.size()}, {"top_correlation", r.hits.empty() ? 0.0 : r.hits[0].correlation}};
            if (!category.empty()) {
                summary["category"] = category;
                summary["category_fraction"] = r.category_fraction(category);
                if (db.labeled()) {
                    Rng rng = stream_rng(c.seed, 0);
                    const auto b = bootstrap_category_chance(db, std::min(ret_k, db.size()), bootstrap_draws, category, rng);
                    summary["bootstrap"] = {{"draws", bootstrap_draws}, {"mean", b.mean}, {"sd", b.sd},
                                            {"q95", b.quantile(95)}, {"q99", b.quantile(99)}};
                }
            }
            if (chance_max_n > 0) {
                require(model != nullptr, ErrorCode::InvalidInput, "--chance-max needs --model");
                const auto maxima = retrieval_chance_max(PcNoiseSpace(*model), db, chance_max_n, c.seed, c.jobs);
                ChanceDistribution cd;
                cd.samples = maxima;
                const double best = r.hits.empty() ? 0.0 : r.hits[0].correlation;
                summary["chance_max"] = {{"n", chance_max_n}, {"q95", cd.quantile(95)}, {"q99", cd.quantile(99)},
                                         {"top_correlation_percentile", percentile_of(cd, best)}};
            }
            write_text(out / "summary.json", summary.dump(2) + "\n");
            write_manifest(out, app, *ret, c, {query_path, corpus_dir, c.model}, summary);
            std::cout << summary.dump(2) << "\n";
        } else if (*cls) {
            std::vector<WorkingImage> targets, recons;
            for (const auto& p : cls_targets) {
                targets.push_back(io::read_working_image(p));
            }
            for (const auto& p : cls_recons) {
                recons.push_back(io::read_working_image(p, targets.front().side()));
            }
            const ClassifierResult r = correlation_classifier(recons, targets, cls_truth);
            const json summary = {{"accuracy", r.accuracy},  {"correct", r.correct},   {"evaluated", r.evaluated},
                                  {"chance", r.chance},      {"p_value", r.p_value},   {"assignment", r.assignment},
                                  {"excluded", r.excluded}};
            write_text(c.out, summary.dump(2) + "\n");
            std::vector<fs::path> inputs(cls_targets.begin(), cls_targets.end());
            inputs.insert(inputs.end(), cls_recons.begin(), cls_recons.end());
            write_manifest(c.out, app, *cls, c, inputs, summary);
            std::cout << summary.dump(2) << "\n";
        } else if (*det) {
            std::vector<DetectionTrial> trials;
            for (const auto& p : det_logs) {
                auto t = read_detection_log(fs::path(p));
                trials.insert(trials.end(), t.begin(), t.end());
            }
            const DetectionSummary s = analyze_detection(trials);
            auto opt = [](const auto& v) { return v ? json(*v) : json(nullptr); };
            auto counts = [](const GroupCounts& g) {
                return json{{"hits", g.hits}, {"misses", g.misses}, {"false_alarms", g.false_alarms},
                            {"correct_rejections", g.correct_rejections}};
            };
            const json summary = {{"trials", s.trials},
                                  {"most", counts(s.most)},
                                  {"least", counts(s.least)},
                                  {"dprime_most", opt(s.dprime_most)},
                                  {"dprime_least", opt(s.dprime_least)},
                                  {"rt_gap", opt(s.rt_gap)},
                                  {"threshold_ms", opt(s.threshold)}};
            write_text(c.out, summary.dump(2) + "\n");
            write_manifest(c.out, app, *det, c, std::vector<fs::path>(det_logs.begin(), det_logs.end()), summary);
            std::cout << summary.dump(2) << "\n";
        } else if (*gal) {
            io::GrayRaster g;
            std::vector<fs::path> inputs;
            if (!query_path.empty()) {
                require(!corpus_dir.empty(), ErrorCode::InvalidInput, "--query needs --corpus");
                const WorkingImage query = io::read_working_image(query_path);
                const Corpus db = load_corpus(corpus_dir, query.side());
                const RetrievalResult r = nearest_neighbors(query, db, ret_k);
                std::vector<WorkingImage> hits;
                for (const auto& h : r.hits) {
                    hits.push_back(db[h.index]);
                }
                g = gallery_strip(clipped(query), hits);
                inputs = {query_path, corpus_dir};
            } else {
                require(!gal_images.empty(), ErrorCode::InvalidInput, "give --query/--corpus or --images");
                std::vector<WorkingImage> images;
                for (const auto& p : gal_images) {
                    images.push_back(io::read_working_image(p, images.empty() ? 0 : images.front().side()));
                    inputs.emplace_back(p);
                }
                g = gallery_grid(images, gal_columns);
            }
            io::write_png(c.out, g);
            write_manifest(c.out, app, *gal, c, inputs, {{"width", g.width}, {"height", g.height}});
        }
    } catch (const Error& e) {
        std::cerr << "error: " << error_name(e.code()) << ": " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
