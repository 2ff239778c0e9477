// Operator command line: serve, ingest-dir, add-annotator, rerank, export, stats, eval,
// emit-training-config. Exit codes: 0 success, 1 usage, 2 data error.

#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "affectloop/error.hpp"
#include "affectloop/evaluation.hpp"
#include "affectloop/external_scorer.hpp"
#include "affectloop/pipeline.hpp"
#include "affectloop/service.hpp"
#include "affectloop/training_config.hpp"

namespace fs = std::filesystem;
using namespace affectloop;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct CommonOptions {
    std::string data_dir;
    std::size_t required_labels = QueueConfig{}.required_labels;
    std::size_t batch_size = QueueConfig{}.batch_size;
    double qc_min_brightness = QcConfig{}.min_mean_brightness;
    double qc_max_brightness = QcConfig{}.max_mean_brightness;
    double qc_min_laplacian = QcConfig{}.min_laplacian_variance;

    PipelineConfig pipeline_config() const {
        PipelineConfig c;
        c.queue.required_labels = required_labels;
        c.queue.batch_size = batch_size;
        c.qc.min_mean_brightness = qc_min_brightness;
        c.qc.max_mean_brightness = qc_max_brightness;
        c.qc.min_laplacian_variance = qc_min_laplacian;
        return c;
    }
};

void add_common(CLI::App& cmd, CommonOptions& o) {
    cmd.add_option("--data-dir", o.data_dir, "Data directory")->required()->envname("AFFECTLOOP_DATA_DIR");
    cmd.add_option("--required-labels", o.required_labels, "Labels collected per frame before consensus")
        ->envname("AFFECTLOOP_REQUIRED_LABELS")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--batch-size", o.batch_size, "Default annotation batch size")
        ->envname("AFFECTLOOP_BATCH_SIZE")
        ->check(CLI::PositiveNumber);
    cmd.add_option("--qc-min-brightness", o.qc_min_brightness)->envname("AFFECTLOOP_QC_MIN_BRIGHTNESS");
    cmd.add_option("--qc-max-brightness", o.qc_max_brightness)->envname("AFFECTLOOP_QC_MAX_BRIGHTNESS");
    cmd.add_option("--qc-min-laplacian-var", o.qc_min_laplacian)->envname("AFFECTLOOP_QC_MIN_LAPLACIAN_VAR");
}

std::shared_ptr<Scorer> make_external_scorer(const std::string& mode, std::chrono::milliseconds timeout) {
    if (mode.rfind("http://", 0) == 0) {
        return std::make_shared<HttpScorer>(mode, timeout);
    }
    if (mode.rfind("cmd:", 0) == 0) {
        std::istringstream words(mode.substr(4));
        std::vector<std::string> argv{std::istream_iterator<std::string>(words), std::istream_iterator<std::string>()};
        return std::make_shared<ChildProcessScorer>(std::move(argv), timeout);
    }
    throw Error(ErrorCode::invalid_argument, "scorer must be 'baseline', an http:// URL or 'cmd:<command>'");
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

nlohmann::json read_json_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::io, "cannot read " + path.string());
    const auto j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded()) throw Error(ErrorCode::invalid_argument, path.string() + " is not valid JSON");
    return j;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
    out << text;
}

std::optional<std::int64_t> frame_index_from_name(const fs::path& file) {
    const std::string ext = file.extension().string();
    if (ext != ".png" && ext != ".jpg" && ext != ".jpeg" && ext != ".PNG" && ext != ".JPG") return std::nullopt;
    const std::string stem = file.stem().string();
    if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        return std::nullopt;
    }
    return std::stoll(stem);
}

int cmd_serve(const CommonOptions& common, const std::string& listen, const std::string& scorer_mode,
              int scorer_timeout_ms, const std::string& admin_token, const std::string& ui_dir) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) throw Error(ErrorCode::invalid_argument, "--listen must be host:port");
    ServiceConfig sc;
    sc.host = listen.substr(0, colon);
    sc.port = std::stoi(listen.substr(colon + 1));
    sc.admin_token = admin_token;
    sc.static_dir = ui_dir;

    // Block termination signals before any thread exists so only the waiter sees them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    auto store = Store::open(common.data_dir, /*create=*/false);
    Pipeline pipeline(*store, common.pipeline_config());
    if (scorer_mode != "baseline") {
        pipeline.install_scorer(make_external_scorer(scorer_mode, std::chrono::milliseconds(scorer_timeout_ms)));
    }
    Service service(pipeline, sc);
    const int port = service.bind();
    std::cout << "listening on " << sc.host << ":" << port << std::endl;

    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        service.stop();
    });
    service.run();
    // run() also returns when the server fails; wake the waiter in that case.
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return 0;
}

int cmd_ingest_dir(const CommonOptions& common, const std::string& input) {
    const fs::path root(input);
    if (!fs::is_directory(root)) throw Error(ErrorCode::io, "input is not a directory: " + input);
    auto store = Store::open(common.data_dir, /*create=*/true);
    Pipeline pipeline(*store, common.pipeline_config());

    std::vector<fs::path> session_dirs;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory()) session_dirs.push_back(entry.path());
    }
    std::sort(session_dirs.begin(), session_dirs.end());

    std::size_t sessions = 0, refused = 0, frames = 0;
    std::map<QcStatus, std::size_t> by_status;
    for (const auto& dir : session_dirs) {
        const std::string dir_name = dir.filename().string();
        auto meta = read_json_file(dir / "session.json");
        if (!meta.contains("session_id")) meta["session_id"] = dir_name;
        if (meta["session_id"] != dir_name) {
            throw Error(ErrorCode::invalid_argument, "session.json id does not match directory " + dir_name);
        }
        try {
            pipeline.register_session(session_from_json(meta));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::consent_refused) throw;
            ++refused;
            continue;
        }
        ++sessions;

        std::vector<std::pair<std::int64_t, fs::path>> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (!entry.is_regular_file()) continue;
            if (const auto index = frame_index_from_name(entry.path())) files.emplace_back(*index, entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& [index, file] : files) {
            const Frame f = pipeline.ingest_frame(dir_name, index, read_bytes(file));
            ++frames;
            ++by_status[f.qc_status];
        }
    }
    std::cout << "sessions registered " << sessions << "\n"
              << "sessions refused (consent) " << refused << "\n"
              << "frames ingested " << frames << "\n";
    for (const auto& [status, n] : by_status) std::cout << "  " << to_string(status) << " " << n << "\n";
    return 0;
}

int cmd_add_annotator(const std::string& data_dir, const std::string& id, const std::string& name,
                      const std::string& token) {
    auto store = Store::open(data_dir, /*create=*/true);
    store->put_annotator({id, name.empty() ? id : name, token, now_utc()});
    std::cout << "annotator " << id << " added\n";
    return 0;
}

int cmd_rerank(const CommonOptions& common, bool retrain, const std::string& scorer_mode, int timeout_ms) {
    auto store = Store::open(common.data_dir, /*create=*/false);
    Pipeline pipeline(*store, common.pipeline_config());
    std::int64_t version = pipeline.scorers().current_version();
    if (retrain) {
        version = pipeline.retrain_baseline(pipeline.export_manifest({}, 1.0, 0).rows);
    } else if (scorer_mode != "baseline") {
        version = pipeline.install_scorer(make_external_scorer(scorer_mode, std::chrono::milliseconds(timeout_ms)));
    }
    const std::size_t n = pipeline.rerank(version);
    std::cout << "scorer version " << version << ", rescored " << n << " queued frames\n";
    return 0;
}

template <typename T, typename Parse>
std::optional<std::set<T>> parse_set(const std::vector<std::string>& names, Parse parse, const char* what) {
    if (names.empty()) return std::nullopt;
    std::set<T> out;
    for (const auto& n : names) {
        const auto v = parse(n);
        if (!v) throw Error(ErrorCode::invalid_argument, std::string("unknown ") + what + " '" + n + "'");
        out.insert(*v);
    }
    return out;
}

int cmd_export(const std::string& data_dir, const std::string& out, double split, std::uint64_t seed,
               const std::string& copy_images, const std::vector<std::string>& classes,
               const std::vector<std::string>& sources) {
    auto store = Store::open(data_dir, /*create=*/false);
    ExportFilter filter;
    filter.classes = parse_set<EmotionClass>(classes, parse_emotion, "class");
    filter.sources = parse_set<DecisionBranch>(sources, parse_branch, "label source");
    const auto result = build_manifest(*store, filter, split, seed);
    write_manifest(out, result.rows);
    if (!copy_images.empty()) export_class_directories(*store, result.rows, copy_images);
    std::cout << to_json(result.summary).dump(2) << "\n";
    return 0;
}

int cmd_stats(const CommonOptions& common, bool as_json) {
    auto store = Store::open(common.data_dir, /*create=*/false);
    Pipeline pipeline(*store, common.pipeline_config());
    const auto f = pipeline.funnel();
    std::cout << (as_json ? to_json(f).dump(2) + "\n" : render_funnel(f));
    return 0;
}

int cmd_eval(const std::string& predictions, const std::string& truth, const std::string& agreement,
             const std::string& out, bool quiet) {
    const auto records = read_predictions(predictions);
    std::optional<std::map<std::string, EmotionClass>> truth_map;
    std::optional<std::map<std::string, double>> agreement_map;
    if (!truth.empty()) truth_map = read_truth(truth);
    if (!agreement.empty()) agreement_map = read_agreement(agreement);
    const auto outcome = evaluate_predictions(records, truth_map, agreement_map);
    if (!out.empty()) write_text(out, to_json(outcome).dump(2) + "\n");
    if (!quiet) {
        std::cout << "samples " << outcome.samples << "\n" << render_table(outcome.report);
        if (outcome.difficulty) std::cout << render_table(*outcome.difficulty);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"affectloop: active-learning frame annotation pipeline"};
    app.require_subcommand(1);

    CommonOptions common;
    std::string listen = "127.0.0.1:8080";
    std::string scorer_mode = "baseline";
    int scorer_timeout_ms = 10000;
    std::string admin_token;
    std::string ui_dir;
    auto* serve = app.add_subcommand("serve", "Run the HTTP annotation service");
    add_common(*serve, common);
    serve->add_option("--listen", listen, "host:port")->envname("AFFECTLOOP_LISTEN");
    serve->add_option("--scorer", scorer_mode, "baseline | http://host:port/path | cmd:<command>")->envname("AFFECTLOOP_SCORER");
    serve->add_option("--scorer-timeout-ms", scorer_timeout_ms)->envname("AFFECTLOOP_SCORER_TIMEOUT_MS");
    serve->add_option("--admin-token", admin_token)->envname("AFFECTLOOP_ADMIN_TOKEN");
    serve->add_option("--ui-dir", ui_dir, "Static files served at /")->envname("AFFECTLOOP_UI_DIR");

    std::string input;
    auto* ingest = app.add_subcommand("ingest-dir", "Ingest <session_id>/<index>.png trees with session.json files");
    add_common(*ingest, common);
    ingest->add_option("--input", input)->required();

    std::string annotator_id, annotator_name, annotator_token;
    auto* add_annotator = app.add_subcommand("add-annotator", "Register an annotator and bearer token");
    add_annotator->add_option("--data-dir", common.data_dir)->required()->envname("AFFECTLOOP_DATA_DIR");
    add_annotator->add_option("--id", annotator_id)->required();
    add_annotator->add_option("--name", annotator_name);
    add_annotator->add_option("--token", annotator_token)->required();

    bool retrain = false;
    auto* rerank = app.add_subcommand("rerank", "Rescore queued frames");
    add_common(*rerank, common);
    rerank->add_flag("--retrain", retrain, "Retrain the baseline scorer on all exportable frames first");
    rerank->add_option("--scorer", scorer_mode, "baseline | http://host:port/path | cmd:<command>");
    rerank->add_option("--scorer-timeout-ms", scorer_timeout_ms);

    std::string out;
    double split = 0.8;
    std::uint64_t seed = 0;
    std::string copy_images;
    std::vector<std::string> classes, sources;
    auto* exp = app.add_subcommand("export", "Write the training manifest (JSON Lines)");
    exp->add_option("--data-dir", common.data_dir)->required()->envname("AFFECTLOOP_DATA_DIR");
    exp->add_option("--out", out, "Manifest path")->required();
    exp->add_option("--split", split, "Train fraction")->check(CLI::Range(0.0, 1.0));
    exp->add_option("--seed", seed);
    exp->add_option("--copy-images", copy_images, "Also write <dir>/<class>/<frame_id>.png");
    exp->add_option("--classes", classes)->delimiter(',');
    exp->add_option("--sources", sources, "unanimous,automatic_fallback")->delimiter(',');

    bool as_json = false;
    auto* stats = app.add_subcommand("stats", "Print the frame funnel");
    add_common(*stats, common);
    stats->add_flag("--json", as_json);

    std::string predictions, truth, agreement;
    bool quiet = false;
    auto* eval = app.add_subcommand("eval", "Evaluate a prediction file");
    eval->add_option("--predictions", predictions)->required();
    eval->add_option("--truth", truth, "JSON Lines {id, true_label}");
    eval->add_option("--agreement", agreement, "JSON Lines {id, agreement_pct}");
    eval->add_option("--out", out, "Report JSON path");
    eval->add_flag("--quiet", quiet);

    std::string config_out;
    auto* emit = app.add_subcommand("emit-training-config", "Write the trainer hyperparameter file");
    emit->add_option("output", config_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (*serve) return cmd_serve(common, listen, scorer_mode, scorer_timeout_ms, admin_token, ui_dir);
        if (*ingest) return cmd_ingest_dir(common, input);
        if (*add_annotator) return cmd_add_annotator(common.data_dir, annotator_id, annotator_name, annotator_token);
        if (*rerank) return cmd_rerank(common, retrain, scorer_mode, scorer_timeout_ms);
        if (*exp) return cmd_export(common.data_dir, out, split, seed, copy_images, classes, sources);
        if (*stats) return cmd_stats(common, as_json);
        if (*eval) return cmd_eval(predictions, truth, agreement, out, quiet);
        if (*emit) {
            write_training_config(config_out);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}
