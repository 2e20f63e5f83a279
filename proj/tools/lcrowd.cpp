#include "lcrowd/behavior_map.hpp"
#include "lcrowd/classify.hpp"
#include "lcrowd/dataset_gen.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using namespace lcrowd;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitUsage = 2;

struct Options {
    std::string config;
    std::string out;
    int workers = 1;
    std::optional<std::uint64_t> seed;
    std::string table;
    bool no_frames = false;
    std::string input;
    std::size_t per_class = 100;
    double margin = 0.0;
    double dt = kDefaultDt;
};

void setup_logging() {
    auto logger = spdlog::stderr_color_mt("lcrowd");
    logger->set_pattern("[%l] %v");
    spdlog::set_default_logger(logger);
    spdlog::set_level(spdlog::level::info);
    if (const char* env = std::getenv("LCROWD_LOG")) {
        const auto level = spdlog::level::from_str(env);
        // from_str maps unknown names to off; only accept "off" when spelled out.
        if (level != spdlog::level::off || std::string_view(env) == "off") {
            spdlog::set_level(level);
        } else {
            spdlog::warn("LCROWD_LOG='{}' is not a log level; using info", env);
        }
    }
}

// Writes through a sibling temporary so that a failed run leaves no partial file.
void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
        out << text;
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    }
    fs::rename(tmp, path);
}

// Re-raises `e` with `context` prefixed to its message.
[[noreturn]] void rethrow_with(const Error& e, const std::string& context) {
    std::string msg = e.what();
    const std::string prefix = std::string(to_string(e.code())) + ": ";
    if (msg.starts_with(prefix)) msg.erase(0, prefix.size());
    throw Error(e.code(), context + ": " + msg);
}

std::ifstream open_input(const fs::path& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in || fs::is_directory(path)) throw Error(ErrorCode::IoError, std::string("cannot read ") + what + " " + path.string());
    return in;
}

ClassTable read_table(const fs::path& path) {
    std::ifstream in = open_input(path, "table file");
    try {
        return load_class_table(in);
    } catch (const Error& e) {
        rethrow_with(e, path.string());
    }
}

std::vector<TrajectoryRow> read_rows(const fs::path& path) {
    std::ifstream in = open_input(path, "trajectory file");
    try {
        return read_trajectory_csv(in);
    } catch (const Error& e) {
        rethrow_with(e, path.string());
    }
}

SweepSpec read_sweep(const Options& o) {
    SweepSpec sweep;
    try {
        sweep = load_sweep_config(o.config);
    } catch (const Error& e) {
        rethrow_with(e, o.config);
    }
    if (!o.out.empty()) sweep.output_root = o.out;
    if (o.seed) sweep.base_seed = *o.seed;
    if (o.no_frames) sweep.render_frames = false;
    return sweep;
}

// The video directory holding `trajectories`, when it also holds a scenario file.
std::optional<StoredScenario> sibling_scenario(const fs::path& trajectories) {
    const fs::path p = trajectories.parent_path() / "scenario.json";
    if (!fs::exists(p)) return std::nullopt;
    return load_scenario(p);
}

int cmd_generate(const Options& o) {
    const SweepSpec sweep = read_sweep(o);
    spdlog::info("generating {} scenarios into {}", sweep.size(), sweep.output_root.string());
    const auto records = run_sweep(sweep, o.workers, [&](const VideoRecord& r) {
        if (r.ok) {
            spdlog::info("[{}/{}] {} ok, {} frames, median {:.3f} ms/frame", r.index + 1, sweep.size(),
                         r.directory.generic_string(), r.frame_count, r.cost.median_ms);
        } else {
            spdlog::error("[{}/{}] failed: {}", r.index + 1, sweep.size(), r.error);
        }
    });
    std::size_t failed = 0;
    for (const auto& r : records) failed += r.ok ? 0 : 1;
    std::cout << manifest_path(sweep).string() << '\n';
    if (failed > 0) {
        spdlog::error("{} of {} scenarios failed", failed, records.size());
        return kExitPartial;
    }
    return kExitOk;
}

int cmd_simulate(const Options& o) {
    const SweepSpec sweep = read_sweep(o);
    if (sweep.size() != 1) {
        throw Error(ErrorCode::InvalidArgument,
                    "simulate needs one value per axis, the config expands to " + std::to_string(sweep.size()));
    }
    const SweepCell cell = expand_sweep(sweep).front();
    const VideoRecord r = generate_video(cell.scenario, sweep.output_root, "", sweep.render_frames);
    if (!r.ok) {
        spdlog::error("simulation failed: {}", r.error);
        return kExitPartial;
    }
    spdlog::info("{} frames, median {:.3f} ms/frame", r.frame_count, r.cost.median_ms);
    std::cout << sweep.output_root.string() << '\n';
    return kExitOk;
}

int cmd_annotate(const Options& o) {
    const fs::path dir = o.input;
    if (!fs::is_directory(dir)) throw Error(ErrorCode::IoError, "not a video directory: " + dir.string());
    const std::string text = reannotate(dir);
    if (o.out.empty()) {
        std::cout << text;
    } else {
        write_file(o.out, text);
    }
    const fs::path stored = dir / "annotations.json";
    if (fs::exists(stored)) {
        std::ifstream in(stored, std::ios::binary);
        std::ostringstream ss;
        ss << in.rdbuf();
        const bool same = ss.str() == text;
        spdlog::info("recomputed annotations {} the stored file", same ? "match" : "differ from");
        if (!same) return kExitPartial;
    }
    return kExitOk;
}

int cmd_classify(const Options& o) {
    const ClassTable table = read_table(o.table);
    const fs::path traj = o.input;
    const auto rows = read_rows(traj);
    if (rows.empty()) throw Error(ErrorCode::InsufficientData, traj.string() + ": no trajectory rows");
    std::optional<Environment> env;
    double dt = o.dt;
    if (const auto stored = sibling_scenario(traj)) {
        env = stored->env;
        dt = stored->spec.dt;
    }
    const FitResult fit = classify_video(make_observed_video(rows, dt, env), table, o.workers);
    if (!o.out.empty()) {
        std::ostringstream json;
        write_fit_json(json, fit);
        write_file(o.out, json.str());
    }
    std::cout << "predicted " << to_string(fit.predicted) << " distance " << fit.table_distance << '\n';
    return kExitOk;
}

int cmd_eval(const Options& o) {
    const ClassTable table = read_table(o.table);
    fs::path manifest = o.input;
    if (fs::is_directory(manifest)) manifest /= "manifest.json";
    std::ifstream in = open_input(manifest, "manifest");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, manifest.string() + ": " + e.what());
    }
    const fs::path root = manifest.parent_path();
    std::vector<LabeledVideo> videos;
    for (const auto& r : doc.at("records")) {
        if (r.at("status") != "ok") continue;
        const auto& files = r.at("files");
        const StoredScenario stored = load_scenario(root / files.at("scenario").get<std::string>());
        const auto rows = read_rows(root / files.at("trajectories").get<std::string>());
        videos.push_back({make_observed_video(rows, stored.spec.dt, stored.env), stored.spec.behavior_class});
    }
    if (videos.empty()) throw Error(ErrorCode::InsufficientData, manifest.string() + ": no successful records");
    spdlog::info("classifying {} videos", videos.size());
    const ConfusionMatrix m = evaluate(videos, table, o.workers);
    std::ostringstream json;
    write_confusion_json(json, m);
    if (o.out.empty()) {
        std::cout << json.str();
    } else {
        write_file(o.out, json.str());
    }
    for (BehaviorClass c : kBehaviorClasses) {
        const int row = m.counts.row(static_cast<int>(c)).sum();
        if (row > 0) spdlog::info("{:<10} accuracy {:.3f} over {} videos", to_string(c), m.accuracy(c), row);
    }
    spdlog::info("overall accuracy {:.3f}", m.overall_accuracy());
    return kExitOk;
}

int cmd_table(const Options& o) {
    Rng rng(o.seed.value_or(0));
    const ClassTable table = build_class_table(o.per_class, o.margin, rng);
    std::ostringstream out;
    save_class_table(out, table);
    write_file(o.out, out.str());
    spdlog::info("{} entries written to {}", table.size(), o.out);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    setup_logging();
    CLI::App app{"Procedural crowd simulation, labeled dataset generation and behavior classification"};
    app.require_subcommand(1);
    Options o;

    auto workers = [&](CLI::App* sub) {
        sub->add_option("--workers", o.workers, "Worker threads")->check(CLI::Range(1, 256));
    };
    auto seed = [&](CLI::App* sub, const char* help) { sub->add_option("--seed", o.seed, help); };

    auto* generate = app.add_subcommand("generate", "Run a parameter sweep and write a labeled dataset");
    generate->add_option("--config", o.config, "Sweep config (JSON)")->required();
    generate->add_option("--out", o.out, "Output root, overrides the config");
    workers(generate);
    seed(generate, "Base seed, overrides the config");
    generate->add_flag("--no-frames", o.no_frames, "Skip rendering frame images");

    auto* simulate = app.add_subcommand("simulate", "Simulate and label a single scenario");
    simulate->add_option("--config", o.config, "Config with one value per axis (JSON)")->required();
    simulate->add_option("--out", o.out, "Output directory, overrides the config");
    seed(simulate, "Base seed, overrides the config");
    simulate->add_flag("--no-frames", o.no_frames, "Skip rendering frame images");

    auto* annotate = app.add_subcommand("annotate", "Recompute annotations from a video's stored trajectories");
    annotate->add_option("video", o.input, "Generated video directory")->required();
    annotate->add_option("--out", o.out, "Annotation file to write (default: stdout)");

    auto* classify = app.add_subcommand("classify", "Classify the crowd behavior of a trajectory file");
    classify->add_option("trajectories", o.input, "Trajectory CSV")->required();
    classify->add_option("--table", o.table, "Class table (JSON)")->required();
    classify->add_option("--out", o.out, "Fit result file to write (JSON)");
    classify->add_option("--dt", o.dt, "Timestep when no scenario.json sits next to the trajectories")
        ->check(CLI::Range(1e-6, 0.5));
    workers(classify);

    auto* eval = app.add_subcommand("eval", "Classify every video of a dataset and tabulate a confusion matrix");
    eval->add_option("manifest", o.input, "Dataset root or manifest.json")->required();
    eval->add_option("--table", o.table, "Class table (JSON)")->required();
    eval->add_option("--out", o.out, "Confusion matrix file to write (default: stdout)");
    workers(eval);

    auto* table = app.add_subcommand("table", "Build a class table");
    table->add_option("--out", o.out, "Table file to write (JSON)")->required();
    table->add_option("--per-class", o.per_class, "Entries per class")->check(CLI::PositiveNumber);
    table->add_option("--margin", o.margin, "Minimum top-two gap of accepted entries")->check(CLI::Range(0.0, 10.0));
    seed(table, "Sampling seed");

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
        if (*generate) return cmd_generate(o);
        if (*simulate) return cmd_simulate(o);
        if (*annotate) return cmd_annotate(o);
        if (*classify) return cmd_classify(o);
        if (*eval) return cmd_eval(o);
        return cmd_table(o);
    } catch (const Error& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return kExitUsage;
    }
}
