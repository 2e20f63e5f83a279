// Acceptance suite: one pass/fail line per criterion. Run with criterion
// numbers as arguments to select a subset.

#include "lcrowd/behavior_map.hpp"
#include "lcrowd/classify.hpp"
#include "lcrowd/dataset_gen.hpp"
#include "lcrowd/labeling.hpp"
#include "lcrowd/parallel.hpp"
#include "lcrowd/sim_core.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace lcrowd;

namespace {

// Tolerances and sizes.
constexpr double kMatrixTol = 0.0;           // criterion 1: exact
constexpr double kClassAccuracyMin = 0.7;    // criterion 2: per listed class
constexpr double kOverallAccuracyMin = 0.6;  // criterion 2
constexpr int kVideosPerClass = 10;
constexpr double kRoundTripDensity = 0.02;
constexpr double kRoundTripMargin = 0.2;
constexpr double kAssertiveMargin = 0.1;     // assertive cannot reach 0.2
constexpr std::size_t kTablePerClass = 100;  // 600 entries
constexpr double kInverseTol = 1e-9;         // criterion 3
constexpr int kInverseSamples = 10'000;
constexpr double kPenetrationTol = 1e-3;     // criterion 4, meters
constexpr double kPenetrationRateMax = 0.01;
constexpr int kReannotateScenarios = 10;     // criterion 5
constexpr int kFlowPaths = 100;              // criterion 6
constexpr double kFrameBudgetMs = 10.0;      // criterion 7
constexpr int kSweepScenarios = 12;          // criterion 8

// Classes that spawn densely at the default margin.
constexpr std::array<BehaviorClass, 5> kSpawnableClasses{BehaviorClass::Shy, BehaviorClass::Aggressive,
                                                         BehaviorClass::Active, BehaviorClass::Tense,
                                                         BehaviorClass::Impulsive};

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

int hardware_workers() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lcrowd_acceptance_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<TrajectoryRow> simulate(World w, int frames, double dt) {
    std::vector<TrajectoryRow> rows;
    append_rows(w, rows);
    for (int f = 1; f < frames; ++f) {
        step(w, dt);
        append_rows(w, rows);
    }
    return rows;
}

// 1. The stored matrix equals the published constants; the fifth-column probe.
Outcome matrix_fidelity() {
    // clang-format off
    const double published[6][5] = {
        {-0.02,  0.32,  0.13, -0.41,  1.02},
        { 0.03,  0.22,  0.11, -0.28,  1.05},
        {-0.04, -0.08,  0.02,  0.58, -0.88},
        {-0.06,  0.04,  0.04, -0.16,  1.07},
        { 0.10,  0.07, -0.08,  0.19,  0.15},
        { 0.03, -0.15,  0.03, -0.23,  0.23}};
    // clang-format on
    const BehaviorMatrix& a = behavior_matrix();
    double worst = 0.0;
    for (int r = 0; r < 6; ++r) {
        for (int c = 0; c < 5; ++c) worst = std::max(worst, std::abs(a(r, c) - published[r][c]));
    }
    const BehaviorVector probe = params_to_behavior({15.0, 10.0, 30.0, 0.8, 1.9});
    BehaviorVector expected;
    expected << 1.02, 1.05, -0.88, 1.07, 0.15, 0.23;
    const double probe_err = (probe - expected).cwiseAbs().maxCoeff();
    return {worst <= kMatrixTol && probe_err <= kMatrixTol,
            fmt("max |A - published| = %.3g, probe error = %.3g", worst, probe_err)};
}

// 2. Generate labeled videos per class, classify them, tabulate.
Outcome round_trip() {
    Rng table_rng(2024);
    const ClassTable table = build_class_table(kTablePerClass, 0.0, table_rng);
    std::vector<LabeledVideo> videos(kBehaviorClassCount * kVideosPerClass);
    parallel_for(videos.size(), hardware_workers(), [&](std::size_t i) {
        const auto c = static_cast<BehaviorClass>(i / kVideosPerClass);
        ScenarioSpec spec;
        spec.behavior_class = c;
        spec.environment = "swap";
        spec.pedestrian_count = 20;
        spec.density = kRoundTripDensity;
        spec.duration = 300;
        spec.class_margin = c == BehaviorClass::Assertive ? kAssertiveMargin : kRoundTripMargin;
        spec.seed = mix64(0xacce97 + i);
        const Scene scene = instantiate(spec);
        videos[i] = {make_observed_video(simulate(scene.world, spec.duration, spec.dt), spec.dt, scene.world.env), c};
    });
    const ConfusionMatrix m = evaluate(videos, table, hardware_workers());
    bool pass = m.overall_accuracy() >= kOverallAccuracyMin;
    std::string detail;
    for (BehaviorClass c : kBehaviorClasses) {
        const bool listed = c == BehaviorClass::Aggressive || c == BehaviorClass::Shy || c == BehaviorClass::Tense ||
                            c == BehaviorClass::Impulsive;
        if (listed) pass = pass && m.accuracy(c) >= kClassAccuracyMin;
        detail += fmt("%s %.1f, ", std::string(to_string(c)).c_str(), m.accuracy(c));
    }
    detail += fmt("overall %.3f", m.overall_accuracy());
    return {pass, detail};
}

// 3. Inverse of the forward map over random in-range parameters.
Outcome inverse_precision() {
    Rng rng(31337);
    double worst = 0.0;
    for (int i = 0; i < kInverseSamples; ++i) {
        ParamVector x;
        for (int k = 0; k < 5; ++k) x[k] = rng.uniform(SimParams::kLower[k], SimParams::kUpper[k]);
        const SimParams p = SimParams::from_vector(x);
        const ParamVector back = behavior_to_params(params_to_behavior(p)).to_vector();
        worst = std::max(worst, (back - x).cwiseAbs().maxCoeff());
    }
    return {worst <= kInverseTol, fmt("max component error %.3g over %d samples", worst, kInverseSamples)};
}

// 4. Penetration events: (agent pair, step) combinations whose centers are
// closer than the radii sum minus the tolerance.
Outcome collision_safety() {
    SimParams p;
    p.radius = 0.3;
    auto agent = [&](int id, Vec2 pos, Vec2 goal) {
        AgentState a;
        a.id = id;
        a.position = pos;
        a.goal = goal;
        a.params = p;
        a.goal_policy = GoalPolicy::fixed(goal);
        a.rng = Rng(mix64(id + 1));
        return a;
    };
    auto penetrating = [&](const World& w) {
        std::size_t n = 0;
        for (std::size_t i = 0; i < w.agents.size(); ++i) {
            for (std::size_t j = i + 1; j < w.agents.size(); ++j) {
                const auto& a = w.agents[i];
                const auto& b = w.agents[j];
                n += (a.position - b.position).norm() < a.params.radius + b.params.radius - kPenetrationTol;
            }
        }
        return n;
    };

    Environment head_env;
    head_env.bounds = {Vec2(-12, -12), Vec2(12, 12)};
    World pair = make_world(head_env, {agent(0, Vec2(-10, 0), Vec2(10, 0)), agent(1, Vec2(10, 0), Vec2(-10, 0))});
    std::size_t pair_events = 0;
    for (int s = 0; s < 400; ++s) {
        step(pair, kDefaultDt);
        pair_events += penetrating(pair);
    }

    // 50 agents at 0.5 per square meter.
    const double half = std::sqrt(50 / 0.5) / 2.0;
    const Rect square{Vec2(-half, -half), Vec2(half, half)};
    Rng rng(77);
    std::vector<AgentState> agents;
    while (agents.size() < 50) {
        const Vec2 pos(rng.uniform(-half + p.radius, half - p.radius), rng.uniform(-half + p.radius, half - p.radius));
        bool free = true;
        for (const auto& a : agents) free = free && (a.position - pos).norm() > 2 * p.radius + 0.05;
        if (!free) continue;
        AgentState a = agent(static_cast<int>(agents.size()), pos, pos);
        a.goal_policy = GoalPolicy::sample_region(square);
        agents.push_back(a);
    }
    Environment env;
    env.bounds = square;
    World crowd = make_world(env, agents);
    const std::size_t pairs = crowd.agents.size() * (crowd.agents.size() - 1) / 2;
    std::size_t events = 0, pair_steps = 0;
    for (int s = 0; s < 1000; ++s) {
        step(crowd, kDefaultDt);
        events += penetrating(crowd);
        pair_steps += pairs;
    }
    const double rate = static_cast<double>(events) / static_cast<double>(pair_steps);
    return {pair_events == 0 && rate < kPenetrationRateMax,
            fmt("head-on events %zu; crowd rate %.5f (%zu of %zu pair-steps)", pair_events, rate, events, pair_steps)};
}

// 5. Stored annotations are reproduced from stored trajectories.
Outcome label_consistency() {
    const fs::path root = scratch("labels");
    int identical = 0, outside = 0, miscounted = 0, failed = 0;
    for (int i = 0; i < kReannotateScenarios; ++i) {
        ScenarioSpec spec;
        spec.environment = environment_names()[static_cast<std::size_t>(i) % environment_names().size()];
        spec.camera.preset = camera_presets()[static_cast<std::size_t>(i) % camera_presets().size()];
        spec.behavior_class = kSpawnableClasses[static_cast<std::size_t>(i) % kSpawnableClasses.size()];
        spec.pedestrian_count = 15 + i;
        spec.density = 0.05;
        spec.duration = 80;
        spec.seed = 900 + static_cast<std::uint64_t>(i);
        const VideoRecord rec = generate_video(spec, root, fmt("v%02d", i), false);
        if (!rec.ok) {
            ++failed;
            continue;
        }
        identical += reannotate(root / rec.directory) == slurp(root / rec.annotations);
        std::ifstream in(root / rec.annotations);
        for (const auto& f : read_annotations_json(in)) {
            int visible = 0;
            for (std::size_t k = 0; k < f.head_points.size(); ++k) {
                if (!f.head_points[k].visible) continue;
                ++visible;
                outside += !(f.boxes[k].visible && f.boxes[k].contains(f.head_points[k].u, f.head_points[k].v));
            }
            miscounted += visible != f.pedestrian_count;
        }
    }
    fs::remove_all(root);
    return {failed == 0 && identical == kReannotateScenarios && outside == 0 && miscounted == 0,
            fmt("%d/%d byte-identical, %d heads outside boxes, %d miscounted frames, %d failed", identical,
                kReannotateScenarios, outside, miscounted, failed)};
}

// Independent count for a vertical line at x = 0 with a tolerance zone of
// half-width hw: order the outward crossings of the zone borders along the
// path and count side changes.
std::pair<int, int> oracle_flow(const std::vector<Vec2>& path, double hw) {
    int side = path.front().x() > 0 ? 1 : -1;
    int in = 0, out = 0;
    for (std::size_t i = 1; i < path.size(); ++i) {
        const Vec2 a = path[i - 1], b = path[i];
        const double dx = b.x() - a.x();
        if (dx == 0.0) continue;
        std::vector<std::pair<double, int>> events;
        for (int s : {-1, 1}) {
            const double t = (s * hw - a.x()) / dx;
            if (t >= 0.0 && t <= 1.0 && s * dx > 0) events.emplace_back(t, s);
        }
        std::sort(events.begin(), events.end());
        for (auto [t, s] : events) {
            if (s != side) {
                (s > 0 ? in : out) += 1;
                side = s;
            }
        }
    }
    return {in, out};
}

// 6. Tolerance-zone counts on random piecewise-linear paths.
Outcome flow_oracle() {
    Rng rng(4242);
    int agree = 0;
    for (int t = 0; t < kFlowPaths; ++t) {
        FlowLine line;
        line.a = Vec2(0, -100);
        line.b = Vec2(0, 100);
        line.tolerance_halfwidth = rng.uniform(0.2, 1.0);
        const double hw = line.tolerance_halfwidth;
        std::vector<Vec2> path;
        path.emplace_back(rng.uniform() < 0.5 ? rng.uniform(-6, -hw - 0.01) : rng.uniform(hw + 0.01, 6),
                          rng.uniform(-30, 30));
        const auto n = rng.uniform_int(2, 50);
        for (std::int64_t k = 0; k < n; ++k) path.emplace_back(rng.uniform(-5, 5), rng.uniform(-30, 30));
        for (std::size_t k = 1; k < path.size(); ++k) update_flow(line, 7, path[k - 1], path[k]);
        // The positive side, to the right of a->b, is +x.
        const auto [in, out] = oracle_flow(path, hw);
        agree += line.in_count == in && line.out_count == out;
    }
    return {agree == kFlowPaths, fmt("%d/%d paths agree", agree, kFlowPaths)};
}

// 7. Median simulate+annotate cost of a 100-agent frame.
Outcome frame_cost() {
    ScenarioSpec spec;
    spec.pedestrian_count = 100;
    spec.behavior_class = BehaviorClass::Impulsive;
    spec.density = 0.2;
    spec.environment = "plaza";
    spec.duration = 1001;
    spec.seed = 7;
    const fs::path root = scratch("cost");
    const VideoRecord rec = generate_video(spec, root, "v", false);
    fs::remove_all(root);
    if (!rec.ok) return {false, rec.error};
    return {rec.cost.median_ms <= kFrameBudgetMs,
            fmt("median %.3f ms, mean %.3f ms, max %.3f ms over %zu frames", rec.cost.median_ms, rec.cost.mean_ms,
                rec.cost.max_ms, rec.cost.frames)};
}

// 8. Identical sweeps agree byte for byte, serial or parallel.
Outcome determinism() {
    auto sweep_into = [](const fs::path& root) {
        SweepSpec s;
        s.behavior_class = {BehaviorClass::Shy, BehaviorClass::Aggressive, BehaviorClass::Active};
        s.environment = {"crossing", "corridor"};
        s.density = {0.05, 0.1};
        s.pedestrian_count = {12};
        s.duration = 60;
        s.render_frames = true;
        s.base_seed = 8;
        s.output_root = root;
        return s;
    };
    auto label_tree = [](const fs::path& root) {
        std::map<std::string, std::string> files;
        for (const auto& e : fs::recursive_directory_iterator(root)) {
            if (!e.is_regular_file() || e.path().filename() == "cost.json") continue;
            files[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
        }
        return files;
    };
    const fs::path a = scratch("sweep_a"), b = scratch("sweep_b"), c = scratch("sweep_c");
    const auto ra = run_sweep(sweep_into(a), 1);
    run_sweep(sweep_into(b), 1);
    run_sweep(sweep_into(c), hardware_workers() > 1 ? hardware_workers() : 3);
    const auto ta = label_tree(a), tb = label_tree(b), tc = label_tree(c);
    int ok = 0;
    for (const auto& r : ra) ok += r.ok;
    fs::remove_all(a);
    fs::remove_all(b);
    fs::remove_all(c);
    const bool pass = static_cast<int>(ra.size()) == kSweepScenarios && ok == kSweepScenarios && ta == tb && ta == tc;
    return {pass, fmt("%d/%d scenarios ok, %zu files; repeat %s, parallel %s", ok, kSweepScenarios, ta.size(),
                      ta == tb ? "identical" : "DIFFERS", ta == tc ? "identical" : "DIFFERS")};
}

struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
    const std::vector<Criterion> criteria{
        {1, "matrix fidelity", matrix_fidelity},
        {2, "round-trip classification", round_trip},
        {3, "inverse-map precision", inverse_precision},
        {4, "collision safety", collision_safety},
        {5, "label consistency", label_consistency},
        {6, "flow-count oracle", flow_oracle},
        {7, "per-frame cost", frame_cost},
        {8, "determinism", determinism},
    };
    std::set<int> selected;
    for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

    int failures = 0;
    for (const auto& c : criteria) {
        if (!selected.empty() && !selected.count(c.id)) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("[%s] %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str(), secs);
        std::fflush(stdout);
        failures += !o.pass;
    }
    return failures == 0 ? 0 : 1;
}
