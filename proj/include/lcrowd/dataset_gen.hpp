#pragma once

// Scenario instantiation, labeled video generation and parameter sweeps over
// the seven label axes.

#include "lcrowd/behavior_map.hpp"
#include "lcrowd/common.hpp"
#include "lcrowd/labeling.hpp"
#include "lcrowd/render_lite.hpp"
#include "lcrowd/sim_core.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lcrowd {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr double kDefaultClassMargin = 0.1;
inline constexpr std::size_t kSpawnAttempts = 10'000;
inline constexpr std::size_t kAxisCount = 7;

std::string_view to_string(BackgroundStyle b);
std::optional<BackgroundStyle> parse_background(std::string_view name);

/// Named camera placement relative to the environment ("overhead", "oblique",
/// "street"), or an explicit model when the preset is empty.
struct CameraChoice {
    std::string preset = "oblique";
    CameraModel camera;

    friend bool operator==(const CameraChoice& a, const CameraChoice& b);
};

const std::vector<std::string>& camera_presets();
CameraModel resolve_camera(const CameraChoice& choice, const Rect& bounds);

struct ScenarioSpec {
    // Label axes.
    BackgroundStyle background = BackgroundStyle::Flat;
    BehaviorClass behavior_class = BehaviorClass::Shy;
    CameraChoice camera;
    double density = 0.1;  // agents per m^2 inside the spawn region
    std::string environment = "open";
    double light = 0.5;  // base luminance
    int pedestrian_count = 20;
    // Run settings.
    int duration = 100;  // frames, including the initial one
    double dt = kDefaultDt;
    std::uint64_t seed = 0;
    double class_margin = kDefaultClassMargin;
    double noise_std = 2.0;

    /// Throws InvalidArgument.
    void validate() const;
};

struct SweepSpec {
    std::vector<BackgroundStyle> background{BackgroundStyle::Flat};
    std::vector<BehaviorClass> behavior_class{BehaviorClass::Shy};
    std::vector<CameraChoice> camera{CameraChoice{}};
    std::vector<double> density{0.1};
    std::vector<std::string> environment{"open"};
    std::vector<double> light{0.5};
    std::vector<int> pedestrian_count{20};
    int duration = 100;
    double dt = kDefaultDt;
    double class_margin = kDefaultClassMargin;
    double noise_std = 2.0;
    bool render_frames = true;
    std::uint64_t base_seed = 0;
    std::filesystem::path output_root = "dataset";

    /// Throws InvalidArgument naming the offending axis.
    void validate() const;
    std::size_t size() const;
};

using AxisIndex = std::array<std::size_t, kAxisCount>;

/// Seed of one sweep cell: the base seed folded with each axis index through
/// the SplitMix64 finalizer, axis by axis in label-axis order.
std::uint64_t scenario_seed(std::uint64_t base_seed, const AxisIndex& axis_index);

struct SweepCell {
    AxisIndex axis_index{};
    ScenarioSpec scenario;
};

/// Cartesian product in label-axis order, the last axis varying fastest.
std::vector<SweepCell> expand_sweep(const SweepSpec& sweep);

/// Geometry, spawn region, goal assignment and counting lines of a named environment.
struct EnvironmentLayout {
    Environment env;
    Rect spawn_region;
    std::vector<FlowLine> flow_lines;
    /// Goal of agent `index` given every agent's spawn point.
    std::function<GoalPolicy(std::size_t index, std::span<const Vec2> spawns)> goal_policy;
};

const std::vector<std::string>& environment_names();
/// `spawn_side` is the side of the square spawn region. Throws InvalidArgument on unknown names.
EnvironmentLayout make_layout(std::string_view name, double spawn_side);

struct Scene {
    World world;
    CameraModel camera;
    std::vector<FlowLine> flow_lines;
    Rect spawn_region;
};

/// Spawns the agents without overlap and with class-conditioned parameters.
/// Throws SpawnFailure, SamplingExhausted or InvalidArgument.
Scene instantiate(const ScenarioSpec& spec);

struct CostStats {
    std::size_t frames = 0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double max_ms = 0.0;
};

CostStats summarize_costs(std::vector<double> costs_ms);

struct VideoRecord {
    std::size_t index = 0;
    AxisIndex axis_index{};
    ScenarioSpec scenario;
    bool ok = false;
    std::string error;
    // Relative to the sweep output root; empty when generation failed.
    std::filesystem::path directory;
    std::filesystem::path scenario_file;
    std::filesystem::path trajectories;
    std::filesystem::path annotations;
    std::filesystem::path boxes;
    std::filesystem::path frames;
    std::filesystem::path cost_file;
    std::int64_t frame_count = 0;
    CostStats cost;  // simulation + annotation per frame
};

/// Simulates, labels and optionally renders one scenario into root/rel_dir.
/// Errors are reported in the record; a failed scenario leaves no files behind.
VideoRecord generate_video(const ScenarioSpec& spec, const std::filesystem::path& root,
                           const std::filesystem::path& rel_dir, bool render_frames);

using ProgressFn = std::function<void(const VideoRecord&)>;

/// Generates every sweep cell on `workers` threads and writes the manifest last.
std::vector<VideoRecord> run_sweep(const SweepSpec& sweep, int workers, const ProgressFn& progress = {});

std::filesystem::path manifest_path(const SweepSpec& sweep);
void write_manifest(std::ostream& out, const SweepSpec& sweep, std::span<const VideoRecord> records);

/// Throws ParseError / InvalidArgument.
SweepSpec parse_sweep_config(std::istream& in);
SweepSpec load_sweep_config(const std::filesystem::path& path);
std::string sweep_to_json(const SweepSpec& sweep);

/// Everything scenario.json stores about a generated video.
struct StoredScenario {
    ScenarioSpec spec;
    CameraModel camera;
    Environment env;
    std::vector<FlowLine> flow_lines;
    std::vector<int> agent_ids;
    std::vector<SimParams> agent_params;
};

StoredScenario load_scenario(const std::filesystem::path& path);

/// Annotations recomputed from stored trajectories, serialized exactly as
/// generation serializes them.
std::string reannotate(const StoredScenario& scenario, std::span<const TrajectoryRow> rows);
std::string reannotate(const std::filesystem::path& video_dir);

}  // namespace lcrowd
