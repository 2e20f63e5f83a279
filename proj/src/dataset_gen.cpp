#include "lcrowd/dataset_gen.hpp"

#include "lcrowd/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>

namespace lcrowd {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 3> kBackgroundNames{"flat", "grid", "checker"};
constexpr double kLayoutMargin = 3.0;
constexpr double kMinSpawnSide = 4.0;

}  // namespace

std::string_view to_string(BackgroundStyle b) { return kBackgroundNames[static_cast<std::size_t>(b)]; }

std::optional<BackgroundStyle> parse_background(std::string_view name) {
    for (std::size_t i = 0; i < kBackgroundNames.size(); ++i) {
        if (kBackgroundNames[i] == name) return static_cast<BackgroundStyle>(i);
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// Cameras

bool operator==(const CameraChoice& a, const CameraChoice& b) {
    if (a.preset != b.preset) return false;
    if (!a.preset.empty()) return true;
    const CameraModel &x = a.camera, &y = b.camera;
    return x.position == y.position && x.yaw == y.yaw && x.pitch == y.pitch && x.focal_px == y.focal_px &&
           x.image_width == y.image_width && x.image_height == y.image_height && x.projection == y.projection &&
           x.ortho_scale == y.ortho_scale;
}

const std::vector<std::string>& camera_presets() {
    static const std::vector<std::string> names{"overhead", "oblique", "street"};
    return names;
}

CameraModel resolve_camera(const CameraChoice& choice, const Rect& bounds) {
    if (choice.preset.empty()) {
        choice.camera.validate();
        return choice.camera;
    }
    CameraModel cam;
    cam.yaw = std::numbers::pi / 2;
    const Vec2 c = bounds.center();
    const double hx = bounds.width() / 2, hy = bounds.height() / 2;
    const double half_w = cam.image_width / 2.0, half_h = cam.image_height / 2.0;
    double distance = 0.0;
    if (choice.preset == "overhead") {
        cam.projection = Projection::Orthographic;
        cam.pitch = -1.45;
        cam.ortho_scale = 0.9 * std::min(half_w / hx, half_h / hy);
        distance = 50.0;
    } else if (choice.preset == "oblique" || choice.preset == "street") {
        cam.pitch = choice.preset == "oblique" ? -0.6 : -0.2;
        // Far enough that the bounds' half-width fits in ~80% of the half-image.
        distance = std::max(cam.focal_px * hx / (0.8 * half_w), cam.focal_px * hy * std::sin(-cam.pitch) / (0.8 * half_h)) + hy;
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown camera preset '" + choice.preset + "'");
    }
    cam.position = Vec3(c.x(), c.y(), 0.0) - distance * cam.forward();
    return cam;
}

// ---------------------------------------------------------------------------
// Specs

void ScenarioSpec::validate() const {
    if (pedestrian_count < 0) throw Error(ErrorCode::InvalidArgument, "pedestrian_count must be >= 0");
    if (!(density > 0.0) || !std::isfinite(density)) throw Error(ErrorCode::InvalidArgument, "density must be > 0");
    if (!(light >= 0.0 && light <= 1.0)) throw Error(ErrorCode::InvalidArgument, "light must lie in [0, 1]");
    if (duration < 1) throw Error(ErrorCode::InvalidArgument, "duration must be >= 1 frame");
    if (!(dt > 0.0 && dt <= 0.5)) throw Error(ErrorCode::InvalidArgument, "dt must lie in (0, 0.5]");
    if (!(class_margin >= 0.0)) throw Error(ErrorCode::InvalidArgument, "class_margin must be >= 0");
    if (!(noise_std >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_std must be >= 0");
    if (std::find(environment_names().begin(), environment_names().end(), environment) == environment_names().end()) {
        throw Error(ErrorCode::InvalidArgument, "unknown environment '" + environment + "'");
    }
    if (!camera.preset.empty() &&
        std::find(camera_presets().begin(), camera_presets().end(), camera.preset) == camera_presets().end()) {
        throw Error(ErrorCode::InvalidArgument, "unknown camera preset '" + camera.preset + "'");
    }
    if (camera.preset.empty()) camera.camera.validate();
}

void SweepSpec::validate() const {
    auto non_empty = [](std::size_t n, const char* axis) {
        if (n == 0) throw Error(ErrorCode::InvalidArgument, std::string("axis '") + axis + "' is empty");
    };
    non_empty(background.size(), "background");
    non_empty(behavior_class.size(), "behavior_class");
    non_empty(camera.size(), "camera");
    non_empty(density.size(), "density");
    non_empty(environment.size(), "environment");
    non_empty(light.size(), "light");
    non_empty(pedestrian_count.size(), "pedestrian_count");
    for (const auto& cell : expand_sweep(*this)) cell.scenario.validate();
}

std::size_t SweepSpec::size() const {
    return background.size() * behavior_class.size() * camera.size() * density.size() * environment.size() *
           light.size() * pedestrian_count.size();
}

std::uint64_t scenario_seed(std::uint64_t base_seed, const AxisIndex& axis_index) {
    std::uint64_t s = mix64(base_seed);
    for (std::size_t k = 0; k < kAxisCount; ++k) {
        s = mix64(s ^ (static_cast<std::uint64_t>(k) << 56) ^ static_cast<std::uint64_t>(axis_index[k]));
    }
    return s;
}

std::vector<SweepCell> expand_sweep(const SweepSpec& sweep) {
    const std::array<std::size_t, kAxisCount> sizes{
        sweep.background.size(), sweep.behavior_class.size(), sweep.camera.size(),          sweep.density.size(),
        sweep.environment.size(), sweep.light.size(),         sweep.pedestrian_count.size()};
    std::vector<SweepCell> cells;
    if (std::find(sizes.begin(), sizes.end(), 0u) != sizes.end()) return cells;
    AxisIndex idx{};
    while (true) {
        SweepCell cell;
        cell.axis_index = idx;
        ScenarioSpec& s = cell.scenario;
        s.background = sweep.background[idx[0]];
        s.behavior_class = sweep.behavior_class[idx[1]];
        s.camera = sweep.camera[idx[2]];
        s.density = sweep.density[idx[3]];
        s.environment = sweep.environment[idx[4]];
        s.light = sweep.light[idx[5]];
        s.pedestrian_count = sweep.pedestrian_count[idx[6]];
        s.duration = sweep.duration;
        s.dt = sweep.dt;
        s.class_margin = sweep.class_margin;
        s.noise_std = sweep.noise_std;
        s.seed = scenario_seed(sweep.base_seed, idx);
        cells.push_back(std::move(cell));

        std::size_t k = kAxisCount;
        while (k > 0) {
            --k;
            if (++idx[k] < sizes[k]) break;
            idx[k] = 0;
            if (k == 0) return cells;
        }
    }
}

// ---------------------------------------------------------------------------
// Environment layouts

const std::vector<std::string>& environment_names() {
    static const std::vector<std::string> names{"open", "crossing", "swap", "plaza", "corridor"};
    return names;
}

EnvironmentLayout make_layout(std::string_view name, double spawn_side) {
    const double h = spawn_side / 2;
    const double m = kLayoutMargin;
    EnvironmentLayout out;
    out.spawn_region = Rect{Vec2(-h, -h), Vec2(h, h)};
    out.env.bounds = Rect{Vec2(-h - m, -h - m), Vec2(h + m, h + m)};

    auto flow_line = [](int id, Vec2 a, Vec2 b) {
        FlowLine line;
        line.id = id;
        line.a = a;
        line.b = b;
        return line;
    };

    if (name == "open") {
        // Everyone heads for the point mirrored through the center.
        out.goal_policy = [](std::size_t i, std::span<const Vec2> spawns) { return GoalPolicy::fixed(-spawns[i]); };
        out.flow_lines.push_back(flow_line(0, Vec2(0, -h - m), Vec2(0, h + m)));
    } else if (name == "crossing") {
        // Even ids walk across in x, odd ids in y, to just past the far side of the spawn square.
        out.goal_policy = [far = h + 1.0](std::size_t i, std::span<const Vec2> spawns) {
            const Vec2& p = spawns[i];
            if (i % 2 == 0) return GoalPolicy::fixed(Vec2(p.x() > 0 ? -far : far, p.y()));
            return GoalPolicy::fixed(Vec2(p.x(), p.y() > 0 ? -far : far));
        };
        out.flow_lines.push_back(flow_line(0, Vec2(0, -h - m), Vec2(0, h + m)));
        out.flow_lines.push_back(flow_line(1, Vec2(h + m, 0), Vec2(-h - m, 0)));
    } else if (name == "swap") {
        // Consecutive agents trade spawn points; an unpaired last agent heads for its mirror point.
        out.goal_policy = [](std::size_t i, std::span<const Vec2> spawns) {
            const std::size_t partner = i % 2 == 0 ? i + 1 : i - 1;
            return GoalPolicy::fixed(partner < spawns.size() ? spawns[partner] : Vec2(-spawns[i]));
        };
        out.flow_lines.push_back(flow_line(0, Vec2(0, -h - m), Vec2(0, h + m)));
    } else if (name == "plaza") {
        const double k = spawn_side / 10;
        out.env.obstacles.push_back(make_box(Vec2(-k, -k), Vec2(k, k)));
        out.goal_policy = [region = out.spawn_region](std::size_t, std::span<const Vec2>) {
            return GoalPolicy::sample_region(region);
        };
        out.flow_lines.push_back(flow_line(0, Vec2(0, k + 0.5), Vec2(0, h + m)));
    } else if (name == "corridor") {
        const double end = 3 * h;
        out.env.bounds = Rect{Vec2(-end - m, -h - 1.0), Vec2(end + m, h + 1.0)};
        out.goal_policy = [end](std::size_t i, std::span<const Vec2> spawns) {
            const Vec2 east(end, spawns[i].y()), west(-end, spawns[i].y());
            return i % 2 == 0 ? GoalPolicy::cycle({east, west}) : GoalPolicy::cycle({west, east});
        };
        out.flow_lines.push_back(flow_line(0, Vec2(0, -h - 1.0), Vec2(0, h + 1.0)));
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown environment '" + std::string(name) + "'");
    }
    return out;
}

// ---------------------------------------------------------------------------
// Instantiation

Scene instantiate(const ScenarioSpec& spec) {
    spec.validate();
    const double side = std::max(std::sqrt(spec.pedestrian_count / spec.density), kMinSpawnSide);
    EnvironmentLayout layout = make_layout(spec.environment, side);

    Rng rng(mix64(spec.seed ^ 0x5350415745ULL));
    std::vector<AgentState> agents;
    agents.reserve(static_cast<std::size_t>(spec.pedestrian_count));
    const Rect& region = layout.spawn_region;
    for (int id = 0; id < spec.pedestrian_count; ++id) {
        AgentState a;
        a.id = id;
        a.params = sample_class_params(spec.behavior_class, spec.class_margin, rng);
        const double r = a.params.radius;
        bool placed = false;
        for (std::size_t attempt = 0; attempt < kSpawnAttempts && !placed; ++attempt) {
            const Vec2 p(rng.uniform(region.min.x(), region.max.x()), rng.uniform(region.min.y(), region.max.y()));
            if (!layout.env.is_free(p, r)) continue;
            placed = std::all_of(agents.begin(), agents.end(), [&](const AgentState& b) {
                return (p - b.position).norm() > r + b.params.radius;
            });
            if (placed) a.position = p;
        }
        if (!placed) {
            throw Error(ErrorCode::SpawnFailure, "cannot place agent " + std::to_string(id) + " at density " +
                                                     std::to_string(spec.density));
        }
        a.rng = Rng(mix64(spec.seed ^ mix64(static_cast<std::uint64_t>(id) + 1)));
        agents.push_back(std::move(a));
    }

    std::vector<Vec2> spawns;
    for (const auto& a : agents) spawns.push_back(a.position);
    for (std::size_t i = 0; i < agents.size(); ++i) agents[i].goal_policy = layout.goal_policy(i, spawns);

    Scene scene;
    scene.camera = resolve_camera(spec.camera, layout.env.bounds);
    scene.flow_lines = std::move(layout.flow_lines);
    scene.spawn_region = region;
    scene.world = make_world(std::move(layout.env), std::move(agents));
    return scene;
}

CostStats summarize_costs(std::vector<double> costs_ms) {
    CostStats s;
    s.frames = costs_ms.size();
    if (costs_ms.empty()) return s;
    double sum = 0.0;
    for (double c : costs_ms) sum += c;
    s.mean_ms = sum / static_cast<double>(costs_ms.size());
    s.max_ms = *std::max_element(costs_ms.begin(), costs_ms.end());
    const std::size_t n = costs_ms.size();
    std::sort(costs_ms.begin(), costs_ms.end());
    s.median_ms = n % 2 == 1 ? costs_ms[n / 2] : 0.5 * (costs_ms[n / 2 - 1] + costs_ms[n / 2]);
    return s;
}

// ---------------------------------------------------------------------------
// JSON encoding

namespace {

json vec_json(const Vec2& v) { return json::array({v.x(), v.y()}); }
Vec2 vec2_from(const json& j) { return Vec2(j.at(0).get<double>(), j.at(1).get<double>()); }

json camera_json(const CameraModel& c) {
    return {{"position", json::array({c.position.x(), c.position.y(), c.position.z()})},
            {"yaw", c.yaw},
            {"pitch", c.pitch},
            {"focal_px", c.focal_px},
            {"image_width", c.image_width},
            {"image_height", c.image_height},
            {"projection", c.projection == Projection::Perspective ? "perspective" : "orthographic"},
            {"ortho_scale", c.ortho_scale}};
}

CameraModel camera_from(const json& j) {
    CameraModel c;
    const auto& p = j.at("position");
    c.position = Vec3(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
    c.yaw = j.value("yaw", c.yaw);
    c.pitch = j.value("pitch", c.pitch);
    c.focal_px = j.value("focal_px", c.focal_px);
    c.image_width = j.value("image_width", c.image_width);
    c.image_height = j.value("image_height", c.image_height);
    const std::string proj = j.value("projection", std::string("perspective"));
    if (proj != "perspective" && proj != "orthographic") {
        throw Error(ErrorCode::InvalidArgument, "unknown projection '" + proj + "'");
    }
    c.projection = proj == "perspective" ? Projection::Perspective : Projection::Orthographic;
    c.ortho_scale = j.value("ortho_scale", c.ortho_scale);
    return c;
}

json camera_choice_json(const CameraChoice& c) {
    if (!c.preset.empty()) return c.preset;
    return camera_json(c.camera);
}

CameraChoice camera_choice_from(const json& j) {
    CameraChoice c;
    if (j.is_string()) {
        c.preset = j.get<std::string>();
    } else {
        c.preset.clear();
        c.camera = camera_from(j);
    }
    return c;
}

json params_json(const SimParams& p) {
    return {{"neighbor_dist", p.neighbor_dist},
            {"max_neighbors", p.max_neighbors},
            {"planning_horizon", p.planning_horizon},
            {"radius", p.radius},
            {"pref_speed", p.pref_speed}};
}

SimParams params_from(const json& j) {
    SimParams p;
    p.neighbor_dist = j.at("neighbor_dist").get<double>();
    p.max_neighbors = j.at("max_neighbors").get<double>();
    p.planning_horizon = j.at("planning_horizon").get<double>();
    p.radius = j.at("radius").get<double>();
    p.pref_speed = j.at("pref_speed").get<double>();
    return p;
}

BackgroundStyle background_from(const json& j) {
    const auto b = parse_background(j.get<std::string>());
    if (!b) throw Error(ErrorCode::InvalidArgument, "unknown background '" + j.get<std::string>() + "'");
    return *b;
}

BehaviorClass class_from(const json& j) {
    const auto c = parse_behavior_class(j.get<std::string>());
    if (!c) throw Error(ErrorCode::InvalidArgument, "unknown behavior_class '" + j.get<std::string>() + "'");
    return *c;
}

json scenario_json(const ScenarioSpec& s) {
    return {{"background", to_string(s.background)},
            {"behavior_class", to_string(s.behavior_class)},
            {"camera", camera_choice_json(s.camera)},
            {"density", s.density},
            {"environment", s.environment},
            {"light", s.light},
            {"pedestrian_count", s.pedestrian_count},
            {"duration", s.duration},
            {"dt", s.dt},
            {"seed", s.seed},
            {"class_margin", s.class_margin},
            {"noise_std", s.noise_std}};
}

ScenarioSpec scenario_from(const json& j) {
    ScenarioSpec s;
    s.background = background_from(j.at("background"));
    s.behavior_class = class_from(j.at("behavior_class"));
    s.camera = camera_choice_from(j.at("camera"));
    s.density = j.at("density").get<double>();
    s.environment = j.at("environment").get<std::string>();
    s.light = j.at("light").get<double>();
    s.pedestrian_count = j.at("pedestrian_count").get<int>();
    s.duration = j.at("duration").get<int>();
    s.dt = j.at("dt").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.class_margin = j.at("class_margin").get<double>();
    s.noise_std = j.at("noise_std").get<double>();
    return s;
}

json sweep_json(const SweepSpec& s) {
    json backgrounds = json::array(), classes = json::array(), cameras = json::array();
    for (auto b : s.background) backgrounds.push_back(to_string(b));
    for (auto c : s.behavior_class) classes.push_back(to_string(c));
    for (const auto& c : s.camera) cameras.push_back(camera_choice_json(c));
    return {{"background", backgrounds},
            {"behavior_class", classes},
            {"camera", cameras},
            {"density", s.density},
            {"environment", s.environment},
            {"light", s.light},
            {"pedestrian_count", s.pedestrian_count},
            {"duration", s.duration},
            {"dt", s.dt},
            {"class_margin", s.class_margin},
            {"noise_std", s.noise_std},
            {"render_frames", s.render_frames},
            {"base_seed", s.base_seed}};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// The value a six-decimal CSV field parses back to.
double csv_round(double x) {
    char buf[64];
    const int n = std::snprintf(buf, sizeof buf, "%.6f", x);
    double out = 0.0;
    std::from_chars(buf, buf + n, out);
    return out;
}

std::string stored_scenario_json(const ScenarioSpec& spec, const Scene& scene) {
    json agents = json::array();
    for (const auto& a : scene.world.agents) {
        agents.push_back({{"id", a.id}, {"params", params_json(a.params)}, {"spawn", vec_json(a.position)}});
    }
    json obstacles = json::array();
    for (const auto& poly : scene.world.env.obstacles) {
        json pj = json::array();
        for (const auto& v : poly) pj.push_back(vec_json(v));
        obstacles.push_back(pj);
    }
    json lines = json::array();
    for (const auto& l : scene.flow_lines) {
        lines.push_back({{"id", l.id}, {"a", vec_json(l.a)}, {"b", vec_json(l.b)},
                         {"tolerance_halfwidth", l.tolerance_halfwidth}});
    }
    const auto& env = scene.world.env;
    const json doc{{"schema_version", kManifestSchemaVersion},
                   {"scenario", scenario_json(spec)},
                   {"camera", camera_json(scene.camera)},
                   {"environment",
                    {{"bounds", {vec_json(env.bounds.min), vec_json(env.bounds.max)}},
                     {"obstacles", obstacles},
                     {"grid_resolution", env.grid_resolution}}},
                   {"flow_lines", lines},
                   {"agents", agents}};
    return doc.dump(1) + "\n";
}

std::vector<AgentPose> poses_for_frame(std::span<const TrajectoryRow> rows, const std::map<int, double>& radius) {
    std::vector<AgentPose> poses;
    poses.reserve(rows.size());
    for (const auto& r : rows) {
        const auto it = radius.find(r.agent_id);
        if (it == radius.end()) {
            throw Error(ErrorCode::ParseError, "trajectory agent " + std::to_string(r.agent_id) + " not in scenario");
        }
        poses.push_back({r.agent_id, r.position, it->second});
    }
    std::sort(poses.begin(), poses.end(), [](const AgentPose& a, const AgentPose& b) { return a.id < b.id; });
    return poses;
}

std::string annotations_text(std::span<const FrameAnnotations> frames) {
    std::ostringstream out;
    write_annotations_json(out, frames);
    return out.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Generation

VideoRecord generate_video(const ScenarioSpec& spec, const fs::path& root, const fs::path& rel_dir,
                           bool render_frames) {
    VideoRecord rec;
    rec.scenario = spec;
    const fs::path dir = root / rel_dir;
    try {
        Scene scene = instantiate(spec);
        World& world = scene.world;
        fs::create_directories(dir);

        RenderSettings render;
        render.background = spec.background;
        render.base_luminance = spec.light;
        render.noise_std = spec.noise_std;
        render.width = scene.camera.image_width;
        render.height = scene.camera.image_height;
        if (render_frames) {
            render.validate(scene.camera);
            fs::create_directories(dir / "frames");
        }

        std::vector<TrajectoryRow> rows;
        rows.reserve(static_cast<std::size_t>(spec.duration) * world.agents.size());
        std::vector<FrameAnnotations> frames;
        frames.reserve(static_cast<std::size_t>(spec.duration));
        std::vector<double> costs;
        std::vector<AgentPose> poses(world.agents.size());
        using Clock = std::chrono::steady_clock;

        for (int f = 0; f < spec.duration; ++f) {
            const auto t0 = Clock::now();
            if (f > 0) step(world, spec.dt);
            // Label the positions exactly as the trajectory file will store them.
            const std::size_t first_row = rows.size();
            append_rows(world, rows);
            for (std::size_t i = 0; i < world.agents.size(); ++i) {
                TrajectoryRow& r = rows[first_row + i];
                r.position = Vec2(csv_round(r.position.x()), csv_round(r.position.y()));
                r.velocity = Vec2(csv_round(r.velocity.x()), csv_round(r.velocity.y()));
                poses[i] = {r.agent_id, r.position, world.agents[i].params.radius};
            }
            frames.push_back(annotate_frame(world.frame, poses, scene.camera, scene.flow_lines));
            const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
            if (f > 0) costs.push_back(ms);

            if (render_frames) {
                Frame img = rasterize(poses, scene.camera, render, world.env.obstacles);
                Rng noise(mix64(spec.seed ^ mix64(0x4e4f495345ULL + static_cast<std::uint64_t>(f))));
                img = add_gaussian_noise(img, spec.noise_std, noise);
                char name[32];
                std::snprintf(name, sizeof name, "frame_%06d.pgm", f);
                write_pgm(dir / "frames" / name, img);
            }
        }

        rec.cost = summarize_costs(costs);
        rec.frame_count = spec.duration;

        write_text(dir / "scenario.json", stored_scenario_json(spec, scene));
        {
            std::ostringstream csv;
            write_trajectory_csv(csv, rows);
            write_text(dir / "trajectories.csv", csv.str());
        }
        write_text(dir / "annotations.json", annotations_text(frames));
        {
            std::ostringstream boxes;
            write_boxes_csv(boxes, frames);
            write_text(dir / "boxes.csv", boxes.str());
        }
        const json cost{{"frames", rec.cost.frames},
                        {"mean_ms", rec.cost.mean_ms},
                        {"median_ms", rec.cost.median_ms},
                        {"max_ms", rec.cost.max_ms}};
        write_text(dir / "cost.json", cost.dump(1) + "\n");

        rec.ok = true;
        rec.directory = rel_dir;
        rec.scenario_file = rel_dir / "scenario.json";
        rec.trajectories = rel_dir / "trajectories.csv";
        rec.annotations = rel_dir / "annotations.json";
        rec.boxes = rel_dir / "boxes.csv";
        if (render_frames) rec.frames = rel_dir / "frames";
        rec.cost_file = rel_dir / "cost.json";
    } catch (const std::exception& e) {
        rec.ok = false;
        rec.error = e.what();
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
    return rec;
}

std::filesystem::path manifest_path(const SweepSpec& sweep) { return sweep.output_root / "manifest.json"; }

void write_manifest(std::ostream& out, const SweepSpec& sweep, std::span<const VideoRecord> records) {
    json arr = json::array();
    for (const auto& r : records) {
        json files = nullptr;
        if (r.ok) {
            files = {{"directory", r.directory.generic_string()},
                     {"scenario", r.scenario_file.generic_string()},
                     {"trajectories", r.trajectories.generic_string()},
                     {"annotations", r.annotations.generic_string()},
                     {"boxes", r.boxes.generic_string()},
                     {"frames", r.frames.empty() ? json(nullptr) : json(r.frames.generic_string())},
                     {"cost", r.cost_file.generic_string()}};
        }
        arr.push_back({{"index", r.index},
                       {"axis_index", r.axis_index},
                       {"status", r.ok ? "ok" : "failed"},
                       {"error", r.error},
                       {"scenario", scenario_json(r.scenario)},
                       {"frame_count", r.frame_count},
                       {"files", files}});
    }
    const json doc{{"schema_version", kManifestSchemaVersion}, {"sweep", sweep_json(sweep)}, {"records", arr}};
    out << doc.dump(1) << '\n';
}

std::vector<VideoRecord> run_sweep(const SweepSpec& sweep, int workers, const ProgressFn& progress) {
    sweep.validate();
    const std::vector<SweepCell> cells = expand_sweep(sweep);
    fs::create_directories(sweep.output_root);
    std::vector<VideoRecord> records(cells.size());
    std::mutex progress_mutex;
    parallel_for(cells.size(), workers, [&](std::size_t i) {
        char name[32];
        std::snprintf(name, sizeof name, "%05zu", i);
        VideoRecord rec = generate_video(cells[i].scenario, sweep.output_root, fs::path("videos") / name,
                                         sweep.render_frames);
        rec.index = i;
        rec.axis_index = cells[i].axis_index;
        records[i] = std::move(rec);
        if (progress) {
            std::lock_guard lock(progress_mutex);
            progress(records[i]);
        }
    });
    std::ostringstream manifest;
    write_manifest(manifest, sweep, records);
    write_text(manifest_path(sweep), manifest.str());
    return records;
}

// ---------------------------------------------------------------------------
// Loading

SweepSpec parse_sweep_config(std::istream& in) {
    SweepSpec s;
    try {
        const json j = json::parse(in);
        if (!j.is_object()) throw Error(ErrorCode::ParseError, "sweep config must be a JSON object");
        static const std::vector<std::string> known{
            "background", "behavior_class", "camera",     "density",  "environment",   "light",
            "pedestrian_count", "duration", "dt",         "class_margin", "noise_std", "render_frames",
            "base_seed",  "output_root"};
        for (const auto& [key, _] : j.items()) {
            if (std::find(known.begin(), known.end(), key) == known.end()) {
                throw Error(ErrorCode::InvalidArgument, "unknown config key '" + key + "'");
            }
        }
        auto list = [&](const char* key) -> const json* {
            if (!j.contains(key)) return nullptr;
            const json& v = j.at(key);
            if (!v.is_array()) throw Error(ErrorCode::InvalidArgument, std::string("axis '") + key + "' must be a list");
            return &v;
        };
        if (const json* v = list("background")) {
            s.background.clear();
            for (const auto& e : *v) s.background.push_back(background_from(e));
        }
        if (const json* v = list("behavior_class")) {
            s.behavior_class.clear();
            for (const auto& e : *v) s.behavior_class.push_back(class_from(e));
        }
        if (const json* v = list("camera")) {
            s.camera.clear();
            for (const auto& e : *v) s.camera.push_back(camera_choice_from(e));
        }
        if (const json* v = list("density")) s.density = v->get<std::vector<double>>();
        if (const json* v = list("environment")) s.environment = v->get<std::vector<std::string>>();
        if (const json* v = list("light")) s.light = v->get<std::vector<double>>();
        if (const json* v = list("pedestrian_count")) s.pedestrian_count = v->get<std::vector<int>>();
        s.duration = j.value("duration", s.duration);
        s.dt = j.value("dt", s.dt);
        s.class_margin = j.value("class_margin", s.class_margin);
        s.noise_std = j.value("noise_std", s.noise_std);
        s.render_frames = j.value("render_frames", s.render_frames);
        s.base_seed = j.value("base_seed", s.base_seed);
        if (j.contains("output_root")) s.output_root = j.at("output_root").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("sweep config: ") + e.what());
    }
    s.validate();
    return s;
}

SweepSpec load_sweep_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path.string());
    return parse_sweep_config(in);
}

std::string sweep_to_json(const SweepSpec& sweep) {
    json j = sweep_json(sweep);
    j["output_root"] = sweep.output_root.generic_string();
    return j.dump(1) + "\n";
}

StoredScenario load_scenario(const fs::path& path) {
    StoredScenario out;
    try {
        const json j = json::parse(read_text(path));
        out.spec = scenario_from(j.at("scenario"));
        out.camera = camera_from(j.at("camera"));
        const json& env = j.at("environment");
        out.env.bounds = Rect{vec2_from(env.at("bounds").at(0)), vec2_from(env.at("bounds").at(1))};
        out.env.grid_resolution = env.at("grid_resolution").get<double>();
        for (const auto& pj : env.at("obstacles")) {
            Polygon poly;
            for (const auto& v : pj) poly.push_back(vec2_from(v));
            out.env.obstacles.push_back(std::move(poly));
        }
        for (const auto& lj : j.at("flow_lines")) {
            FlowLine line;
            line.id = lj.at("id").get<int>();
            line.a = vec2_from(lj.at("a"));
            line.b = vec2_from(lj.at("b"));
            line.tolerance_halfwidth = lj.at("tolerance_halfwidth").get<double>();
            out.flow_lines.push_back(std::move(line));
        }
        for (const auto& aj : j.at("agents")) {
            out.agent_ids.push_back(aj.at("id").get<int>());
            out.agent_params.push_back(params_from(aj.at("params")));
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::ParseError, path.string() + ": " + e.what());
    }
    return out;
}

std::string reannotate(const StoredScenario& scenario, std::span<const TrajectoryRow> rows) {
    std::map<int, double> radius;
    for (std::size_t i = 0; i < scenario.agent_ids.size(); ++i) {
        radius[scenario.agent_ids[i]] = scenario.agent_params[i].radius;
    }
    std::vector<TrajectoryRow> sorted(rows.begin(), rows.end());
    std::stable_sort(sorted.begin(), sorted.end(), [](const TrajectoryRow& a, const TrajectoryRow& b) {
        return a.frame < b.frame || (a.frame == b.frame && a.agent_id < b.agent_id);
    });
    std::vector<FlowLine> lines = scenario.flow_lines;
    std::vector<FrameAnnotations> frames;
    std::size_t begin = 0;
    for (std::int64_t f = 0; f < scenario.spec.duration; ++f) {
        std::size_t end = begin;
        while (end < sorted.size() && sorted[end].frame == f) ++end;
        const auto poses = poses_for_frame(std::span(sorted).subspan(begin, end - begin), radius);
        frames.push_back(annotate_frame(f, poses, scenario.camera, lines));
        begin = end;
    }
    if (begin != sorted.size()) throw Error(ErrorCode::ParseError, "trajectory frames outside the scenario duration");
    return annotations_text(frames);
}

std::string reannotate(const fs::path& video_dir) {
    const StoredScenario scenario = load_scenario(video_dir / "scenario.json");
    std::ifstream in(video_dir / "trajectories.csv");
    if (!in) throw Error(ErrorCode::IoError, "cannot read " + (video_dir / "trajectories.csv").string());
    const auto rows = read_trajectory_csv(in);
    return reannotate(scenario, rows);
}

}  // namespace lcrowd
