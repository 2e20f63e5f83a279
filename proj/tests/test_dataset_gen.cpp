#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lcrowd/dataset_gen.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace lcrowd;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("lcrowd_test_dataset_" + name);
    fs::remove_all(p);
    return p;
}

// Every regular file below root, keyed by its relative path.
std::map<std::string, std::string> tree(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
    }
    return out;
}

SweepSpec small_sweep(const fs::path& root) {
    SweepSpec s;
    s.camera = {CameraChoice{"overhead", {}}, CameraChoice{"oblique", {}}};
    s.behavior_class = {BehaviorClass::Shy, BehaviorClass::Aggressive, BehaviorClass::Tense};
    s.density = {0.05, 0.1};
    s.pedestrian_count = {6};
    s.duration = 12;
    s.base_seed = 99;
    s.output_root = root;
    return s;
}

}  // namespace

TEST_CASE("instantiate spawns without overlap inside the spawn region") {
    ScenarioSpec spec;
    spec.pedestrian_count = 10;
    spec.density = 0.25;
    spec.seed = 4;
    const Scene scene = instantiate(spec);
    CHECK(scene.spawn_region.area() == doctest::Approx(40.0));
    const auto& agents = scene.world.agents;
    REQUIRE(agents.size() == 10);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        CHECK(scene.spawn_region.contains(agents[i].position));
        for (std::size_t j = i + 1; j < agents.size(); ++j) {
            CHECK((agents[i].position - agents[j].position).norm() > agents[i].params.radius + agents[j].params.radius);
        }
    }
}

TEST_CASE("instantiate: empty scenario and class-conditioned parameters") {
    ScenarioSpec spec;
    spec.pedestrian_count = 0;
    CHECK(instantiate(spec).world.agents.empty());

    for (BehaviorClass c : kBehaviorClasses) {
        if (c == BehaviorClass::Assertive) continue;  // too rare to spawn densely at margin 0.1
        spec.pedestrian_count = 12;
        spec.density = 0.02;
        spec.behavior_class = c;
        spec.seed = 17;
        for (const auto& a : instantiate(spec).world.agents) {
            const BehaviorVector b = params_to_behavior(a.params);
            CHECK(classify_vector(b) == c);
            CHECK(top_two_gap(b) >= spec.class_margin);
        }
    }
}

TEST_CASE("instantiate: spawn failure and invalid specs") {
    ScenarioSpec spec;
    spec.behavior_class = BehaviorClass::Active;  // large radii
    spec.pedestrian_count = 30;
    spec.density = 2.0;
    CHECK_THROWS_WITH_AS(instantiate(spec), doctest::Contains("SpawnFailure"), Error);
    spec.density = 0.0;
    CHECK_THROWS_AS(instantiate(spec), Error);
    spec.density = 0.1;
    spec.environment = "moon";
    CHECK_THROWS_AS(instantiate(spec), Error);
}

TEST_CASE("every environment and camera preset instantiates") {
    for (const auto& env : environment_names()) {
        for (const auto& cam : camera_presets()) {
            ScenarioSpec spec;
            spec.environment = env;
            spec.camera.preset = cam;
            spec.pedestrian_count = 8;
            spec.density = 0.05;
            spec.seed = 3;
            const Scene scene = instantiate(spec);
            CHECK(scene.world.agents.size() == 8);
            CHECK(!scene.flow_lines.empty());
            // The spawn region center projects inside the image.
            const auto p = project_point(Vec3(0, 0, 0), scene.camera);
            REQUIRE(p.has_value());
            CHECK(p->u > 0);
            CHECK(p->u < scene.camera.image_width);
            CHECK(p->v > 0);
            CHECK(p->v < scene.camera.image_height);
        }
    }
}

TEST_CASE("sweep expansion and seeds") {
    SweepSpec s = small_sweep("unused");
    const auto cells = expand_sweep(s);
    CHECK(cells.size() == 12);
    CHECK(s.size() == 12);
    std::set<std::uint64_t> seeds;
    for (const auto& c : cells) seeds.insert(c.scenario.seed);
    CHECK(seeds.size() == 12);
    CHECK(cells.front().axis_index == AxisIndex{0, 0, 0, 0, 0, 0, 0});
    CHECK(cells[1].axis_index == AxisIndex{0, 0, 0, 1, 0, 0, 0});
    CHECK(cells.back().axis_index == AxisIndex{0, 2, 1, 1, 0, 0, 0});

    // Changing one axis value only touches the cells that use it.
    SweepSpec t = s;
    t.density[1] = 0.2;
    const auto other = expand_sweep(t);
    for (std::size_t i = 0; i < cells.size(); ++i) {
        CHECK(cells[i].scenario.seed == other[i].scenario.seed);
        CHECK((cells[i].scenario.density == other[i].scenario.density) == (cells[i].axis_index[3] == 0));
    }
    CHECK(scenario_seed(1, cells[3].axis_index) != scenario_seed(2, cells[3].axis_index));
}

TEST_CASE("sweep config parsing") {
    std::istringstream good(R"({"behavior_class": ["shy", "tense"], "camera": ["overhead",
        {"position": [0, -20, 8], "pitch": -0.3, "yaw": 1.5707963267948966}], "density": [0.1],
        "pedestrian_count": [5], "duration": 7, "base_seed": 12, "output_root": "out"})");
    const SweepSpec s = parse_sweep_config(good);
    CHECK(s.size() == 4);
    CHECK(s.camera[1].preset.empty());
    CHECK(s.camera[1].camera.position.z() == 8.0);
    CHECK(s.duration == 7);
    CHECK(s.output_root == fs::path("out"));

    std::istringstream round(sweep_to_json(s));
    const SweepSpec r = parse_sweep_config(round);
    CHECK(sweep_to_json(r) == sweep_to_json(s));

    std::istringstream empty_axis(R"({"density": []})");
    CHECK_THROWS_WITH_AS(parse_sweep_config(empty_axis), doctest::Contains("density"), Error);
    std::istringstream unknown(R"({"densty": [0.1]})");
    CHECK_THROWS_WITH_AS(parse_sweep_config(unknown), doctest::Contains("densty"), Error);
    std::istringstream bad_class(R"({"behavior_class": ["grumpy"]})");
    CHECK_THROWS_AS(parse_sweep_config(bad_class), Error);
    std::istringstream malformed("{");
    CHECK_THROWS_WITH_AS(parse_sweep_config(malformed), doctest::Contains("ParseError"), Error);
}

TEST_CASE("generated video: files, label fidelity and box containment") {
    const fs::path root = scratch("video");
    ScenarioSpec spec;
    spec.environment = "crossing";
    spec.pedestrian_count = 10;
    spec.density = 0.08;
    spec.duration = 30;
    spec.seed = 5;
    spec.camera.preset = "oblique";
    const VideoRecord rec = generate_video(spec, root, "v", true);
    REQUIRE_MESSAGE(rec.ok, rec.error);
    for (const auto& f : {rec.scenario_file, rec.trajectories, rec.annotations, rec.boxes, rec.cost_file}) {
        CHECK(fs::exists(root / f));
    }
    CHECK(fs::exists(root / rec.frames / "frame_000000.pgm"));
    CHECK(fs::exists(root / rec.frames / "frame_000029.pgm"));
    CHECK(rec.cost.frames == 29);

    CHECK(reannotate(root / rec.directory) == slurp(root / rec.annotations));

    std::ifstream in(root / rec.annotations);
    const auto frames = read_annotations_json(in);
    REQUIRE(frames.size() == 30);
    for (const auto& f : frames) {
        int visible = 0;
        for (std::size_t i = 0; i < f.head_points.size(); ++i) {
            if (!f.head_points[i].visible) continue;
            ++visible;
            CHECK(f.boxes[i].visible);
            CHECK(f.boxes[i].contains(f.head_points[i].u, f.head_points[i].v));
        }
        CHECK(visible == f.pedestrian_count);
    }

    const StoredScenario stored = load_scenario(root / rec.scenario_file);
    CHECK(stored.spec.seed == spec.seed);
    CHECK(stored.agent_params.size() == 10);
    CHECK(stored.flow_lines.size() == 2);
    fs::remove_all(root);
}

TEST_CASE("failed scenario leaves nothing behind") {
    const fs::path root = scratch("failed");
    ScenarioSpec spec;
    spec.behavior_class = BehaviorClass::Active;
    spec.pedestrian_count = 30;
    spec.density = 2.0;
    const VideoRecord rec = generate_video(spec, root, "v", false);
    CHECK(!rec.ok);
    CHECK(rec.error.find("SpawnFailure") != std::string::npos);
    CHECK(!fs::exists(root / "v"));
    fs::remove_all(root);
}

TEST_CASE("sweeps are deterministic, serial or parallel") {
    const fs::path a = scratch("sweep_a"), b = scratch("sweep_b");
    SweepSpec sa = small_sweep(a), sb = small_sweep(b);
    sb.render_frames = sa.render_frames = false;
    const auto ra = run_sweep(sa, 1);
    const auto rb = run_sweep(sb, 3);
    REQUIRE(ra.size() == 12);
    for (const auto& r : ra) CHECK_MESSAGE(r.ok, r.error);

    auto ta = tree(a), tb = tree(b);
    // Cost files hold wall-clock timings; everything else must match byte for byte.
    std::erase_if(ta, [](const auto& kv) { return kv.first.ends_with("cost.json"); });
    std::erase_if(tb, [](const auto& kv) { return kv.first.ends_with("cost.json"); });
    // The manifest echoes the output root, so compare it with the root masked.
    std::string ma = ta.at("manifest.json"), mb = tb.at("manifest.json");
    CHECK(ma.find(a.generic_string()) == std::string::npos);
    CHECK(ta == tb);

    // Every emitted file is referenced by exactly one record.
    std::set<std::string> referenced{"manifest.json"};
    for (const auto& r : ra) {
        for (const auto& f : {r.scenario_file, r.trajectories, r.annotations, r.boxes, r.cost_file}) {
            CHECK(referenced.insert(f.generic_string()).second);
        }
    }
    for (const auto& e : fs::recursive_directory_iterator(a)) {
        if (e.is_regular_file()) CHECK(referenced.count(fs::relative(e.path(), a).generic_string()) == 1);
    }
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("sweep records per-scenario failures") {
    const fs::path root = scratch("partial");
    SweepSpec s;
    s.behavior_class = {BehaviorClass::Active};
    s.density = {0.02, 3.0};
    s.pedestrian_count = {20};
    s.duration = 5;
    s.render_frames = false;
    s.output_root = root;
    const auto records = run_sweep(s, 2);
    REQUIRE(records.size() == 2);
    CHECK(records[0].ok);
    CHECK(!records[1].ok);
    const std::string manifest = slurp(manifest_path(s));
    CHECK(manifest.find("\"failed\"") != std::string::npos);
    CHECK(manifest.find("SpawnFailure") != std::string::npos);
    fs::remove_all(root);
}
