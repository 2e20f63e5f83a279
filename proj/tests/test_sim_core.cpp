#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "lcrowd/sim_core.hpp"

#include <queue>
#include <sstream>

using namespace lcrowd;

namespace {

Environment open_env(double w = 40.0, double h = 40.0) {
    Environment env;
    env.bounds = {Vec2(-w / 2, -h / 2), Vec2(w / 2, h / 2)};
    return env;
}

AgentState make_agent(int id, Vec2 pos, Vec2 goal, SimParams p = {}) {
    AgentState a;
    a.id = id;
    a.position = pos;
    a.goal = goal;
    a.params = p;
    a.goal_policy = GoalPolicy::fixed(goal);
    a.rng = Rng(1000 + id);
    return a;
}

// Independent oracle: plain Dijkstra over the same free-cell set.
double dijkstra_cost(const NavGrid& grid, NavGrid::Cell s, NavGrid::Cell t, double radius) {
    const double res = grid.resolution();
    std::vector<double> dist(static_cast<std::size_t>(grid.cols()) * grid.rows(),
                             std::numeric_limits<double>::infinity());
    using E = std::pair<double, std::size_t>;
    std::priority_queue<E, std::vector<E>, std::greater<>> pq;
    dist[grid.index(s)] = 0.0;
    pq.emplace(0.0, grid.index(s));
    while (!pq.empty()) {
        auto [d, u] = pq.top();
        pq.pop();
        if (d > dist[u]) continue;
        const int x = static_cast<int>(u % grid.cols());
        const int y = static_cast<int>(u / grid.cols());
        for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
                if (!dx && !dy) continue;
                NavGrid::Cell c{x + dx, y + dy};
                if (!grid.is_free(c, radius)) continue;
                if (dx && dy && (!grid.is_free({x + dx, y}, radius) || !grid.is_free({x, y + dy}, radius))) continue;
                const double nd = d + ((dx && dy) ? std::sqrt(2.0) * res : res);
                if (nd < dist[grid.index(c)]) {
                    dist[grid.index(c)] = nd;
                    pq.emplace(nd, grid.index(c));
                }
            }
    }
    return dist[grid.index(t)];
}

Environment wall_env() {
    Environment env;
    env.bounds = {Vec2(0, 0), Vec2(10, 10)};
    env.obstacles.push_back(make_box(Vec2(4.95, 0.0), Vec2(5.05, 8.0)));
    return env;
}

}  // namespace

TEST_CASE("select_goal policies") {
    const Environment env = open_env();
    AgentState a = make_agent(0, Vec2(0, 0), Vec2(0, 0));
    a.params.radius = 0.3;
    Rng rng(42);

    SUBCASE("fixed point is the identity") {
        GoalPolicy p = GoalPolicy::fixed(Vec2(10, 0));
        CHECK(select_goal(a, env, p, rng) == Vec2(10, 0));
    }
    SUBCASE("waypoint cycle advances on arrival") {
        GoalPolicy p = GoalPolicy::cycle({Vec2(0, 0), Vec2(5, 0)});
        a.position = Vec2(0.2, 0.0);
        CHECK(select_goal(a, env, p, rng) == Vec2(5, 0));
        a.position = Vec2(2.0, 0.0);
        CHECK(select_goal(a, env, p, rng) == Vec2(5, 0));
        a.position = Vec2(5.0, 0.1);
        CHECK(select_goal(a, env, p, rng) == Vec2(0, 0));
    }
    SUBCASE("region sample is seeded and contained") {
        Environment unit;
        unit.bounds = {Vec2(-1, -1), Vec2(2, 2)};
        GoalPolicy p = GoalPolicy::sample_region({Vec2(0, 0), Vec2(1, 1)});
        Rng r1(42), r2(42);
        for (int i = 0; i < 20; ++i) {
            const Vec2 g1 = select_goal(a, unit, p, r1);
            const Vec2 g2 = select_goal(a, unit, p, r2);
            CHECK(g1 == g2);
            CHECK(p.region.contains(g1));
        }
    }
    SUBCASE("covered region raises NoFreeSpace") {
        Environment blocked = open_env(10, 10);
        blocked.obstacles.push_back(make_box(Vec2(-4, -4), Vec2(4, 4)));
        GoalPolicy p = GoalPolicy::sample_region({Vec2(-1, -1), Vec2(1, 1)});
        try {
            select_goal(a, blocked, p, rng);
            FAIL("expected NoFreeSpace");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::NoFreeSpace);
        }
    }
}

TEST_CASE("plan_global_path in free space is a straight segment") {
    Environment env;
    env.bounds = {Vec2(0, 0), Vec2(10, 10)};
    const auto path = plan_global_path(Vec2(1, 1), Vec2(9, 1), env, 0.3);
    REQUIRE(path.size() == 2);
    CHECK(path.front() == Vec2(1, 1));
    CHECK(path.back() == Vec2(9, 1));
    CHECK(polyline_length(path) == doctest::Approx(8.0));
}

TEST_CASE("plan_global_path routes around a wall through the gap") {
    const Environment env = wall_env();
    const double radius = 0.3;
    const NavGrid grid(env);
    const auto path = plan_global_path(Vec2(1, 1), Vec2(9, 1), env, grid, radius);
    REQUIRE(path.size() >= 3);
    CHECK(path.front() == Vec2(1, 1));
    CHECK(path.back() == Vec2(9, 1));
    for (const auto& v : path) {
        if (std::abs(v.x() - 5.0) < 0.5) CHECK(v.y() > 8.0);
    }
    // Every segment crossing the wall's x-range does so above the wall.
    for (std::size_t i = 1; i < path.size(); ++i) {
        CHECK(segment_polygon_distance(path[i - 1], path[i], env.obstacles[0]) >= radius - 1e-9);
    }
    const GridPath raw = astar_grid_path(grid, grid.cell_of(Vec2(1, 1)), grid.cell_of(Vec2(9, 1)), radius);
    const double oracle = dijkstra_cost(grid, grid.cell_of(Vec2(1, 1)), grid.cell_of(Vec2(9, 1)), radius);
    CHECK(raw.cost == doctest::Approx(oracle).epsilon(1e-12));
    // Shortcutting never lengthens the route (allowing one cell at each end).
    CHECK(polyline_length(path) <= raw.cost + 2.0 * grid.resolution());
}

TEST_CASE("plan_global_path errors") {
    const Environment env = wall_env();
    SUBCASE("start inside an obstacle") {
        try {
            plan_global_path(Vec2(5.0, 4.0), Vec2(9, 1), env, 0.3);
            FAIL("expected Unreachable");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::Unreachable);
        }
    }
    SUBCASE("goal sealed off") {
        Environment sealed;
        sealed.bounds = {Vec2(0, 0), Vec2(10, 10)};
        sealed.obstacles.push_back(make_box(Vec2(4.9, 0.0), Vec2(5.1, 10.0)));
        CHECK_THROWS_AS(plan_global_path(Vec2(1, 1), Vec2(9, 1), sealed, 0.3), Error);
    }
}

TEST_CASE("path clearance property over random pillar fields") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        Environment env;
        env.bounds = {Vec2(0, 0), Vec2(20, 20)};
        for (int k = 0; k < 6; ++k) {
            const Vec2 c(rng.uniform(4, 16), rng.uniform(4, 16));
            const double h = rng.uniform(0.3, 1.5);
            env.obstacles.push_back(make_box(c - Vec2(h, h), c + Vec2(h, h)));
        }
        const double radius = rng.uniform(0.1, 0.6);
        const Vec2 start(1, rng.uniform(1, 19));
        const Vec2 goal(19, rng.uniform(1, 19));
        if (!env.is_free(start, radius) || !env.is_free(goal, radius)) continue;
        std::vector<Vec2> path;
        try {
            path = plan_global_path(start, goal, env, radius);
        } catch (const Error&) {
            continue;
        }
        for (const auto& v : path) CHECK(env.clearance(v) >= radius - env.grid_resolution);
    }
}

TEST_CASE("adapt_velocity without constraints returns the preferred velocity") {
    const Environment env = open_env(100, 100);
    AgentState a = make_agent(0, Vec2(0, 0), Vec2(10, 0));
    a.path = {Vec2(0, 0), Vec2(10, 0)};
    a.path_cursor = 1;
    const Vec2 v = adapt_velocity(a, {}, env, 0.1);
    CHECK(v.x() == doctest::Approx(1.4).epsilon(1e-12));
    CHECK(v.y() == doctest::Approx(0.0));

    SUBCASE("neighbors beyond neighbor_dist are ignored") {
        AgentState far = make_agent(1, Vec2(20, 0), Vec2(0, 0));
        far.velocity = Vec2(-1.4, 0);
        const std::vector<AgentState> nbs{far};
        CHECK(adapt_velocity(a, nbs, env, 0.1) == v);
    }
}

TEST_CASE("neighbor truncation property") {
    const Environment env = open_env(200, 200);
    Rng rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        SimParams p;
        p.neighbor_dist = rng.uniform(1.5, 10);
        p.max_neighbors = static_cast<double>(rng.uniform_int(1, 8));
        p.radius = rng.uniform(0.1, 0.5);
        AgentState a = make_agent(trial, Vec2(0, 0), Vec2(10, 0), p);
        a.velocity = Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
        a.path = {Vec2(0, 0), Vec2(rng.uniform(-30, 30), rng.uniform(-30, 30))};
        a.path_cursor = 1;
        std::vector<AgentState> all, inside;
        for (int k = 0; k < 15; ++k) {
            AgentState n = make_agent(1000 + k, Vec2(rng.uniform(-15, 15), rng.uniform(-15, 15)), Vec2(0, 0));
            n.velocity = Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1));
            n.params.radius = rng.uniform(0.1, 0.5);
            all.push_back(n);
            if (n.position.squaredNorm() < p.neighbor_dist * p.neighbor_dist) inside.push_back(n);
        }
        CHECK(adapt_velocity(a, all, env, 0.1) == adapt_velocity(a, inside, env, 0.1));
        CHECK(adapt_velocity(a, all, env, 0.1).norm() <= p.pref_speed * (1 + kSpeedSlack));
    }
}

TEST_CASE("tie-break angle") {
    CHECK(tie_break_angle(3) == 0.0);
    CHECK(tie_break_angle(0) == doctest::Approx(-0.006));
    CHECK(tie_break_angle(13) == doctest::Approx(0.006));
    CHECK(tie_break_angle(-1) == doctest::Approx(0.006));
}

TEST_CASE("step: single agent kinematics") {
    World w = make_world(open_env(), {make_agent(0, Vec2(0, 0), Vec2(10, 0))});
    step(w, 0.1);
    CHECK(w.agents[0].position.x() == doctest::Approx(0.14).epsilon(1e-12));
    CHECK(w.agents[0].position.y() == doctest::Approx(0.0));
    CHECK(w.frame == 1);
    CHECK(w.step_cost_ms.size() == 1);
}

TEST_CASE("step: empty world") {
    World w = make_world(open_env(), {});
    step(w, 0.1);
    CHECK(w.agents.empty());
    CHECK(w.step_cost_ms.empty());
    CHECK(w.frame == 0);
    CHECK_THROWS_AS(step(w, 0.0), Error);
    CHECK_THROWS_AS(step(w, 0.6), Error);
}

TEST_CASE("progress: a lone agent reaches its goal in time") {
    const double dt = 0.1;
    SimParams p;
    p.radius = 0.3;
    World w = make_world(open_env(), {make_agent(0, Vec2(-10, -3), Vec2(12, 5), p)});
    const double dist = (Vec2(12, 5) - Vec2(-10, -3)).norm();
    const int budget = static_cast<int>(dist / p.pref_speed / dt * 1.1);
    int steps = 0;
    while ((w.agents[0].position - Vec2(12, 5)).norm() > 2 * p.radius && steps <= budget) {
        step(w, dt);
        ++steps;
    }
    CHECK(steps <= budget);
}

TEST_CASE("head-on pair never penetrates") {
    SimParams p;
    p.radius = 0.4;
    World w = make_world(open_env(), {make_agent(0, Vec2(-10, 0), Vec2(10, 0), p),
                                      make_agent(1, Vec2(10, 0), Vec2(-10, 0), p)});
    double min_dist = 1e9;
    for (int s = 0; s < 400; ++s) {
        step(w, 0.1);
        min_dist = std::min(min_dist, (w.agents[0].position - w.agents[1].position).norm());
        for (const auto& a : w.agents) CHECK(a.velocity.norm() <= p.pref_speed * (1 + kSpeedSlack));
    }
    CHECK(min_dist >= 0.8 - 1e-3);
    CHECK((w.agents[0].position - Vec2(10, 0)).norm() < 2 * p.radius);
    CHECK((w.agents[1].position - Vec2(-10, 0)).norm() < 2 * p.radius);
}

namespace {

std::string run_crowd(std::uint64_t seed) {
    Rng rng(seed);
    std::vector<AgentState> agents;
    SimParams p;
    p.radius = 0.3;
    int id = 0;
    while (agents.size() < 50) {
        const Vec2 pos(rng.uniform(-7, 7), rng.uniform(-7, 7));
        bool ok = true;
        for (const auto& a : agents) ok = ok && (a.position - pos).norm() > 0.7;
        if (!ok) continue;
        AgentState a = make_agent(id++, pos, Vec2::Zero(), p);
        a.goal_policy = GoalPolicy::sample_region({Vec2(-7, -7), Vec2(7, 7)});
        a.rng = Rng(mix64(seed + id));
        agents.push_back(a);
    }
    World w = make_world(open_env(16, 16), agents);
    std::vector<TrajectoryRow> rows;
    append_rows(w, rows);
    for (int s = 0; s < 200; ++s) {
        step(w, 0.1);
        append_rows(w, rows);
    }
    std::ostringstream out;
    write_trajectory_csv(out, rows);
    return out.str();
}

}  // namespace

TEST_CASE("determinism: equal seeds give identical trajectories") {
    const std::string a = run_crowd(5);
    const std::string b = run_crowd(5);
    CHECK(a == b);
    CHECK(a != run_crowd(6));
}

TEST_CASE("trajectory csv") {
    std::vector<TrajectoryRow> rows{{0, 1, Vec2(1.25, -2.0), Vec2(0.1, 0.2)},
                                    {1, 1, Vec2(1.3, -2.0), Vec2(0.5, 0.0)}};
    std::ostringstream out;
    write_trajectory_csv(out, rows);
    CHECK(out.str() == "frame,agent_id,x,y,vx,vy\n0,1,1.250000,-2.000000,0.100000,0.200000\n"
                       "1,1,1.300000,-2.000000,0.500000,0.000000\n");
    std::istringstream in(out.str());
    const auto back = read_trajectory_csv(in);
    REQUIRE(back.size() == 2);
    CHECK(back[1].position.x() == 1.3);

    SUBCASE("malformed rows name their line") {
        std::istringstream bad("frame,agent_id,x,y,vx,vy\n0,1,1,2,3,4\n0,2,abc,2,3,4\n");
        try {
            read_trajectory_csv(bad);
            FAIL("expected ParseError");
        } catch (const Error& e) {
            CHECK(e.code() == ErrorCode::ParseError);
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SUBCASE("empty input") {
        std::istringstream empty("");
        CHECK_THROWS_AS(read_trajectory_csv(empty), Error);
    }
}
