#include "lcrowd/sim_core.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <string_view>

namespace lcrowd {

Vec2 preferred_velocity(const AgentState& agent, double dt) {
    if (agent.path_cursor >= agent.path.size()) return Vec2::Zero();
    const Vec2 to_target = agent.path[agent.path_cursor] - agent.position;
    const double dist = to_target.norm();
    if (dist <= 1e-12) return Vec2::Zero();
    double speed = agent.params.pref_speed;
    if (agent.path_cursor + 1 == agent.path.size()) speed = std::min(speed, dist / dt);
    return to_target * (speed / dist);
}

void advance_path(AgentState& agent, double dt) {
    const double reach = std::max(agent.params.radius, agent.params.pref_speed * dt);
    while (agent.path_cursor + 1 < agent.path.size() &&
           (agent.path[agent.path_cursor] - agent.position).norm() <= reach) {
        ++agent.path_cursor;
    }
}

namespace {

void assign_path(AgentState& agent, const World& world) {
    agent.path = plan_global_path(agent.position, agent.goal, world.env, *world.grid, agent.params.radius);
    agent.path_cursor = 0;
}

void refresh_goal(AgentState& agent, const World& world) {
    if ((agent.position - agent.goal).norm() > 2.0 * agent.params.radius) return;
    GoalPolicy policy = agent.goal_policy;
    Rng rng = agent.rng;
    Vec2 next;
    try {
        next = select_goal(agent, world.env, policy, rng);
    } catch (const Error&) {
        agent.path.clear();
        agent.path_cursor = 0;
        return;
    }
    agent.goal_policy = std::move(policy);
    agent.rng = rng;
    if (next == agent.goal) return;
    agent.goal = next;
    try {
        assign_path(agent, world);
    } catch (const Error&) {
        // Mid-run planning failures leave the agent holding position.
        agent.path.clear();
        agent.path_cursor = 0;
    }
}

}  // namespace

World make_world(Environment env, std::vector<AgentState> agents) {
    env.validate();
    World world;
    world.env = std::move(env);
    world.grid = std::make_shared<const NavGrid>(world.env);
    world.agents = std::move(agents);
    for (auto& agent : world.agents) {
        if (!agent.params.valid()) throw Error(ErrorCode::InvalidArgument, "invalid agent parameters");
        agent.goal = select_goal(agent, world.env, agent.goal_policy, agent.rng);
        assign_path(agent, world);
    }
    return world;
}

void step(World& world, double dt) {
    if (!(dt > 0.0 && dt <= 0.5)) throw Error(ErrorCode::InvalidArgument, "dt must lie in (0, 0.5]");
    const auto t0 = std::chrono::steady_clock::now();
    if (world.agents.empty()) return;

    std::vector<NeighborState> snapshot;
    snapshot.reserve(world.agents.size());
    for (const auto& a : world.agents) snapshot.push_back({a.id, a.position, a.velocity, a.params.radius});

    std::vector<Vec2> next_velocity(world.agents.size());
    for (std::size_t i = 0; i < world.agents.size(); ++i) {
        AgentState& agent = world.agents[i];
        refresh_goal(agent, world);
        advance_path(agent, dt);
        const Vec2 preferred = preferred_velocity(agent, dt);
        next_velocity[i] = adapt_velocity(agent.id, agent.position, agent.velocity, agent.params, preferred,
                                          snapshot, world.env, dt);
    }
    for (std::size_t i = 0; i < world.agents.size(); ++i) {
        AgentState& agent = world.agents[i];
        agent.velocity = next_velocity[i];
        agent.position = world.env.bounds.clamp(agent.position + agent.velocity * dt);
    }
    ++world.frame;
    const auto t1 = std::chrono::steady_clock::now();
    world.step_cost_ms.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
}

// ---------------------------------------------------------------------------
// Trajectory export

namespace {

constexpr std::string_view kTrajectoryHeader = "frame,agent_id,x,y,vx,vy";

template <typename T>
T parse_field(std::string_view field, std::size_t line_no, const char* name) {
    T value{};
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
        throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": bad " + name + " '" +
                                               std::string(field) + "'");
    }
    return value;
}

}  // namespace

void append_rows(const World& world, std::vector<TrajectoryRow>& rows) {
    for (const auto& a : world.agents) rows.push_back({world.frame, a.id, a.position, a.velocity});
}

void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryRow> rows) {
    out << kTrajectoryHeader << '\n';
    char buf[160];
    for (const auto& r : rows) {
        const int n = std::snprintf(buf, sizeof buf, "%lld,%d,%.6f,%.6f,%.6f,%.6f\n",
                                    static_cast<long long>(r.frame), r.agent_id, r.position.x(),
                                    r.position.y(), r.velocity.x(), r.velocity.y());
        out.write(buf, n);
    }
}

std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in) {
    std::vector<TrajectoryRow> rows;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) {
            if (line != kTrajectoryHeader) {
                throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected header '" +
                                                       std::string(kTrajectoryHeader) + "'");
            }
            header_seen = true;
            continue;
        }
        std::array<std::string_view, 6> fields;
        std::size_t count = 0;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            if (count == fields.size()) {
                count = fields.size() + 1;
                break;
            }
            fields[count++] = rest.substr(0, comma);
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
        if (count != fields.size()) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": expected 6 fields");
        }
        TrajectoryRow r;
        r.frame = parse_field<long long>(fields[0], line_no, "frame");
        r.agent_id = parse_field<int>(fields[1], line_no, "agent_id");
        r.position = {parse_field<double>(fields[2], line_no, "x"), parse_field<double>(fields[3], line_no, "y")};
        r.velocity = {parse_field<double>(fields[4], line_no, "vx"), parse_field<double>(fields[5], line_no, "vy")};
        if (!r.position.allFinite() || !r.velocity.allFinite()) {
            throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": non-finite value");
        }
        rows.push_back(r);
    }
    if (!header_seen) throw Error(ErrorCode::ParseError, "empty trajectory file");
    return rows;
}

std::vector<Trajectory> group_trajectories(std::span<const TrajectoryRow> rows) {
    std::map<int, Trajectory> by_agent;
    for (const auto& r : rows) {
        auto& t = by_agent[r.agent_id];
        t.agent_id = r.agent_id;
        t.samples.push_back({r.frame, r.position, r.velocity});
    }
    std::vector<Trajectory> out;
    out.reserve(by_agent.size());
    for (auto& [id, t] : by_agent) {
        std::stable_sort(t.samples.begin(), t.samples.end(),
                         [](const auto& a, const auto& b) { return a.frame < b.frame; });
        out.push_back(std::move(t));
    }
    return out;
}

}  // namespace lcrowd
