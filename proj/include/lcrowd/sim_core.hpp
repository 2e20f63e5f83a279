#pragma once

// Agent motion: goal selection, grid-based global planning and reciprocal
// velocity-obstacle local adaptation over disc agents on the ground plane.

#include "lcrowd/common.hpp"
#include "lcrowd/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <span>
#include <utility>
#include <vector>

namespace lcrowd {

inline constexpr double kSpeedSlack = 0.05;
inline constexpr double kDefaultDt = 0.1;
inline constexpr double kDefaultGridResolution = 0.25;

using ParamVector = Eigen::Matrix<double, 5, 1>;

/// The five per-agent simulation parameters, in their native units.
/// max_neighbors is a count; it is stored as a real so that it survives the
/// linear behavior map unchanged and is rounded where it is consumed.
struct SimParams {
    double neighbor_dist = 15.0;     // m
    double max_neighbors = 10.0;     // count
    double planning_horizon = 30.0;  // s
    double radius = 0.8;             // m
    double pref_speed = 1.4;         // m/s

    static constexpr std::array<double, 5> kLower{1.5, 1.0, 0.5, 0.1, 0.3};
    static constexpr std::array<double, 5> kUpper{28.5, 60.0, 45.0, 1.65, 1.9};

    static SimParams reference() { return {}; }

    ParamVector to_vector() const;
    static SimParams from_vector(const ParamVector& v);

    std::size_t neighbor_limit() const;
    bool valid() const;
    bool in_range() const;
    SimParams clamped() const;

    friend bool operator==(const SimParams&, const SimParams&) = default;
};

enum class GoalPolicyKind { FixedPoint, RegionSample, WaypointCycle };

struct GoalPolicy {
    GoalPolicyKind kind = GoalPolicyKind::FixedPoint;
    Vec2 point{0.0, 0.0};
    Rect region;
    std::vector<Vec2> waypoints;
    std::size_t waypoint_index = 0;

    static GoalPolicy fixed(const Vec2& p);
    static GoalPolicy sample_region(const Rect& r);
    static GoalPolicy cycle(std::vector<Vec2> points);
};

struct Environment {
    Rect bounds;
    std::vector<Polygon> obstacles;
    double grid_resolution = kDefaultGridResolution;

    /// Throws InvalidArgument when the invariants do not hold.
    void validate() const;

    /// Signed distance to the nearest obstacle (infinity without obstacles).
    double clearance(const Vec2& p) const;

    bool is_free(const Vec2& p, double radius) const;
};

/// Obstacle clearance sampled at cell centers over the environment bounds.
class NavGrid {
public:
    struct Cell {
        int x = 0;
        int y = 0;
        friend bool operator==(const Cell&, const Cell&) = default;
    };

    explicit NavGrid(const Environment& env);

    int cols() const { return cols_; }
    int rows() const { return rows_; }
    double resolution() const { return resolution_; }

    bool in_grid(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < cols_ && c.y < rows_; }
    Cell cell_of(const Vec2& p) const;
    Vec2 center(Cell c) const;
    double clearance(Cell c) const { return clearance_[index(c)]; }
    bool is_free(Cell c, double radius) const { return in_grid(c) && clearance(c) >= radius; }
    std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * cols_ + c.x; }

private:
    Vec2 origin_;
    double resolution_;
    int cols_;
    int rows_;
    std::vector<double> clearance_;
};

struct GridPath {
    std::vector<NavGrid::Cell> cells;
    double cost = 0.0;  // meters along cell centers
};

/// 8-connected A* with the octile heuristic; diagonal moves may not cut
/// blocked corners. Throws Unreachable when no path exists.
GridPath astar_grid_path(const NavGrid& grid, NavGrid::Cell start, NavGrid::Cell goal, double radius);

/// Polyline from start to goal keeping `radius` clearance from obstacles.
std::vector<Vec2> plan_global_path(const Vec2& start, const Vec2& goal, const Environment& env,
                                   const NavGrid& grid, double radius);
std::vector<Vec2> plan_global_path(const Vec2& start, const Vec2& goal, const Environment& env,
                                   double radius);

struct AgentState {
    int id = 0;
    Vec2 position{0.0, 0.0};
    Vec2 velocity{0.0, 0.0};
    Vec2 goal{0.0, 0.0};
    SimParams params;
    std::vector<Vec2> path;
    std::size_t path_cursor = 0;  // index of the next waypoint in `path`
    GoalPolicy goal_policy;
    Rng rng;
};

/// Returns the goal the agent should pursue next. WaypointCycle advances its
/// cursor (stored in `policy`) when the agent is within 2*radius of its goal.
Vec2 select_goal(const AgentState& agent, const Environment& env, GoalPolicy& policy, Rng& rng);

/// What local adaptation needs to know about another agent.
struct NeighborState {
    int id = 0;
    Vec2 position{0.0, 0.0};
    Vec2 velocity{0.0, 0.0};
    double radius = 0.0;
};

/// Preferred velocity toward the next waypoint (no tie-break rotation).
Vec2 preferred_velocity(const AgentState& agent, double dt);

/// Advances path_cursor past waypoints the agent has reached.
void advance_path(AgentState& agent, double dt);

/// Deterministic symmetry-breaking rotation (radians) applied to the
/// preferred velocity whenever at least one neighbor is in range.
double tie_break_angle(int agent_id);

/// Reciprocal velocity-obstacle adaptation. `neighbors` must not contain the
/// agent itself; only the nearest neighbor_limit() within neighbor_dist are used.
Vec2 adapt_velocity(int agent_id, const Vec2& position, const Vec2& velocity, const SimParams& params,
                    const Vec2& preferred, std::span<const NeighborState> neighbors,
                    const Environment& env, double dt);

Vec2 adapt_velocity(const AgentState& agent, std::span<const AgentState> neighbors,
                    const Environment& env, double dt);

struct World {
    Environment env;
    std::shared_ptr<const NavGrid> grid;
    std::vector<AgentState> agents;
    std::int64_t frame = 0;
    std::vector<double> step_cost_ms;
};

/// Builds the navigation grid, selects initial goals and plans initial paths.
/// Throws Unreachable / NoFreeSpace for agents that cannot be initialized.
World make_world(Environment env, std::vector<AgentState> agents);

/// Advances the world by dt in (0, 0.5].
void step(World& world, double dt);

// Trajectory export: `frame,agent_id,x,y,vx,vy`, six decimals, header row.

struct TrajectoryRow {
    std::int64_t frame = 0;
    int agent_id = 0;
    Vec2 position{0.0, 0.0};
    Vec2 velocity{0.0, 0.0};
};

struct TrajectorySample {
    std::int64_t frame = 0;
    Vec2 position{0.0, 0.0};
    Vec2 velocity{0.0, 0.0};
};

struct Trajectory {
    int agent_id = 0;
    std::vector<TrajectorySample> samples;
};

void append_rows(const World& world, std::vector<TrajectoryRow>& rows);
void write_trajectory_csv(std::ostream& out, std::span<const TrajectoryRow> rows);
/// Throws ParseError naming the offending line.
std::vector<TrajectoryRow> read_trajectory_csv(std::istream& in);
/// Groups rows by agent (ascending id), samples ordered by frame.
std::vector<Trajectory> group_trajectories(std::span<const TrajectoryRow> rows);

}  // namespace lcrowd
