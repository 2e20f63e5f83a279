#include "lcrowd/sim_core.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <tuple>

namespace lcrowd {

// ---------------------------------------------------------------------------
// SimParams

ParamVector SimParams::to_vector() const {
    ParamVector v;
    v << neighbor_dist, max_neighbors, planning_horizon, radius, pref_speed;
    return v;
}

SimParams SimParams::from_vector(const ParamVector& v) {
    return {v[0], v[1], v[2], v[3], v[4]};
}

std::size_t SimParams::neighbor_limit() const {
    return max_neighbors <= 0.0 ? 0 : static_cast<std::size_t>(std::llround(max_neighbors));
}

bool SimParams::valid() const {
    const ParamVector v = to_vector();
    return v.allFinite() && radius > 0.0 && pref_speed > 0.0 && neighbor_dist >= 0.0 &&
           max_neighbors >= 0.0 && planning_horizon > 0.0;
}

bool SimParams::in_range() const {
    const ParamVector v = to_vector();
    for (int i = 0; i < 5; ++i) {
        if (!(v[i] >= kLower[i] && v[i] <= kUpper[i])) return false;
    }
    return true;
}

SimParams SimParams::clamped() const {
    ParamVector v = to_vector();
    for (int i = 0; i < 5; ++i) v[i] = std::clamp(v[i], kLower[i], kUpper[i]);
    return from_vector(v);
}

// ---------------------------------------------------------------------------
// Goal policies and environment

GoalPolicy GoalPolicy::fixed(const Vec2& p) {
    GoalPolicy g;
    g.kind = GoalPolicyKind::FixedPoint;
    g.point = p;
    return g;
}

GoalPolicy GoalPolicy::sample_region(const Rect& r) {
    GoalPolicy g;
    g.kind = GoalPolicyKind::RegionSample;
    g.region = r;
    return g;
}

GoalPolicy GoalPolicy::cycle(std::vector<Vec2> points) {
    GoalPolicy g;
    g.kind = GoalPolicyKind::WaypointCycle;
    g.waypoints = std::move(points);
    return g;
}

void Environment::validate() const {
    if (!(grid_resolution > 0.0) || !std::isfinite(grid_resolution)) {
        throw Error(ErrorCode::InvalidArgument, "grid_resolution must be positive");
    }
    if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "environment bounds are empty");
    }
    for (const auto& poly : obstacles) {
        if (poly.empty()) throw Error(ErrorCode::InvalidArgument, "empty obstacle polygon");
        for (const auto& v : poly) {
            if (!bounds.contains(v)) throw Error(ErrorCode::InvalidArgument, "obstacle outside bounds");
        }
    }
}

double Environment::clearance(const Vec2& p) const {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& poly : obstacles) best = std::min(best, signed_distance_to_polygon(p, poly));
    return best;
}

bool Environment::is_free(const Vec2& p, double radius) const {
    return bounds.contains(p) && clearance(p) >= radius;
}

Vec2 select_goal(const AgentState& agent, const Environment& env, GoalPolicy& policy, Rng& rng) {
    const double r = agent.params.radius;
    switch (policy.kind) {
        case GoalPolicyKind::FixedPoint:
            if (!env.is_free(policy.point, r)) {
                throw Error(ErrorCode::NoFreeSpace, "fixed goal is not in free space");
            }
            return policy.point;
        case GoalPolicyKind::RegionSample: {
            constexpr int kAttempts = 10000;
            for (int i = 0; i < kAttempts; ++i) {
                const Vec2 p(rng.uniform(policy.region.min.x(), policy.region.max.x()),
                             rng.uniform(policy.region.min.y(), policy.region.max.y()));
                if (env.is_free(p, r)) return p;
            }
            throw Error(ErrorCode::NoFreeSpace, "goal region is covered by obstacles");
        }
        case GoalPolicyKind::WaypointCycle: {
            if (policy.waypoints.empty()) throw Error(ErrorCode::NoFreeSpace, "no waypoints");
            policy.waypoint_index %= policy.waypoints.size();
            if ((agent.position - policy.waypoints[policy.waypoint_index]).norm() <= 2.0 * r) {
                policy.waypoint_index = (policy.waypoint_index + 1) % policy.waypoints.size();
            }
            const Vec2& p = policy.waypoints[policy.waypoint_index];
            if (!env.is_free(p, r)) throw Error(ErrorCode::NoFreeSpace, "waypoint is not in free space");
            return p;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown goal policy");
}

// ---------------------------------------------------------------------------
// Navigation grid and A*

NavGrid::NavGrid(const Environment& env)
    : origin_(env.bounds.min), resolution_(env.grid_resolution) {
    env.validate();
    cols_ = std::max(1, static_cast<int>(std::ceil(env.bounds.width() / resolution_ - 1e-9)));
    rows_ = std::max(1, static_cast<int>(std::ceil(env.bounds.height() / resolution_ - 1e-9)));
    clearance_.resize(static_cast<std::size_t>(cols_) * rows_);
    for (int y = 0; y < rows_; ++y) {
        for (int x = 0; x < cols_; ++x) {
            const Cell c{x, y};
            clearance_[index(c)] = env.clearance(center(c));
        }
    }
}

NavGrid::Cell NavGrid::cell_of(const Vec2& p) const {
    const Vec2 q = (p - origin_) / resolution_;
    return {std::clamp(static_cast<int>(std::floor(q.x())), 0, cols_ - 1),
            std::clamp(static_cast<int>(std::floor(q.y())), 0, rows_ - 1)};
}

Vec2 NavGrid::center(Cell c) const {
    return origin_ + resolution_ * Vec2(c.x + 0.5, c.y + 0.5);
}

GridPath astar_grid_path(const NavGrid& grid, NavGrid::Cell start, NavGrid::Cell goal, double radius) {
    if (!grid.is_free(start, radius) || !grid.is_free(goal, radius)) {
        throw Error(ErrorCode::Unreachable, "start or goal cell is blocked");
    }
    const double res = grid.resolution();
    const double diag = std::sqrt(2.0) * res;
    auto heuristic = [&](NavGrid::Cell c) {
        const double dx = std::abs(c.x - goal.x);
        const double dy = std::abs(c.y - goal.y);
        return res * (dx + dy) + (diag - 2.0 * res) * std::min(dx, dy);
    };

    const std::size_t n = static_cast<std::size_t>(grid.cols()) * grid.rows();
    std::vector<double> g(n, std::numeric_limits<double>::infinity());
    std::vector<std::int64_t> parent(n, -1);
    std::vector<char> closed(n, 0);

    using Entry = std::tuple<double, std::size_t>;
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
    const std::size_t start_idx = grid.index(start);
    const std::size_t goal_idx = grid.index(goal);
    g[start_idx] = 0.0;
    open.emplace(heuristic(start), start_idx);

    while (!open.empty()) {
        const auto [f, idx] = open.top();
        open.pop();
        if (closed[idx]) continue;
        closed[idx] = 1;
        if (idx == goal_idx) break;
        const NavGrid::Cell c{static_cast<int>(idx % grid.cols()), static_cast<int>(idx / grid.cols())};
        for (int dy = -1; dy <= 1; ++dy) {
            for (int dx = -1; dx <= 1; ++dx) {
                if (dx == 0 && dy == 0) continue;
                const NavGrid::Cell nb{c.x + dx, c.y + dy};
                if (!grid.is_free(nb, radius)) continue;
                if (dx != 0 && dy != 0 &&
                    (!grid.is_free({c.x + dx, c.y}, radius) || !grid.is_free({c.x, c.y + dy}, radius))) {
                    continue;
                }
                const std::size_t ni = grid.index(nb);
                if (closed[ni]) continue;
                const double cand = g[idx] + ((dx != 0 && dy != 0) ? diag : res);
                if (cand < g[ni]) {
                    g[ni] = cand;
                    parent[ni] = static_cast<std::int64_t>(idx);
                    open.emplace(cand + heuristic(nb), ni);
                }
            }
        }
    }
    if (!closed[goal_idx]) throw Error(ErrorCode::Unreachable, "no grid path between start and goal");

    GridPath out;
    out.cost = g[goal_idx];
    for (std::int64_t i = static_cast<std::int64_t>(goal_idx); i >= 0; i = parent[static_cast<std::size_t>(i)]) {
        const auto u = static_cast<std::size_t>(i);
        out.cells.push_back({static_cast<int>(u % grid.cols()), static_cast<int>(u / grid.cols())});
    }
    std::reverse(out.cells.begin(), out.cells.end());
    return out;
}

namespace {

bool line_of_sight(const Vec2& a, const Vec2& b, const Environment& env, double radius) {
    for (const auto& poly : env.obstacles) {
        if (segment_polygon_distance(a, b, poly) < radius - 1e-9) return false;
    }
    return true;
}

// Nearest free cell to p, searching p's own cell and its 8 neighbors.
NavGrid::Cell nearest_free_cell(const NavGrid& grid, const Vec2& p, double radius) {
    const NavGrid::Cell base = grid.cell_of(p);
    if (grid.is_free(base, radius)) return base;
    NavGrid::Cell best = base;
    double best_d = std::numeric_limits<double>::infinity();
    for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
            const NavGrid::Cell c{base.x + dx, base.y + dy};
            if (!grid.is_free(c, radius)) continue;
            const double d = (grid.center(c) - p).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
    }
    return best;
}

}  // namespace

std::vector<Vec2> plan_global_path(const Vec2& start, const Vec2& goal, const Environment& env,
                                   const NavGrid& grid, double radius) {
    if (!env.bounds.contains(start) || env.clearance(start) < 0.0) {
        throw Error(ErrorCode::Unreachable, "start lies outside free space");
    }
    if (!env.bounds.contains(goal) || env.clearance(goal) < 0.0) {
        throw Error(ErrorCode::Unreachable, "goal lies outside free space");
    }
    if (line_of_sight(start, goal, env, radius)) return {start, goal};

    const GridPath gp = astar_grid_path(grid, nearest_free_cell(grid, start, radius),
                                        nearest_free_cell(grid, goal, radius), radius);
    std::vector<Vec2> raw;
    raw.reserve(gp.cells.size() + 2);
    raw.push_back(start);
    for (std::size_t i = 1; i + 1 < gp.cells.size(); ++i) raw.push_back(grid.center(gp.cells[i]));
    raw.push_back(goal);

    // Greedy line-of-sight shortcutting: jump to the farthest visible vertex.
    std::vector<Vec2> path{raw.front()};
    std::size_t i = 0;
    while (i + 1 < raw.size()) {
        std::size_t j = raw.size() - 1;
        while (j > i + 1 && !line_of_sight(raw[i], raw[j], env, radius)) --j;
        path.push_back(raw[j]);
        i = j;
    }
    return path;
}

std::vector<Vec2> plan_global_path(const Vec2& start, const Vec2& goal, const Environment& env,
                                   double radius) {
    const NavGrid grid(env);
    return plan_global_path(start, goal, env, grid, radius);
}

}  // namespace lcrowd
