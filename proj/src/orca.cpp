#include "lcrowd/sim_core.hpp"

#include <algorithm>
#include <cmath>

namespace lcrowd {

namespace {

constexpr double kEpsilon = 1e-9;
// Look-ahead for static geometry (obstacles and bounds), seconds.
constexpr double kObstacleHorizon = 2.0;

// Half-plane in velocity space; feasible velocities lie left of `direction`.
struct Line {
    Vec2 point{0.0, 0.0};
    Vec2 direction{1.0, 0.0};
};

bool violates(const Line& line, const Vec2& v) { return det2(line.direction, line.point - v) > 0.0; }

// Optimizes along line `line_no` subject to the lines before it and the speed disc.
bool linear_program1(std::span<const Line> lines, std::size_t line_no, double radius, const Vec2& opt,
                     bool direction_opt, Vec2& result) {
    const Line& line = lines[line_no];
    const double dot = line.point.dot(line.direction);
    const double disc = dot * dot + radius * radius - line.point.squaredNorm();
    if (disc < 0.0) return false;

    const double sqrt_disc = std::sqrt(disc);
    double t_left = -dot - sqrt_disc;
    double t_right = -dot + sqrt_disc;

    for (std::size_t i = 0; i < line_no; ++i) {
        const double denom = det2(line.direction, lines[i].direction);
        const double numer = det2(lines[i].direction, line.point - lines[i].point);
        if (std::abs(denom) <= kEpsilon) {
            if (numer < 0.0) return false;
            continue;
        }
        const double t = numer / denom;
        if (denom >= 0.0) {
            t_right = std::min(t_right, t);
        } else {
            t_left = std::max(t_left, t);
        }
        if (t_left > t_right) return false;
    }

    if (direction_opt) {
        result = line.point + (opt.dot(line.direction) > 0.0 ? t_right : t_left) * line.direction;
    } else {
        const double t = line.direction.dot(opt - line.point);
        result = line.point + std::clamp(t, t_left, t_right) * line.direction;
    }
    return true;
}

std::size_t linear_program2(std::span<const Line> lines, double radius, const Vec2& opt,
                            bool direction_opt, Vec2& result) {
    if (direction_opt) {
        result = opt * radius;
    } else if (opt.squaredNorm() > radius * radius) {
        result = opt.normalized() * radius;
    } else {
        result = opt;
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (violates(lines[i], result)) {
            const Vec2 previous = result;
            if (!linear_program1(lines, i, radius, opt, direction_opt, result)) {
                result = previous;
                return i;
            }
        }
    }
    return lines.size();
}

// Least-penetration fallback: minimizes the largest violation of the
// relaxable (agent) lines while keeping the first `hard_count` lines hard.
void linear_program3(std::span<const Line> lines, std::size_t hard_count, std::size_t begin,
                     double radius, Vec2& result) {
    double distance = 0.0;
    std::vector<Line> projected;
    for (std::size_t i = begin; i < lines.size(); ++i) {
        if (det2(lines[i].direction, lines[i].point - result) <= distance) continue;
        projected.assign(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(hard_count));
        for (std::size_t j = hard_count; j < i; ++j) {
            Line line;
            const double determinant = det2(lines[i].direction, lines[j].direction);
            if (std::abs(determinant) <= kEpsilon) {
                if (lines[i].direction.dot(lines[j].direction) > 0.0) continue;
                line.point = 0.5 * (lines[i].point + lines[j].point);
            } else {
                line.point = lines[i].point +
                             (det2(lines[j].direction, lines[i].point - lines[j].point) / determinant) *
                                 lines[i].direction;
            }
            line.direction = (lines[j].direction - lines[i].direction).normalized();
            projected.push_back(line);
        }
        const Vec2 previous = result;
        const Vec2 opt(-lines[i].direction.y(), lines[i].direction.x());
        if (linear_program2(projected, radius, opt, true, result) < projected.size()) {
            result = previous;
        }
        distance = det2(lines[i].direction, lines[i].point - result);
    }
}

// Constraint v . normal >= bound, as a line.
Line half_plane(const Vec2& normal, double bound) {
    return {bound * normal, Vec2(normal.y(), -normal.x())};
}

// Static constraint against the nearest point `q` of some geometry.
void add_static_line(std::vector<Line>& lines, const Vec2& position, const Vec2& q, bool inside,
                     double radius, double max_speed, double dt) {
    const Vec2 offset = position - q;
    const double dist = offset.norm();
    if (!inside && dist >= radius + max_speed * kObstacleHorizon) return;
    if (dist <= kEpsilon) return;
    // Normal pointing from the geometry toward free space.
    const Vec2 normal = inside ? Vec2(-offset / dist) : Vec2(offset / dist);
    const double clearance = inside ? -(dist + radius) : dist - radius;
    const double bound = clearance >= 0.0 ? -clearance / kObstacleHorizon : -clearance / dt;
    lines.push_back(half_plane(normal, bound));
}

Vec2 rotate(const Vec2& v, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

}  // namespace

double tie_break_angle(int agent_id) {
    const int m = ((agent_id % 7) + 7) % 7;
    return (m - 3) * 0.002;
}

Vec2 adapt_velocity(int agent_id, const Vec2& position, const Vec2& velocity, const SimParams& params,
                    const Vec2& preferred, std::span<const NeighborState> neighbors,
                    const Environment& env, double dt) {
    const double max_speed = params.pref_speed;
    const double radius = params.radius;

    // Nearest neighbor_limit() agents within neighbor_dist, ties by id.
    const double range_sq = params.neighbor_dist * params.neighbor_dist;
    std::vector<std::pair<double, const NeighborState*>> near;
    near.reserve(neighbors.size());
    for (const auto& n : neighbors) {
        if (n.id == agent_id) continue;
        const double d = (n.position - position).squaredNorm();
        if (d < range_sq) near.emplace_back(d, &n);
    }
    const std::size_t keep = std::min(params.neighbor_limit(), near.size());
    auto by_distance = [](const auto& a, const auto& b) {
        return a.first < b.first || (a.first == b.first && a.second->id < b.second->id);
    };
    std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(keep), near.end(), by_distance);
    near.resize(keep);

    std::vector<Line> lines;
    lines.reserve(near.size() + env.obstacles.size() + 4);

    for (const auto& poly : env.obstacles) {
        const Vec2 q = closest_point_on_polygon(position, poly);
        add_static_line(lines, position, q, point_in_convex_polygon(position, poly), radius, max_speed, dt);
    }
    const Rect& b = env.bounds;
    add_static_line(lines, position, Vec2(b.min.x(), position.y()), false, radius, max_speed, dt);
    add_static_line(lines, position, Vec2(b.max.x(), position.y()), false, radius, max_speed, dt);
    add_static_line(lines, position, Vec2(position.x(), b.min.y()), false, radius, max_speed, dt);
    add_static_line(lines, position, Vec2(position.x(), b.max.y()), false, radius, max_speed, dt);
    const std::size_t hard_count = lines.size();

    const double inv_horizon = 1.0 / params.planning_horizon;
    for (const auto& [dist_sq, other] : near) {
        const Vec2 rel_pos = other->position - position;
        const Vec2 rel_vel = velocity - other->velocity;
        const double combined = radius + other->radius;
        const double combined_sq = combined * combined;
        Line line;
        Vec2 u;
        if (dist_sq > combined_sq) {
            const Vec2 w = rel_vel - inv_horizon * rel_pos;
            const double w_len_sq = w.squaredNorm();
            const double dot1 = w.dot(rel_pos);
            if (dot1 < 0.0 && dot1 * dot1 > combined_sq * w_len_sq) {
                // Project on the cut-off circle.
                const double w_len = std::sqrt(w_len_sq);
                const Vec2 unit_w = w / w_len;
                line.direction = Vec2(unit_w.y(), -unit_w.x());
                u = (combined * inv_horizon - w_len) * unit_w;
            } else {
                // Project on the legs.
                const double leg = std::sqrt(dist_sq - combined_sq);
                if (det2(rel_pos, w) > 0.0) {
                    line.direction = Vec2(rel_pos.x() * leg - rel_pos.y() * combined,
                                          rel_pos.x() * combined + rel_pos.y() * leg) / dist_sq;
                } else {
                    line.direction = -Vec2(rel_pos.x() * leg + rel_pos.y() * combined,
                                           -rel_pos.x() * combined + rel_pos.y() * leg) / dist_sq;
                }
                u = rel_vel.dot(line.direction) * line.direction - rel_vel;
            }
        } else {
            // Already overlapping: resolve within one step.
            const double inv_dt = 1.0 / dt;
            const Vec2 w = rel_vel - inv_dt * rel_pos;
            double w_len = w.norm();
            Vec2 unit_w;
            if (w_len <= kEpsilon) {
                // Coincident centers and velocities: separate along an id-ordered axis.
                unit_w = rotate(Vec2(1.0, 0.0), 0.5 * (agent_id < other->id ? 1.0 : -1.0) * std::numbers::pi);
                w_len = 0.0;
            } else {
                unit_w = w / w_len;
            }
            line.direction = Vec2(unit_w.y(), -unit_w.x());
            u = (combined * inv_dt - w_len) * unit_w;
        }
        line.point = velocity + 0.5 * u;
        lines.push_back(line);
    }

    Vec2 opt = preferred;
    if (!near.empty()) opt = rotate(opt, tie_break_angle(agent_id));

    Vec2 result = opt;
    const std::size_t failed = linear_program2(lines, max_speed, opt, false, result);
    if (failed < lines.size()) linear_program3(lines, hard_count, failed, max_speed, result);

    const double speed = result.norm();
    if (speed > max_speed) result *= max_speed / speed;
    return result;
}

Vec2 adapt_velocity(const AgentState& agent, std::span<const AgentState> neighbors, const Environment& env,
                    double dt) {
    std::vector<NeighborState> states;
    states.reserve(neighbors.size());
    for (const auto& n : neighbors) states.push_back({n.id, n.position, n.velocity, n.params.radius});
    return adapt_velocity(agent.id, agent.position, agent.velocity, agent.params, preferred_velocity(agent, dt),
                          states, env, dt);
}

}  // namespace lcrowd
