#include "lcrowd/labeling.hpp"

#include "json.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>

namespace lcrowd {

void CameraModel::validate() const {
    if (!(focal_px > 0.0)) throw Error(ErrorCode::InvalidArgument, "focal_px must be positive");
    if (image_width < 16 || image_height < 16) throw Error(ErrorCode::InvalidArgument, "image must be >= 16 px");
    if (!(std::abs(pitch) < std::numbers::pi / 2)) throw Error(ErrorCode::InvalidArgument, "pitch out of range");
    if (projection == Projection::Orthographic && !(ortho_scale > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "ortho_scale must be positive");
    }
    if (!position.allFinite() || !std::isfinite(yaw)) throw Error(ErrorCode::InvalidArgument, "non-finite camera");
}

Vec3 CameraModel::forward() const {
    return {std::cos(pitch) * std::cos(yaw), std::cos(pitch) * std::sin(yaw), std::sin(pitch)};
}

Vec3 CameraModel::right() const { return {std::sin(yaw), -std::cos(yaw), 0.0}; }

Vec3 CameraModel::up() const { return right().cross(forward()); }

std::optional<ImagePoint> project_point(const Vec3& p, const CameraModel& cam) {
    const Vec3 q = p - cam.position;
    const double depth = cam.forward().dot(q);
    if (depth <= 1e-6) return std::nullopt;
    const double x = cam.right().dot(q);
    const double y = cam.up().dot(q);
    const double scale = cam.projection == Projection::Perspective ? cam.focal_px / depth : cam.ortho_scale;
    return ImagePoint{cam.image_width / 2.0 + scale * x, cam.image_height / 2.0 - scale * y, depth};
}

// ---------------------------------------------------------------------------
// Flow lines

double FlowLine::signed_distance(const Vec2& p) const {
    const Vec2 d = (b - a).normalized();
    return Vec2(d.y(), -d.x()).dot(p - a);
}

double FlowLine::along(const Vec2& p) const { return (b - a).normalized().dot(p - a); }

bool FlowLine::in_zone(const Vec2& p) const {
    const double t = along(p);
    return std::abs(signed_distance(p)) <= tolerance_halfwidth && t >= 0.0 && t <= (b - a).norm();
}

namespace {

ZoneState entered_from(double s) { return s > 0.0 ? ZoneState::InZoneFromPos : ZoneState::InZoneFromNeg; }

// Liang-Barsky: does the segment touch the closed zone rectangle?
bool touches_zone(const FlowLine& line, const Vec2& p0, const Vec2& p1) {
    const double t0 = line.along(p0), s0 = line.signed_distance(p0);
    const double dt = line.along(p1) - t0, ds = line.signed_distance(p1) - s0;
    const double len = (line.b - line.a).norm();
    const double hw = line.tolerance_halfwidth;
    double lo = 0.0, hi = 1.0;
    const std::array<std::pair<double, double>, 4> faces{
        std::pair{-dt, t0}, std::pair{dt, len - t0}, std::pair{-ds, s0 + hw}, std::pair{ds, hw - s0}};
    for (const auto& [p, q] : faces) {
        if (p == 0.0) {
            if (q < 0.0) return false;
            continue;
        }
        const double r = q / p;
        if (p < 0.0) {
            lo = std::max(lo, r);
        } else {
            hi = std::min(hi, r);
        }
        if (lo > hi) return false;
    }
    return true;
}

void leave_zone(FlowLine& line, ZoneState& state, double exit_s) {
    const ZoneState exit_side = entered_from(exit_s);
    if (state == ZoneState::InZoneFromNeg && exit_side == ZoneState::InZoneFromPos) ++line.in_count;
    if (state == ZoneState::InZoneFromPos && exit_side == ZoneState::InZoneFromNeg) ++line.out_count;
    state = ZoneState::Outside;
}

}  // namespace

void update_flow(FlowLine& line, int agent_id, const Vec2& prev, const Vec2& curr) {
    auto [it, inserted] = line.zone_state.try_emplace(agent_id, ZoneState::Outside);
    ZoneState& state = it->second;
    if (inserted && line.in_zone(prev)) state = entered_from(line.signed_distance(prev));

    if (state == ZoneState::Outside) {
        if (!touches_zone(line, prev, curr)) return;
        state = entered_from(line.signed_distance(prev));
    }
    if (!line.in_zone(curr)) leave_zone(line, state, line.signed_distance(curr));
}

void update_flow(FlowLine& line, int agent_id, const Vec2& position) {
    const auto it = line.last_position.find(agent_id);
    if (it == line.last_position.end()) {
        line.last_position.emplace(agent_id, position);
        line.zone_state[agent_id] =
            line.in_zone(position) ? entered_from(line.signed_distance(position)) : ZoneState::Outside;
        return;
    }
    update_flow(line, agent_id, it->second, position);
    it->second = position;
}

// ---------------------------------------------------------------------------
// Frame annotation

FrameAnnotations annotate_frame(std::int64_t frame, std::span<const AgentPose> agents, const CameraModel& cam,
                                std::span<FlowLine> flow_lines) {
    std::set<int> ids;
    for (const auto& a : agents) {
        if (!ids.insert(a.id).second) {
            throw Error(ErrorCode::DuplicateAgentId, "agent id " + std::to_string(a.id) + " appears twice");
        }
    }

    const double width = cam.image_width;
    const double height = cam.image_height;
    FrameAnnotations out;
    out.frame = frame;
    out.head_points.reserve(agents.size());
    out.boxes.reserve(agents.size());
    std::vector<double> depth(agents.size(), 0.0);
    std::vector<bool> head_in_image(agents.size(), false);

    for (std::size_t i = 0; i < agents.size(); ++i) {
        const AgentPose& a = agents[i];
        HeadPoint head{a.id};
        BoundingBox box{a.id};

        bool all_front = true;
        double u_min = std::numeric_limits<double>::infinity(), v_min = u_min;
        double u_max = -u_min, v_max = -u_min;
        for (int corner = 0; corner < 8 && all_front; ++corner) {
            const Vec3 c(a.position.x() + ((corner & 1) ? a.radius : -a.radius),
                         a.position.y() + ((corner & 2) ? a.radius : -a.radius), (corner & 4) ? kBodyHeight : 0.0);
            const auto pc = project_point(c, cam);
            if (!pc) {
                all_front = false;
                break;
            }
            u_min = std::min(u_min, pc->u);
            u_max = std::max(u_max, pc->u);
            v_min = std::min(v_min, pc->v);
            v_max = std::max(v_max, pc->v);
        }
        const auto ph = project_point(Vec3(a.position.x(), a.position.y(), kHeadHeight), cam);
        if (all_front && ph) {
            box.visible = u_max > 0.0 && u_min < width && v_max > 0.0 && v_min < height;
            box.u_min = std::clamp(u_min, 0.0, width);
            box.u_max = std::clamp(u_max, 0.0, width);
            box.v_min = std::clamp(v_min, 0.0, height);
            box.v_max = std::clamp(v_max, 0.0, height);
            head.u = ph->u;
            head.v = ph->v;
            depth[i] = ph->depth;
            head_in_image[i] = ph->u >= 0.0 && ph->u < width && ph->v >= 0.0 && ph->v < height;
        }
        out.head_points.push_back(head);
        out.boxes.push_back(box);
    }

    // A head is hidden by any strictly nearer agent whose box covers it.
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (!head_in_image[i]) continue;
        bool occluded = false;
        for (std::size_t j = 0; j < agents.size() && !occluded; ++j) {
            if (j == i || !out.boxes[j].visible || !(depth[j] < depth[i])) continue;
            occluded = out.boxes[j].contains(out.head_points[i].u, out.head_points[i].v);
        }
        out.head_points[i].visible = !occluded;
        if (!occluded) ++out.pedestrian_count;
    }

    for (auto& line : flow_lines) {
        for (const auto& a : agents) update_flow(line, a.id, a.position);
        out.flows.push_back({line.id, line.in_count, line.out_count});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

nlohmann::json frame_json(const FrameAnnotations& f) {
    nlohmann::json heads = nlohmann::json::array();
    for (const auto& h : f.head_points) {
        heads.push_back({{"agent_id", h.agent_id}, {"u", h.u}, {"v", h.v}, {"visible", h.visible}});
    }
    nlohmann::json boxes = nlohmann::json::array();
    for (const auto& b : f.boxes) {
        boxes.push_back({{"agent_id", b.agent_id},
                         {"u_min", b.u_min},
                         {"v_min", b.v_min},
                         {"u_max", b.u_max},
                         {"v_max", b.v_max},
                         {"visible", b.visible}});
    }
    nlohmann::json flows = nlohmann::json::array();
    for (const auto& s : f.flows) {
        flows.push_back({{"line_id", s.line_id}, {"in_count", s.in_count}, {"out_count", s.out_count}});
    }
    return {{"frame", f.frame},
            {"head_points", heads},
            {"boxes", boxes},
            {"pedestrian_count", f.pedestrian_count},
            {"flows", flows}};
}

}  // namespace

void write_annotations_json(std::ostream& out, std::span<const FrameAnnotations> frames) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : frames) arr.push_back(frame_json(f));
    const nlohmann::json doc{{"schema_version", kAnnotationSchemaVersion}, {"frames", arr}};
    out << doc.dump() << '\n';
}

std::vector<FrameAnnotations> read_annotations_json(std::istream& in) {
    std::vector<FrameAnnotations> frames;
    try {
        const auto doc = nlohmann::json::parse(in);
        if (doc.at("schema_version").get<int>() != kAnnotationSchemaVersion) {
            throw Error(ErrorCode::ParseError, "annotations: unsupported schema_version");
        }
        for (const auto& jf : doc.at("frames")) {
            FrameAnnotations f;
            f.frame = jf.at("frame").get<std::int64_t>();
            f.pedestrian_count = jf.at("pedestrian_count").get<int>();
            for (const auto& h : jf.at("head_points")) {
                f.head_points.push_back({h.at("agent_id").get<int>(), h.at("u").get<double>(),
                                         h.at("v").get<double>(), h.at("visible").get<bool>()});
            }
            for (const auto& b : jf.at("boxes")) {
                f.boxes.push_back({b.at("agent_id").get<int>(), b.at("u_min").get<double>(),
                                   b.at("v_min").get<double>(), b.at("u_max").get<double>(),
                                   b.at("v_max").get<double>(), b.at("visible").get<bool>()});
            }
            for (const auto& s : jf.at("flows")) {
                f.flows.push_back({s.at("line_id").get<int>(), s.at("in_count").get<std::int64_t>(),
                                   s.at("out_count").get<std::int64_t>()});
            }
            frames.push_back(std::move(f));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("annotations: ") + e.what());
    }
    return frames;
}

void write_boxes_csv(std::ostream& out, std::span<const FrameAnnotations> frames) {
    out << "frame,agent_id,u_min,v_min,u_max,v_max\n";
    char buf[160];
    for (const auto& f : frames) {
        for (const auto& b : f.boxes) {
            if (!b.visible) continue;
            const int n = std::snprintf(buf, sizeof buf, "%lld,%d,%.3f,%.3f,%.3f,%.3f\n",
                                        static_cast<long long>(f.frame), b.agent_id, b.u_min, b.v_min, b.u_max,
                                        b.v_max);
            out.write(buf, n);
        }
    }
}

}  // namespace lcrowd
