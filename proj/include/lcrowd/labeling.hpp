#pragma once

// Ground-truth labels from world-space agent positions: projected head
// points, occlusion-aware bounding boxes, counts and tolerance-zone flow.

#include "lcrowd/common.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace lcrowd {

inline constexpr double kHeadHeight = 1.7;  // m
inline constexpr double kBodyHeight = 1.8;  // m
inline constexpr double kDefaultFlowHalfwidth = 0.5;
inline constexpr int kAnnotationSchemaVersion = 1;

enum class Projection { Perspective, Orthographic };

/// Pinhole camera in a z-up world. yaw is measured from +x toward +y, pitch is
/// the elevation of the optical axis (negative values look down).
struct CameraModel {
    Vec3 position{0.0, 0.0, 0.0};
    double yaw = 0.0;
    double pitch = 0.0;
    double focal_px = 500.0;
    int image_width = 640;
    int image_height = 480;
    Projection projection = Projection::Perspective;
    double ortho_scale = 20.0;  // px per meter, orthographic only

    void validate() const;

    Vec3 forward() const;
    Vec3 right() const;
    Vec3 up() const;
};

struct ImagePoint {
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

/// std::nullopt means the point is behind the camera (depth <= 1e-6).
std::optional<ImagePoint> project_point(const Vec3& p, const CameraModel& cam);

struct HeadPoint {
    int agent_id = 0;
    double u = 0.0;
    double v = 0.0;
    bool visible = false;
};

struct BoundingBox {
    int agent_id = 0;
    double u_min = 0.0;
    double v_min = 0.0;
    double u_max = 0.0;
    double v_max = 0.0;
    bool visible = false;

    bool contains(double u, double v) const { return u >= u_min && u <= u_max && v >= v_min && v <= v_max; }
};

enum class ZoneState { Outside, InZoneFromNeg, InZoneFromPos };

/// Counting line with a tolerance zone of +-tolerance_halfwidth around the
/// segment a-b. The positive side is to the right of a->b. A crossing from the
/// negative to the positive side increments in_count, the reverse out_count.
struct FlowLine {
    int id = 0;
    Vec2 a{0.0, 0.0};
    Vec2 b{0.0, 1.0};
    double tolerance_halfwidth = kDefaultFlowHalfwidth;
    std::int64_t in_count = 0;
    std::int64_t out_count = 0;
    std::map<int, ZoneState> zone_state;
    std::map<int, Vec2> last_position;

    /// Signed distance (positive side) and coordinate along a->b.
    double signed_distance(const Vec2& p) const;
    double along(const Vec2& p) const;
    bool in_zone(const Vec2& p) const;
};

/// Advances one agent's state machine along the motion prev -> curr.
void update_flow(FlowLine& line, int agent_id, const Vec2& prev, const Vec2& curr);

/// Per-frame form: uses each agent's previously observed position; the first
/// observation only seeds the state.
void update_flow(FlowLine& line, int agent_id, const Vec2& position);

struct FlowSnapshot {
    int line_id = 0;
    std::int64_t in_count = 0;
    std::int64_t out_count = 0;
};

struct FrameAnnotations {
    std::int64_t frame = 0;
    std::vector<HeadPoint> head_points;
    std::vector<BoundingBox> boxes;
    int pedestrian_count = 0;
    std::vector<FlowSnapshot> flows;
};

/// What labeling needs per agent.
struct AgentPose {
    int id = 0;
    Vec2 position{0.0, 0.0};
    double radius = 0.0;
};

/// Throws DuplicateAgentId.
FrameAnnotations annotate_frame(std::int64_t frame, std::span<const AgentPose> agents, const CameraModel& cam,
                                std::span<FlowLine> flow_lines);

void write_annotations_json(std::ostream& out, std::span<const FrameAnnotations> frames);
std::vector<FrameAnnotations> read_annotations_json(std::istream& in);

/// `frame,agent_id,u_min,v_min,u_max,v_max` rows for visible boxes.
void write_boxes_csv(std::ostream& out, std::span<const FrameAnnotations> frames);

}  // namespace lcrowd
