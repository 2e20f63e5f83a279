#pragma once

#include "lcrowd/common.hpp"

#include <span>
#include <vector>

namespace lcrowd {

/// Convex polygon, vertices in counter-clockwise or clockwise order.
using Polygon = std::vector<Vec2>;

struct Rect {
    Vec2 min{0.0, 0.0};
    Vec2 max{0.0, 0.0};

    double width() const { return max.x() - min.x(); }
    double height() const { return max.y() - min.y(); }
    double area() const { return width() * height(); }
    Vec2 center() const { return 0.5 * (min + max); }
    bool contains(const Vec2& p) const {
        return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
    }
    Vec2 clamp(const Vec2& p) const { return p.cwiseMax(min).cwiseMin(max); }
};

Polygon make_box(const Vec2& lo, const Vec2& hi);

Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b);

bool point_in_convex_polygon(const Vec2& p, std::span<const Vec2> poly);

/// Closest point on the polygon boundary.
Vec2 closest_point_on_polygon(const Vec2& p, std::span<const Vec2> poly);

/// Distance from p to the polygon; negative when p is strictly inside.
double signed_distance_to_polygon(const Vec2& p, std::span<const Vec2> poly);

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

double segment_segment_distance(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d);

/// Zero when the segment touches or crosses the polygon.
double segment_polygon_distance(const Vec2& a, const Vec2& b, std::span<const Vec2> poly);

double polyline_length(std::span<const Vec2> path);

}  // namespace lcrowd
