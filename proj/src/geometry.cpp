#include "lcrowd/geometry.hpp"

#include <algorithm>

namespace lcrowd {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NoFreeSpace: return "NoFreeSpace";
        case ErrorCode::Unreachable: return "Unreachable";
        case ErrorCode::SamplingExhausted: return "SamplingExhausted";
        case ErrorCode::EmptyTable: return "EmptyTable";
        case ErrorCode::DuplicateAgentId: return "DuplicateAgentId";
        case ErrorCode::SpawnFailure: return "SpawnFailure";
        case ErrorCode::InsufficientData: return "InsufficientData";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Polygon make_box(const Vec2& lo, const Vec2& hi) {
    return {lo, Vec2(hi.x(), lo.y()), hi, Vec2(lo.x(), hi.y())};
}

Vec2 closest_point_on_segment(const Vec2& p, const Vec2& a, const Vec2& b) {
    const Vec2 ab = b - a;
    const double len_sq = ab.squaredNorm();
    if (len_sq <= 0.0) return a;
    const double t = std::clamp((p - a).dot(ab) / len_sq, 0.0, 1.0);
    return a + t * ab;
}

bool point_in_convex_polygon(const Vec2& p, std::span<const Vec2> poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    bool pos = false;
    bool neg = false;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = det2(poly[(i + 1) % n] - poly[i], p - poly[i]);
        if (d > 0.0) pos = true;
        if (d < 0.0) neg = true;
        if (pos && neg) return false;
    }
    return true;
}

Vec2 closest_point_on_polygon(const Vec2& p, std::span<const Vec2> poly) {
    if (poly.size() == 1) return poly[0];
    Vec2 best = poly[0];
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const Vec2 q = closest_point_on_segment(p, poly[i], poly[(i + 1) % poly.size()]);
        const double d = (q - p).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = q;
        }
    }
    return best;
}

double signed_distance_to_polygon(const Vec2& p, std::span<const Vec2> poly) {
    const double d = (closest_point_on_polygon(p, poly) - p).norm();
    return point_in_convex_polygon(p, poly) ? -d : d;
}

bool segments_intersect(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    const double d1 = det2(b - a, c - a);
    const double d2 = det2(b - a, d - a);
    const double d3 = det2(d - c, a - c);
    const double d4 = det2(d - c, b - c);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
        return true;
    }
    auto on_segment = [](const Vec2& p, const Vec2& q, const Vec2& r) {
        return std::min(p.x(), q.x()) <= r.x() && r.x() <= std::max(p.x(), q.x()) &&
               std::min(p.y(), q.y()) <= r.y() && r.y() <= std::max(p.y(), q.y());
    };
    return (d1 == 0 && on_segment(a, b, c)) || (d2 == 0 && on_segment(a, b, d)) ||
           (d3 == 0 && on_segment(c, d, a)) || (d4 == 0 && on_segment(c, d, b));
}

double segment_segment_distance(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
    if (segments_intersect(a, b, c, d)) return 0.0;
    return std::min({(closest_point_on_segment(a, c, d) - a).norm(),
                     (closest_point_on_segment(b, c, d) - b).norm(),
                     (closest_point_on_segment(c, a, b) - c).norm(),
                     (closest_point_on_segment(d, a, b) - d).norm()});
}

double segment_polygon_distance(const Vec2& a, const Vec2& b, std::span<const Vec2> poly) {
    if (point_in_convex_polygon(a, poly) || point_in_convex_polygon(b, poly)) return 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < poly.size(); ++i) {
        best = std::min(best, segment_segment_distance(a, b, poly[i], poly[(i + 1) % poly.size()]));
        if (best == 0.0) break;
    }
    return best;
}

double polyline_length(std::span<const Vec2> path) {
    double len = 0.0;
    for (std::size_t i = 1; i < path.size(); ++i) len += (path[i] - path[i - 1]).norm();
    return len;
}

}  // namespace lcrowd
