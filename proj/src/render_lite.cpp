#include "lcrowd/render_lite.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>

namespace lcrowd {

void RenderSettings::validate(const CameraModel& cam) const {
    if (width != cam.image_width || height != cam.image_height) {
        throw Error(ErrorCode::InvalidArgument, "render resolution does not match the camera");
    }
    if (!(base_luminance >= 0.0 && base_luminance <= 1.0) || !(agent_shade >= 0.0 && agent_shade <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "luminance and shade must lie in [0, 1]");
    }
    if (!(noise_std >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_std must be >= 0");
}

std::uint8_t to_gray(double intensity) {
    return static_cast<std::uint8_t>(std::clamp(std::nearbyint(intensity * 255.0), 0.0, 255.0));
}

namespace {

constexpr int kPatternCell = 32;

void draw_line(Frame& f, double u0, double v0, double u1, double v1, std::uint8_t value) {
    const int steps = static_cast<int>(std::ceil(std::max(std::abs(u1 - u0), std::abs(v1 - v0)))) + 1;
    for (int i = 0; i <= steps; ++i) {
        const double t = static_cast<double>(i) / steps;
        const int x = static_cast<int>(std::floor(u0 + t * (u1 - u0)));
        const int y = static_cast<int>(std::floor(v0 + t * (v1 - v0)));
        if (x >= 0 && y >= 0 && x < f.width && y < f.height) f.at(x, y) = value;
    }
}

}  // namespace

Frame render_background(const CameraModel& cam, const RenderSettings& settings, std::span<const Polygon> obstacles) {
    settings.validate(cam);
    const double lum = settings.base_luminance;
    Frame f(settings.width, settings.height, to_gray(lum));
    if (settings.background != BackgroundStyle::Flat) {
        const std::uint8_t alt = to_gray(lum * (settings.background == BackgroundStyle::Grid ? 0.6 : 0.75));
        for (int y = 0; y < f.height; ++y) {
            for (int x = 0; x < f.width; ++x) {
                const bool mark = settings.background == BackgroundStyle::Grid
                                      ? (x % kPatternCell == 0 || y % kPatternCell == 0)
                                      : ((x / kPatternCell + y / kPatternCell) % 2 == 1);
                if (mark) f.at(x, y) = alt;
            }
        }
    }
    const std::uint8_t outline = to_gray(lum * 0.3);
    for (const auto& poly : obstacles) {
        for (std::size_t i = 0; i < poly.size(); ++i) {
            const Vec2& a = poly[i];
            const Vec2& b = poly[(i + 1) % poly.size()];
            const auto pa = project_point(Vec3(a.x(), a.y(), 0.0), cam);
            const auto pb = project_point(Vec3(b.x(), b.y(), 0.0), cam);
            if (pa && pb) draw_line(f, pa->u, pa->v, pb->u, pb->v, outline);
        }
    }
    return f;
}

Frame rasterize(std::span<const AgentPose> agents, const CameraModel& cam, const RenderSettings& settings,
                std::span<const Polygon> obstacles) {
    Frame f = render_background(cam, settings, obstacles);

    struct Disc {
        double u, v, r, depth;
        int id;
    };
    std::vector<Disc> discs;
    for (const auto& a : agents) {
        const auto p = project_point(Vec3(a.position.x(), a.position.y(), kHeadHeight), cam);
        if (!p) continue;
        const double r =
            (cam.projection == Projection::Perspective ? cam.focal_px / p->depth : cam.ortho_scale) * a.radius;
        if (p->u + r < 0 || p->v + r < 0 || p->u - r >= f.width || p->v - r >= f.height) continue;
        discs.push_back({p->u, p->v, r, p->depth, a.id});
    }
    std::sort(discs.begin(), discs.end(), [](const Disc& a, const Disc& b) {
        return a.depth > b.depth || (a.depth == b.depth && a.id < b.id);
    });

    const std::uint8_t shade = to_gray(settings.agent_shade);
    for (const auto& d : discs) {
        const int x0 = std::max(0, static_cast<int>(std::floor(d.u - d.r)));
        const int x1 = std::min(f.width - 1, static_cast<int>(std::floor(d.u + d.r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(d.v - d.r)));
        const int y1 = std::min(f.height - 1, static_cast<int>(std::floor(d.v + d.r)));
        const int hx = static_cast<int>(std::floor(d.u));
        const int hy = static_cast<int>(std::floor(d.v));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double du = x + 0.5 - d.u;
                const double dv = y + 0.5 - d.v;
                // The pixel holding the head point is always covered.
                if (du * du + dv * dv <= d.r * d.r || (x == hx && y == hy)) f.at(x, y) = shade;
            }
        }
    }
    return f;
}

Frame add_gaussian_noise(const Frame& frame, double std_dev, Rng& rng) {
    if (!(std_dev >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise std must be >= 0");
    if (std_dev == 0.0) return frame;
    Frame out = frame;
    for (auto& p : out.pixels) {
        const double v = std::nearbyint(static_cast<double>(p) + std_dev * rng.normal());
        p = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
    return out;
}

void write_pgm(std::ostream& out, const Frame& frame) {
    out << "P5\n" << frame.width << ' ' << frame.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(frame.pixels.data()), static_cast<std::streamsize>(frame.pixels.size()));
}

void write_pgm(const std::filesystem::path& path, const Frame& frame) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    write_pgm(out, frame);
}

Frame read_pgm(std::istream& in) {
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P5" || w <= 0 || h <= 0 || maxval != 255) throw Error(ErrorCode::ParseError, "not an 8-bit P5 file");
    in.get();
    Frame f(w, h);
    in.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size()));
    if (in.gcount() != static_cast<std::streamsize>(f.pixels.size())) {
        throw Error(ErrorCode::ParseError, "truncated P5 data");
    }
    return f;
}

}  // namespace lcrowd
