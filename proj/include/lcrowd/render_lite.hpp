#pragma once

// Schematic grayscale frames and image degradation.

#include "lcrowd/common.hpp"
#include "lcrowd/geometry.hpp"
#include "lcrowd/labeling.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

namespace lcrowd {

enum class BackgroundStyle { Flat, Grid, Checker };

struct RenderSettings {
    BackgroundStyle background = BackgroundStyle::Flat;
    double base_luminance = 0.5;  // light condition, [0, 1]
    double agent_shade = 0.1;     // [0, 1]
    double noise_std = 0.0;       // gray levels
    int width = 640;
    int height = 480;

    /// Throws InvalidArgument; resolution must match the camera.
    void validate(const CameraModel& cam) const;
};

/// Row-major 8-bit grayscale image.
struct Frame {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    Frame() = default;
    Frame(int w, int h, std::uint8_t fill = 0)
        : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

    std::uint8_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }

    friend bool operator==(const Frame&, const Frame&) = default;
};

/// Gray level for an intensity in [0, 1], rounded half-to-even.
std::uint8_t to_gray(double intensity);

/// Background only: style pattern plus obstacle outlines on the ground plane.
Frame render_background(const CameraModel& cam, const RenderSettings& settings,
                        std::span<const Polygon> obstacles = {});

/// Background plus agents drawn far-to-near as filled discs at their head points.
Frame rasterize(std::span<const AgentPose> agents, const CameraModel& cam, const RenderSettings& settings,
                std::span<const Polygon> obstacles = {});

/// Independent per-pixel normal perturbation, rounded and clamped to [0, 255].
Frame add_gaussian_noise(const Frame& frame, double std_dev, Rng& rng);

void write_pgm(std::ostream& out, const Frame& frame);
void write_pgm(const std::filesystem::path& path, const Frame& frame);
Frame read_pgm(std::istream& in);

}  // namespace lcrowd
