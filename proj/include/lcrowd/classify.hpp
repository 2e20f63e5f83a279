#pragma once

// Inverse pipeline: fit simulation parameters to observed trajectories,
// aggregate them into a video behavior vector and classify it.

#include "lcrowd/behavior_map.hpp"
#include "lcrowd/common.hpp"
#include "lcrowd/sim_core.hpp"

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace lcrowd {

inline constexpr std::size_t kMinFitSamples = 10;

struct ObservedVideo {
    std::vector<Trajectory> trajectories;
    double dt = kDefaultDt;
    std::optional<Environment> environment;
};

ObservedVideo make_observed_video(std::span<const TrajectoryRow> rows, double dt,
                                  std::optional<Environment> env = std::nullopt);

/// Bounds enclosing every sample with enough slack that walls never bind.
Environment default_environment(const ObservedVideo& video);

struct FitOptions {
    int grid_points = 7;
    int joint_passes = 2;        // joint grids over radius, horizon and neighbor_dist
    int coarse_cycles = 3;       // full-range coordinate sweeps, repeated while they improve
    int passes = 3;              // refinement sweeps, each a third of the previous spacing
    int horizon = 5;             // steps re-simulated from each observed state
    double indifference = 1e-9;  // residual spread below which a parameter is unidentified
    double pref_speed_quantile = 0.9;
};

struct ParamFit {
    SimParams params;
    double residual = 0.0;  // mean squared position error, m^2
};

/// Mean squared position error of `params` over every horizon window of the
/// agent's trajectory, other agents replayed from their observations. Other
/// agents are given the candidate radius.
double fit_residual(const ObservedVideo& video, int agent_id, const SimParams& params, const FitOptions& options = {});

/// pref_speed from the observed speed quantile, the other four parameters by
/// coordinate descent over a refined grid. Throws InsufficientData.
ParamFit estimate_params(const ObservedVideo& video, int agent_id, const FitOptions& options = {});

struct AgentFit {
    int agent_id = 0;
    SimParams params;
    double residual = 0.0;
    BehaviorVector behavior = BehaviorVector::Zero();
    BehaviorClass argmax = BehaviorClass::Aggressive;
};

struct FitResult {
    std::vector<AgentFit> agents;
    std::vector<int> skipped_agents;  // fewer than kMinFitSamples samples
    BehaviorVector video_behavior = BehaviorVector::Zero();
    BehaviorClass predicted = BehaviorClass::Aggressive;
    double table_distance = 0.0;
    BehaviorClass argmax_class = BehaviorClass::Aggressive;  // diagnostic
    std::array<int, kBehaviorClassCount> votes{};           // per-agent argmax counts
};

/// Throws InsufficientData when no agent can be fitted, EmptyTable on an empty table.
FitResult classify_video(const ObservedVideo& video, const ClassTable& table, int workers = 1,
                         const FitOptions& options = {});

struct ConfusionMatrix {
    Eigen::Matrix<double, kBehaviorClassCount, kBehaviorClassCount> rates =
        Eigen::Matrix<double, kBehaviorClassCount, kBehaviorClassCount>::Zero();
    Eigen::Matrix<int, kBehaviorClassCount, kBehaviorClassCount> counts =
        Eigen::Matrix<int, kBehaviorClassCount, kBehaviorClassCount>::Zero();

    double accuracy(BehaviorClass c) const { return rates(static_cast<int>(c), static_cast<int>(c)); }
    double overall_accuracy() const;
};

ConfusionMatrix confusion_from_predictions(std::span<const std::pair<BehaviorClass, BehaviorClass>> truth_predicted);

struct LabeledVideo {
    ObservedVideo video;
    BehaviorClass truth = BehaviorClass::Aggressive;
};

/// Classifies every video (in parallel across videos) and tabulates the results.
ConfusionMatrix evaluate(std::span<const LabeledVideo> videos, const ClassTable& table, int workers = 1,
                         const FitOptions& options = {});

void write_fit_json(std::ostream& out, const FitResult& fit);
void write_confusion_json(std::ostream& out, const ConfusionMatrix& m);

}  // namespace lcrowd
