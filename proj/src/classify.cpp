#include "lcrowd/classify.hpp"

#include "lcrowd/parallel.hpp"

#include "json.hpp"

#include <algorithm>
#include <map>
#include <ostream>

namespace lcrowd {

namespace {

constexpr double kDefaultBoundsSlack = 10.0;
// Samples this close to the final position at the end of a trajectory form the
// terminal dwell; windows starting there only see the goal estimate's error.
constexpr double kDwellRadius = 0.25;

// Field order of ParamVector.
enum ParamIndex { kNeighborDist = 0, kMaxNeighbors = 1, kHorizon = 2, kRadius = 3, kPrefSpeed = 4 };

// Coordinate-descent order: most identifiable first. pref_speed starts from the
// observed speed quantile and is refined with the rest.
constexpr std::array<int, 5> kDescentOrder{kRadius, kPrefSpeed, kHorizon, kNeighborDist, kMaxNeighbors};

// Searched jointly before the descent: their effects on avoidance overlap.
constexpr std::array<int, 3> kJointAxes{kRadius, kHorizon, kNeighborDist};

double& field(SimParams& p, int i) {
    switch (i) {
        case kNeighborDist: return p.neighbor_dist;
        case kMaxNeighbors: return p.max_neighbors;
        case kHorizon: return p.planning_horizon;
        case kRadius: return p.radius;
        default: return p.pref_speed;
    }
}

struct FitContext {
    int agent_id = 0;
    const Trajectory* self = nullptr;
    Environment env;
    Vec2 goal{0.0, 0.0};
    double dt = kDefaultDt;
    int horizon = 5;
    std::vector<std::vector<NeighborState>> neighbors;  // other agents at each sample's frame
    std::vector<std::size_t> window_starts;
};

const Trajectory& find_trajectory(const ObservedVideo& video, int agent_id) {
    for (const auto& t : video.trajectories) {
        if (t.agent_id == agent_id) return t;
    }
    throw Error(ErrorCode::InvalidArgument, "no trajectory for agent " + std::to_string(agent_id));
}

FitContext make_context(const ObservedVideo& video, int agent_id, const FitOptions& options) {
    FitContext ctx;
    ctx.agent_id = agent_id;
    ctx.self = &find_trajectory(video, agent_id);
    const auto& samples = ctx.self->samples;
    if (samples.size() < kMinFitSamples) {
        throw Error(ErrorCode::InsufficientData, "agent " + std::to_string(agent_id) + " has " +
                                                     std::to_string(samples.size()) + " samples");
    }
    if (!(video.dt > 0.0 && video.dt <= 0.5)) throw Error(ErrorCode::InvalidArgument, "dt must lie in (0, 0.5]");
    if (options.horizon < 1) throw Error(ErrorCode::InvalidArgument, "horizon must be >= 1");
    ctx.env = video.environment ? *video.environment : default_environment(video);
    ctx.goal = samples.back().position;
    ctx.dt = video.dt;
    ctx.horizon = options.horizon;

    // Agents farther than this from the observed position can never enter the
    // neighbor range during a window.
    const double reach = SimParams::kUpper[kNeighborDist] +
                         2.0 * options.horizon * video.dt * SimParams::kUpper[kPrefSpeed] + 1.0;
    std::map<std::int64_t, std::size_t> slot;
    for (std::size_t k = 0; k < samples.size(); ++k) slot.emplace(samples[k].frame, k);
    ctx.neighbors.resize(samples.size());
    for (const auto& t : video.trajectories) {
        if (t.agent_id == agent_id) continue;
        for (const auto& s : t.samples) {
            const auto it = slot.find(s.frame);
            if (it == slot.end() || (s.position - samples[it->second].position).norm() > reach) continue;
            ctx.neighbors[it->second].push_back({t.agent_id, s.position, s.velocity, 0.0});
        }
    }
    std::size_t dwell = samples.size();
    while (dwell > 0 && (samples[dwell - 1].position - ctx.goal).norm() <= kDwellRadius) --dwell;
    const auto h = static_cast<std::size_t>(options.horizon);
    for (std::size_t k = 0; k + h < samples.size() && k < dwell; ++k) {
        if (samples[k + h].frame - samples[k].frame == static_cast<std::int64_t>(h)) ctx.window_starts.push_back(k);
    }
    return ctx;
}

double residual(const FitContext& ctx, const SimParams& params) {
    const auto& s = ctx.self->samples;
    std::vector<NeighborState> others;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k : ctx.window_starts) {
        Vec2 pos = s[k].position;
        Vec2 vel = s[k].velocity;
        for (int j = 0; j < ctx.horizon; ++j) {
            const std::size_t at = k + static_cast<std::size_t>(j);
            others.assign(ctx.neighbors[at].begin(), ctx.neighbors[at].end());
            for (auto& n : others) n.radius = params.radius;
            Vec2 preferred = Vec2::Zero();
            const Vec2 to_goal = ctx.goal - pos;
            const double dist = to_goal.norm();
            if (dist > 1e-12) preferred = to_goal * (std::min(params.pref_speed, dist / ctx.dt) / dist);
            vel = adapt_velocity(ctx.agent_id, pos, vel, params, preferred, others, ctx.env, ctx.dt);
            pos = ctx.env.bounds.clamp(pos + vel * ctx.dt);
            sum += (pos - s[at + 1].position).squaredNorm();
            ++count;
        }
    }
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

double quantile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

// Candidate values for one parameter in a refinement pass.
std::vector<double> candidates(int i, double center, int pass, const FitOptions& options) {
    const double lo = SimParams::kLower[i], hi = SimParams::kUpper[i];
    const int g = options.grid_points;
    const double h0 = (hi - lo) / (g - 1);
    std::vector<double> out;
    if (pass == 0) {
        for (int k = 0; k < g; ++k) out.push_back(k + 1 == g ? hi : lo + k * h0);
    } else {
        const double h = h0 / std::pow(static_cast<double>((g - 1) / 2), pass);
        for (int k = -(g - 1) / 2; k <= (g - 1) / 2; ++k) {
            const double v = center + k * h;
            if (v >= lo - 1e-12 && v <= hi + 1e-12) out.push_back(std::clamp(v, lo, hi));
        }
    }
    if (i == kMaxNeighbors) {
        for (double& v : out) v = std::nearbyint(v);
        out.erase(std::unique(out.begin(), out.end()), out.end());
    }
    return out;
}

// Grid search over kJointAxes around `best` at the spacing of `pass`. Among
// near-ties the point closest to the current one wins.
void joint_search(const FitContext& ctx, int pass, const FitOptions& options, SimParams& best, double& best_r) {
    const SimParams start = best;
    const ParamVector origin = start.to_vector();
    const auto offset = [&](const SimParams& p) {
        const ParamVector x = p.to_vector();
        double d = 0.0;
        for (int i : kJointAxes) d += std::abs(x[i] - origin[i]) / (SimParams::kUpper[i] - SimParams::kLower[i]);
        return d;
    };
    const auto axis0 = candidates(kJointAxes[0], origin[kJointAxes[0]], pass, options);
    const auto axis1 = candidates(kJointAxes[1], origin[kJointAxes[1]], pass, options);
    const auto axis2 = candidates(kJointAxes[2], origin[kJointAxes[2]], pass, options);
    std::vector<std::pair<SimParams, double>> grid;
    grid.reserve(axis0.size() * axis1.size() * axis2.size());
    for (double a : axis0) {
        for (double b : axis1) {
            for (double c : axis2) {
                SimParams trial = start;
                field(trial, kJointAxes[0]) = a;
                field(trial, kJointAxes[1]) = b;
                field(trial, kJointAxes[2]) = c;
                grid.emplace_back(trial, residual(ctx, trial));
            }
        }
    }
    double lowest = best_r;
    for (const auto& entry : grid) lowest = std::min(lowest, entry.second);
    if (!(lowest < best_r - options.indifference)) return;
    double nearest = std::numeric_limits<double>::infinity();
    for (const auto& [p, r] : grid) {
        if (r < lowest + options.indifference && offset(p) < nearest) {
            nearest = offset(p);
            best = p;
            best_r = r;
        }
    }
}

}  // namespace

ObservedVideo make_observed_video(std::span<const TrajectoryRow> rows, double dt, std::optional<Environment> env) {
    ObservedVideo v;
    v.trajectories = group_trajectories(rows);
    v.dt = dt;
    v.environment = std::move(env);
    return v;
}

Environment default_environment(const ObservedVideo& video) {
    Vec2 lo = Vec2::Constant(std::numeric_limits<double>::infinity());
    Vec2 hi = -lo;
    for (const auto& t : video.trajectories) {
        for (const auto& s : t.samples) {
            lo = lo.cwiseMin(s.position);
            hi = hi.cwiseMax(s.position);
        }
    }
    if (!lo.allFinite()) {
        lo = Vec2::Zero();
        hi = Vec2::Zero();
    }
    Environment env;
    env.bounds = Rect{lo - Vec2::Constant(kDefaultBoundsSlack), hi + Vec2::Constant(kDefaultBoundsSlack)};
    return env;
}

double fit_residual(const ObservedVideo& video, int agent_id, const SimParams& params, const FitOptions& options) {
    return residual(make_context(video, agent_id, options), params);
}

ParamFit estimate_params(const ObservedVideo& video, int agent_id, const FitOptions& options) {
    if (options.grid_points < 3 || options.grid_points % 2 == 0 || options.passes < 0 || options.coarse_cycles < 1) {
        throw Error(ErrorCode::InvalidArgument, "grid_points must be odd and >= 3, coarse_cycles >= 1");
    }
    const FitContext ctx = make_context(video, agent_id, options);

    SimParams best = SimParams::reference();
    std::vector<double> speeds;
    speeds.reserve(ctx.self->samples.size());
    for (const auto& s : ctx.self->samples) speeds.push_back(s.velocity.norm());
    best.pref_speed = std::clamp(quantile(speeds, options.pref_speed_quantile), SimParams::kLower[kPrefSpeed],
                                 SimParams::kUpper[kPrefSpeed]);
    double best_r = residual(ctx, best);

    for (int pass = 0; pass < options.joint_passes; ++pass) joint_search(ctx, pass, options, best, best_r);

    // One coordinate sweep; pass 0 spans each full range, later passes refine.
    auto sweep = [&](int pass) {
        bool improved = false;
        for (int i : kDescentOrder) {
            for (double v : candidates(i, field(best, i), pass, options)) {
                if (v == field(best, i)) continue;
                SimParams trial = best;
                field(trial, i) = v;
                const double r = residual(ctx, trial);
                if (r < best_r - options.indifference) {
                    best = trial;
                    best_r = r;
                    improved = true;
                }
            }
        }
        return improved;
    };
    for (int cycle = 0; cycle < options.coarse_cycles && sweep(0); ++cycle) {
    }
    for (int pass = 1; pass <= options.passes; ++pass) sweep(pass);

    // Parameters the residual cannot see fall back to their reference values.
    SimParams reference = SimParams::reference();
    SimParams out = best;
    for (int i = 0; i < 5; ++i) {
        double lo = best_r, hi = best_r;
        for (double v : candidates(i, field(best, i), 0, options)) {
            SimParams trial = best;
            field(trial, i) = v;
            const double r = residual(ctx, trial);
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
        if (hi - lo < options.indifference) field(out, i) = field(reference, i);
    }
    return {out, residual(ctx, out)};
}

FitResult classify_video(const ObservedVideo& video, const ClassTable& table, int workers, const FitOptions& options) {
    if (table.empty()) throw Error(ErrorCode::EmptyTable, "class table is empty");
    std::vector<int> ids;
    FitResult result;
    for (const auto& t : video.trajectories) {
        if (t.samples.size() >= kMinFitSamples) {
            ids.push_back(t.agent_id);
        } else {
            result.skipped_agents.push_back(t.agent_id);
        }
    }
    if (ids.empty()) throw Error(ErrorCode::InsufficientData, "no trajectory has enough samples to fit");

    result.agents.resize(ids.size());
    parallel_for(ids.size(), workers, [&](std::size_t k) {
        const ParamFit fit = estimate_params(video, ids[k], options);
        AgentFit& a = result.agents[k];
        a.agent_id = ids[k];
        a.params = fit.params;
        a.residual = fit.residual;
        a.behavior = params_to_behavior(fit.params);
        a.argmax = classify_vector(a.behavior);
    });

    BehaviorVector sum = BehaviorVector::Zero();
    for (const auto& a : result.agents) {
        sum += a.behavior;
        ++result.votes[static_cast<std::size_t>(a.argmax)];
    }
    result.video_behavior = sum / static_cast<double>(result.agents.size());
    const auto [label, distance] = nearest_class(result.video_behavior, table);
    result.predicted = label;
    result.table_distance = distance;
    result.argmax_class = classify_vector(result.video_behavior);
    return result;
}

double ConfusionMatrix::overall_accuracy() const {
    const int total = counts.sum();
    return total > 0 ? static_cast<double>(counts.trace()) / total : 0.0;
}

ConfusionMatrix confusion_from_predictions(std::span<const std::pair<BehaviorClass, BehaviorClass>> truth_predicted) {
    ConfusionMatrix m;
    for (const auto& [truth, predicted] : truth_predicted) {
        ++m.counts(static_cast<int>(truth), static_cast<int>(predicted));
    }
    for (int r = 0; r < kBehaviorClassCount; ++r) {
        const int row = m.counts.row(r).sum();
        if (row > 0) m.rates.row(r) = m.counts.row(r).cast<double>() / row;
    }
    return m;
}

ConfusionMatrix evaluate(std::span<const LabeledVideo> videos, const ClassTable& table, int workers,
                         const FitOptions& options) {
    std::vector<std::pair<BehaviorClass, BehaviorClass>> pairs(videos.size());
    parallel_for(videos.size(), workers, [&](std::size_t i) {
        pairs[i] = {videos[i].truth, classify_video(videos[i].video, table, 1, options).predicted};
    });
    return confusion_from_predictions(pairs);
}

namespace {

nlohmann::json params_json(const SimParams& p) {
    return {{"neighbor_dist", p.neighbor_dist},
            {"max_neighbors", p.max_neighbors},
            {"planning_horizon", p.planning_horizon},
            {"radius", p.radius},
            {"pref_speed", p.pref_speed}};
}

nlohmann::json vector_json(const BehaviorVector& b) { return std::vector<double>(b.data(), b.data() + b.size()); }

}  // namespace

void write_fit_json(std::ostream& out, const FitResult& fit) {
    nlohmann::json agents = nlohmann::json::array();
    for (const auto& a : fit.agents) {
        agents.push_back({{"agent_id", a.agent_id},
                          {"params", params_json(a.params)},
                          {"residual", a.residual},
                          {"behavior", vector_json(a.behavior)},
                          {"argmax_class", to_string(a.argmax)}});
    }
    nlohmann::json votes = nlohmann::json::object();
    for (BehaviorClass c : kBehaviorClasses) votes[std::string(to_string(c))] = fit.votes[static_cast<std::size_t>(c)];
    const nlohmann::json doc{{"agents", agents},
                             {"skipped_agents", fit.skipped_agents},
                             {"video_behavior", vector_json(fit.video_behavior)},
                             {"predicted_class", to_string(fit.predicted)},
                             {"nearest_table_distance", fit.table_distance},
                             {"argmax_class", to_string(fit.argmax_class)},
                             {"votes", votes}};
    out << doc.dump(1) << '\n';
}

void write_confusion_json(std::ostream& out, const ConfusionMatrix& m) {
    nlohmann::json classes = nlohmann::json::array(), rates = nlohmann::json::array(),
                   counts = nlohmann::json::array(), diagonal = nlohmann::json::object();
    for (BehaviorClass c : kBehaviorClasses) {
        const int r = static_cast<int>(c);
        classes.push_back(to_string(c));
        std::vector<double> rr(kBehaviorClassCount);
        std::vector<int> cr(kBehaviorClassCount);
        for (int k = 0; k < kBehaviorClassCount; ++k) {
            rr[k] = m.rates(r, k);
            cr[k] = m.counts(r, k);
        }
        rates.push_back(rr);
        counts.push_back(cr);
        diagonal[std::string(to_string(c))] = m.rates(r, r);
    }
    const nlohmann::json doc{{"classes", classes},
                             {"matrix", rates},
                             {"counts", counts},
                             {"per_class_accuracy", diagonal},
                             {"overall_accuracy", m.overall_accuracy()}};
    out << doc.dump(1) << '\n';
}

}  // namespace lcrowd
