#include "lcrowd/behavior_map.hpp"

#include "json.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <istream>
#include <ostream>

namespace lcrowd {

namespace {

constexpr std::array<std::string_view, 6> kClassNames{"aggressive", "assertive", "shy",
                                                      "active",     "tense",     "impulsive"};

BehaviorMatrix make_behavior_matrix() {
    BehaviorMatrix a;
    // clang-format off
    a << -0.02,  0.32,  0.13, -0.41,  1.02,
          0.03,  0.22,  0.11, -0.28,  1.05,
         -0.04, -0.08,  0.02,  0.58, -0.88,
         -0.06,  0.04,  0.04, -0.16,  1.07,
          0.10,  0.07, -0.08,  0.19,  0.15,
          0.03, -0.15,  0.03, -0.23,  0.23;
    // clang-format on
    return a;
}

const Eigen::Matrix<double, 5, 6>& pseudo_inverse() {
    static const Eigen::Matrix<double, 5, 6> pinv = [] {
        const Eigen::JacobiSVD<Eigen::MatrixXd> svd(Eigen::MatrixXd(behavior_matrix()),
                                                    Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::VectorXd s = svd.singularValues();
        const double tol = 1e-12 * s[0];
        Eigen::VectorXd inv_s(s.size());
        for (Eigen::Index i = 0; i < s.size(); ++i) inv_s[i] = s[i] > tol ? 1.0 / s[i] : 0.0;
        return Eigen::Matrix<double, 5, 6>(svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose());
    }();
    return pinv;
}

}  // namespace

std::string_view to_string(BehaviorClass c) { return kClassNames[static_cast<std::size_t>(c)]; }

std::optional<BehaviorClass> parse_behavior_class(std::string_view name) {
    for (std::size_t i = 0; i < kClassNames.size(); ++i) {
        if (kClassNames[i] == name) return static_cast<BehaviorClass>(i);
    }
    return std::nullopt;
}

const BehaviorMatrix& behavior_matrix() {
    static const BehaviorMatrix a = make_behavior_matrix();
    return a;
}

ParamVector normalize_params(const SimParams& p) {
    ParamVector x = p.to_vector();
    for (int i = 0; i < 5; ++i) x[i] = (x[i] - NormalizationSpec::kOffsets[i]) / NormalizationSpec::kScales[i];
    return x;
}

SimParams denormalize_params(const ParamVector& x) {
    ParamVector v;
    for (int i = 0; i < 5; ++i) v[i] = x[i] * NormalizationSpec::kScales[i] + NormalizationSpec::kOffsets[i];
    return SimParams::from_vector(v);
}

BehaviorVector params_to_behavior(const SimParams& p) { return behavior_matrix() * normalize_params(p); }

ParamVector behavior_to_normalized(const BehaviorVector& b) { return pseudo_inverse() * b; }

SimParams behavior_to_params(const BehaviorVector& b) {
    return denormalize_params(behavior_to_normalized(b)).clamped();
}

BehaviorClass classify_vector(const BehaviorVector& b) {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < 6; ++i) {
        if (b[i] > b[best]) best = i;
    }
    return static_cast<BehaviorClass>(best);
}

double top_two_gap(const BehaviorVector& b) {
    std::array<double, 6> v{};
    for (int i = 0; i < 6; ++i) v[i] = b[i];
    std::partial_sort(v.begin(), v.begin() + 2, v.end(), std::greater<>());
    return v[0] - v[1];
}

SimParams sample_params_uniform(Rng& rng) {
    const auto& lo = SimParams::kLower;
    const auto& hi = SimParams::kUpper;
    SimParams p;
    p.neighbor_dist = rng.uniform(lo[0], hi[0]);
    p.max_neighbors = static_cast<double>(rng.uniform_int(static_cast<std::int64_t>(lo[1]),
                                                          static_cast<std::int64_t>(hi[1])));
    p.planning_horizon = rng.uniform(lo[2], hi[2]);
    p.radius = rng.uniform(lo[3], hi[3]);
    p.pref_speed = rng.uniform(lo[4], hi[4]);
    return p;
}

SimParams sample_class_params(BehaviorClass label, double margin, Rng& rng, std::size_t max_draws) {
    for (std::size_t i = 0; i < max_draws; ++i) {
        const SimParams p = sample_params_uniform(rng);
        const BehaviorVector b = params_to_behavior(p);
        if (classify_vector(b) == label && top_two_gap(b) >= margin) return p;
    }
    throw Error(ErrorCode::SamplingExhausted,
                "no parameters of class " + std::string(to_string(label)) + " at the requested margin");
}

ClassTable::ClassTable(std::vector<ClassEntry> entries) : entries_(std::move(entries)) {
    std::vector<KdTree<6>::Point> points;
    points.reserve(entries_.size());
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        const auto& e = entries_[i];
        if (!e.params.valid() || !e.behavior.allFinite()) {
            throw Error(ErrorCode::InvalidArgument, "class table entry " + std::to_string(i) + " is not finite");
        }
        const BehaviorVector expected = params_to_behavior(e.params);
        if ((expected - e.behavior).cwiseAbs().maxCoeff() > 1e-9) {
            throw Error(ErrorCode::InvalidArgument,
                        "class table entry " + std::to_string(i) + ": behavior does not match params");
        }
        if (classify_vector(e.behavior) != e.label) {
            throw Error(ErrorCode::InvalidArgument,
                        "class table entry " + std::to_string(i) + ": class is not the argmax");
        }
        points.push_back(e.behavior);
    }
    index_ = KdTree<6>(std::move(points));
}

KdTree<6>::Hit ClassTable::nearest(const BehaviorVector& b) const {
    if (empty()) throw Error(ErrorCode::EmptyTable, "class table has no entries");
    return index_.nearest(b);
}

ClassTable build_class_table(std::size_t samples_per_class, double margin, Rng& rng) {
    if (samples_per_class < 1) throw Error(ErrorCode::InvalidArgument, "samples_per_class must be >= 1");
    if (!(margin >= 0.0)) throw Error(ErrorCode::InvalidArgument, "margin must be >= 0");

    constexpr std::size_t kProbeDraws = 1'000'000;
    constexpr std::size_t kMaxDraws = 1'000'000'000;
    std::array<std::vector<ClassEntry>, 6> buckets;
    std::size_t full = 0;
    for (std::size_t draw = 0; full < buckets.size(); ++draw) {
        if (draw == kProbeDraws || draw == kMaxDraws) {
            for (std::size_t c = 0; c < buckets.size(); ++c) {
                if (buckets[c].empty() || draw == kMaxDraws) {
                    throw Error(ErrorCode::SamplingExhausted,
                                "class " + std::string(kClassNames[c]) + " accepted no samples at margin " +
                                    std::to_string(margin));
                }
            }
        }
        const SimParams p = sample_params_uniform(rng);
        const BehaviorVector b = params_to_behavior(p);
        const BehaviorClass c = classify_vector(b);
        auto& bucket = buckets[static_cast<std::size_t>(c)];
        if (bucket.size() >= samples_per_class || top_two_gap(b) < margin) continue;
        bucket.push_back({p, b, c});
        if (bucket.size() == samples_per_class) ++full;
    }
    std::vector<ClassEntry> entries;
    entries.reserve(samples_per_class * buckets.size());
    for (auto& bucket : buckets) entries.insert(entries.end(), bucket.begin(), bucket.end());
    return ClassTable(std::move(entries));
}

std::pair<BehaviorClass, double> nearest_class(const BehaviorVector& b, const ClassTable& table) {
    const auto hit = table.nearest(b);
    return {table.entries()[hit.index].label, std::sqrt(hit.distance_sq)};
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json params_json(const SimParams& p) {
    return {{"neighbor_dist", p.neighbor_dist},
            {"max_neighbors", p.max_neighbors},
            {"planning_horizon", p.planning_horizon},
            {"radius", p.radius},
            {"pref_speed", p.pref_speed}};
}

}  // namespace

void save_class_table(std::ostream& out, const ClassTable& table) {
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& e : table.entries()) {
        entries.push_back({{"params", params_json(e.params)},
                           {"behavior", std::vector<double>(e.behavior.data(), e.behavior.data() + 6)},
                           {"class", std::string(to_string(e.label))}});
    }
    const nlohmann::json doc{{"schema_version", kClassTableSchemaVersion}, {"entries", entries}};
    out << doc.dump(1) << '\n';
}

ClassTable load_class_table(std::istream& in) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::ParseError, std::string("class table: ") + e.what());
    }
    try {
        if (doc.at("schema_version").get<int>() != kClassTableSchemaVersion) {
            throw Error(ErrorCode::ParseError, "class table: unsupported schema_version");
        }
        std::vector<ClassEntry> entries;
        for (const auto& j : doc.at("entries")) {
            ClassEntry e;
            const auto& p = j.at("params");
            e.params = {p.at("neighbor_dist").get<double>(), p.at("max_neighbors").get<double>(),
                        p.at("planning_horizon").get<double>(), p.at("radius").get<double>(),
                        p.at("pref_speed").get<double>()};
            const auto b = j.at("behavior").get<std::vector<double>>();
            if (b.size() != 6) throw Error(ErrorCode::ParseError, "class table: behavior must have 6 values");
            for (int i = 0; i < 6; ++i) e.behavior[i] = b[static_cast<std::size_t>(i)];
            const auto label = parse_behavior_class(j.at("class").get<std::string>());
            if (!label) throw Error(ErrorCode::ParseError, "class table: unknown class");
            e.label = *label;
            entries.push_back(e);
        }
        return ClassTable(std::move(entries));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseError, std::string("class table: ") + e.what());
    } catch (const Error& e) {
        if (e.code() == ErrorCode::ParseError) throw;
        throw Error(ErrorCode::ParseError, e.what());
    }
}

}  // namespace lcrowd
