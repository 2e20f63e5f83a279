#pragma once

// Linear map between the five simulation parameters and six behavior
// adjectives, its least-squares inverse, and the nearest-neighbor class table.

#include "lcrowd/common.hpp"
#include "lcrowd/kd_tree.hpp"
#include "lcrowd/sim_core.hpp"

#include <Eigen/Core>

#include <array>
#include <iosfwd>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace lcrowd {

/// Intensities in the order aggressive, assertive, shy, active, tense, impulsive.
using BehaviorVector = Eigen::Matrix<double, 6, 1>;
using BehaviorMatrix = Eigen::Matrix<double, 6, 5>;

enum class BehaviorClass { Aggressive = 0, Assertive, Shy, Active, Tense, Impulsive };

inline constexpr int kBehaviorClassCount = 6;

inline constexpr std::array<BehaviorClass, kBehaviorClassCount> kBehaviorClasses{
    BehaviorClass::Aggressive, BehaviorClass::Assertive, BehaviorClass::Shy,
    BehaviorClass::Active,     BehaviorClass::Tense,     BehaviorClass::Impulsive};

std::string_view to_string(BehaviorClass c);
std::optional<BehaviorClass> parse_behavior_class(std::string_view name);

struct NormalizationSpec {
    static constexpr std::array<double, 5> kOffsets{15.0, 10.0, 30.0, 0.8, 1.4};
    static constexpr std::array<double, 5> kScales{13.5, 49.5, 14.5, 0.85, 0.5};
};

/// Rows: adjectives; columns: SimParams fields in declaration order.
const BehaviorMatrix& behavior_matrix();

ParamVector normalize_params(const SimParams& p);
SimParams denormalize_params(const ParamVector& x);

BehaviorVector params_to_behavior(const SimParams& p);

/// Minimum-norm least-squares solution of behavior_matrix() * x = b (normalized units).
ParamVector behavior_to_normalized(const BehaviorVector& b);

/// De-normalized least-squares inverse, clamped to the SimParams ranges.
SimParams behavior_to_params(const BehaviorVector& b);

/// Argmax component; ties go to the earlier class.
BehaviorClass classify_vector(const BehaviorVector& b);

/// Difference between the largest and second-largest component.
double top_two_gap(const BehaviorVector& b);

/// Uniform draw over the SimParams ranges; max_neighbors is drawn as an integer.
SimParams sample_params_uniform(Rng& rng);

/// Rejection-samples parameters whose class is `label` with top-two gap >= margin.
/// Throws SamplingExhausted when nothing is accepted within `max_draws`.
SimParams sample_class_params(BehaviorClass label, double margin, Rng& rng, std::size_t max_draws = 1'000'000);

struct ClassEntry {
    SimParams params;
    BehaviorVector behavior = BehaviorVector::Zero();
    BehaviorClass label = BehaviorClass::Aggressive;
};

/// Immutable (params, behavior, class) table indexed by a kd-tree over behavior.
class ClassTable {
public:
    ClassTable() = default;
    /// Validates every entry (behavior and class must match the params).
    explicit ClassTable(std::vector<ClassEntry> entries);

    const std::vector<ClassEntry>& entries() const { return entries_; }
    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    /// Entry index and squared distance of the nearest entry.
    KdTree<6>::Hit nearest(const BehaviorVector& b) const;

private:
    std::vector<ClassEntry> entries_;
    KdTree<6> index_;
};

ClassTable build_class_table(std::size_t samples_per_class, double margin, Rng& rng);

/// Class of the nearest table entry and its Euclidean distance. Throws EmptyTable.
std::pair<BehaviorClass, double> nearest_class(const BehaviorVector& b, const ClassTable& table);

inline constexpr int kClassTableSchemaVersion = 1;

void save_class_table(std::ostream& out, const ClassTable& table);
/// Throws ParseError on malformed input or when entries violate the table invariants.
ClassTable load_class_table(std::istream& in);

}  // namespace lcrowd
