#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "popfrac/corpus.hpp"
#include "popfrac/metrics.hpp"

namespace popfrac {

/// How a stump's threshold is chosen: modal value over bootstrap refits,
/// or a single fit on the data as given.
enum class StumpFit { bootstrap, deterministic };

/// Evaluation protocol: the two in-sample fits above, or out-of-fold
/// classification with stumps fit on the remaining folds.
enum class ThresholdMode { bootstrap, deterministic, cv };

std::string_view to_string(ThresholdMode mode);
ThresholdMode parse_threshold_mode(std::string_view text);

enum class Degeneracy { none, all_populist, all_non_populist };

/// Depth-one decision rule: populist iff fraction >= threshold.
struct Stump {
    double threshold = 0.5;
    Degeneracy degenerate = Degeneracy::none;
    StumpFit fit = StumpFit::bootstrap;
    int runs = 0;
    std::uint64_t seed = 0;
    std::map<double, int> histogram;  // threshold -> number of runs choosing it
    int modal_count = 0;
};

inline constexpr int kDefaultStumpRuns = 100;

/// Gini-optimal midpoint between consecutive distinct fractions; ties go to
/// the smaller threshold. nullopt when only one class or one distinct value
/// is present.
std::optional<double> best_split(std::span<const double> fractions, std::span<const BinaryLabel> labels);

/// Bootstrap mode refits on `runs` seeded resamples and keeps the modal
/// threshold (ties to the smaller). Single-class input yields a degenerate
/// stump. Throws Error(invalid_argument) on length mismatch, fewer than two
/// points or a fraction outside [0, 1].
Stump fit_stump(std::span<const double> fractions, std::span<const BinaryLabel> labels,
                int runs = kDefaultStumpRuns, std::uint64_t seed = 0, StumpFit fit = StumpFit::bootstrap);

/// Throws Error(invalid_argument) for a fraction outside [0, 1].
BinaryLabel classify(const Stump& stump, double fraction);

nlohmann::json to_json(const Stump& stump);
Stump stump_from_json(const nlohmann::json& j);

inline constexpr int kDefaultFolds = 5;

/// Out-of-fold labels: items are assigned to stratified folds by seeded
/// shuffle and each fold is classified by a stump fit on the others.
std::vector<BinaryLabel> cross_validated_labels(std::span<const double> fractions,
                                                std::span<const BinaryLabel> labels, int folds,
                                                int runs, std::uint64_t seed);

/// Binary evaluation of one aggregation level (speeches or speakers).
struct LevelEvaluation {
    Stump stump;
    std::vector<BinaryLabel> truth;
    std::vector<BinaryLabel> predicted;
    ClassificationMetrics metrics;
    std::optional<double> auroc;      // undefined with single-class truth
    std::optional<double> r_squared;  // fraction vs continuous human grade
};

LevelEvaluation evaluate_level(std::span<const double> fractions, std::span<const double> human_scores,
                               ThresholdMode mode, int runs, std::uint64_t seed,
                               int folds = kDefaultFolds);

nlohmann::json to_json(const LevelEvaluation& evaluation);

}  // namespace popfrac
