#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "popfrac/backend.hpp"
#include "popfrac/pipeline.hpp"
#include "popfrac/thresholding.hpp"

namespace popfrac::cli {

/// Values given on the command line; unset means "not given".
struct FlagValues {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    std::optional<std::string> backend;
    std::optional<std::string> threshold_mode;
    std::optional<double> match_threshold;
    std::optional<std::string> unit_kind;
    std::optional<int> stump_runs;
    std::optional<int> folds;
    std::optional<int> repetitions;
    std::optional<std::vector<int>> counts;
};

/// Effective settings after merging the config file and flags.
struct Settings {
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    BackendConfig backend;
    ThresholdMode threshold_mode = ThresholdMode::bootstrap;
    double match_threshold = kDefaultMatchThreshold;
    UnitKind unit_kind = UnitKind::term;
    int stump_runs = kDefaultStumpRuns;
    int folds = kDefaultFolds;
    int repetitions = 10;
    std::vector<int> counts;
};

/// Config file keys: seed, workers, threshold_mode, match_threshold,
/// unit_kind, stump_runs, folds, repetitions, sparsity_counts, and a
/// "backend" object with BackendConfig keys. A setting given both in the
/// file and as a flag must agree, otherwise Error(invalid_argument).
Settings resolve_settings(const std::optional<std::filesystem::path>& config_path, const FlagValues& flags);

}  // namespace popfrac::cli
