#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "popfrac/backend.hpp"
#include "popfrac/corpus.hpp"
#include "popfrac/metrics.hpp"
#include "popfrac/pipeline.hpp"
#include "popfrac/thresholding.hpp"

namespace popfrac {

/// Sentences per class used by the data-sparsity curve.
inline const std::vector<int> kDefaultSparsityCounts = {1000, 400, 250, 150, 100, 90, 80, 70, 60, 50, 40, 30};

struct SparsityRow {
    int sentences_per_class = 0;
    std::array<std::size_t, kNumCategories> sample_sizes{};
    SentenceMetrics metrics;
};

/// For each count N: sample exactly N sentences of every class without
/// replacement (seeded per N) and run holdout_eval. Rows follow `counts`.
/// Throws Error(invalid_argument) naming the class when N exceeds what is
/// available, and for duplicate or non-positive counts.
std::vector<SparsityRow> sparsity_experiment(std::span<const TrainingSentence> training,
                                             std::span<const int> counts, const Backend& backend,
                                             std::uint64_t seed, std::size_t workers = 1);
std::vector<SparsityRow> sparsity_experiment(std::span<const TrainingSentence> training,
                                             std::span<const int> counts, const BackendConfig& config,
                                             std::uint64_t seed, std::size_t workers = 1);

/// The exact subsample used for one sparsity row.
std::vector<TrainingSentence> sparsity_sample(std::span<const TrainingSentence> training, int per_class,
                                              std::uint64_t seed);

struct CrossContextOptions {
    double match_threshold = 0.8;
    UnitKind unit_kind = UnitKind::term;
    ThresholdMode threshold_mode = ThresholdMode::bootstrap;
    int stump_runs = kDefaultStumpRuns;
    std::size_t workers = 1;
};

struct CrossContextReport {
    std::string train_corpus;
    std::string test_corpus;
    std::optional<SpeechType> speech_type_filter;
    std::size_t n_speeches = 0;
    std::size_t n_sentences = 0;
    std::size_t n_populist_sentences = 0;
    double populist_percentage = 0;  // in [0, 100]
    LevelEvaluation evaluation;
    /// True when training sentences matched test speeches and the run fell
    /// back to leakage-safe per-unit training (train corpus == test corpus).
    bool leakage_safe_units = false;
};

/// Trains once on `train_set` and scores every (optionally filtered) test
/// speech; speech labels come from a stump fit on the test speeches. The
/// training set is matched against the test corpus first: matches are only
/// allowed when both corpora carry the same name, in which case the run is
/// the standard per-unit pipeline.
CrossContextReport cross_context(std::span<const TrainingSentence> train_set, const std::string& train_corpus,
                                 const Corpus& test_corpus, const BackendConfig& config,
                                 std::optional<SpeechType> speech_type_filter, std::uint64_t seed,
                                 const CrossContextOptions& options = {});

struct MetricSummary {
    SentenceMetrics mean;
    SentenceMetrics std;  // sample standard deviation, 0 for one repetition
};

struct GridRow {
    BackendConfig config;
    std::string label;
    int repetitions = 0;
    std::vector<SentenceMetrics> runs;
    MetricSummary summary;
};

inline constexpr int kDefaultGridRepetitions = 10;

/// Runs holdout_eval `repetitions` times per variant on one shared split,
/// with derived training seeds. One row per variant, in input order.
std::vector<GridRow> hyperparameter_grid(std::span<const BackendConfig> variants,
                                         std::span<const TrainingSentence> labeled, int repetitions,
                                         std::uint64_t seed, std::size_t workers = 1);

/// All eight on/off combinations of the variant flags over `base`, in the
/// order baseline, differential head, alternate model, end-to-end, then the
/// pairs and the triple.
std::vector<BackendConfig> all_variant_configs(const BackendConfig& base);

MetricSummary summarize(std::span<const SentenceMetrics> runs);

nlohmann::json to_json(const SparsityRow& row);
nlohmann::json to_json(const CrossContextReport& report);
nlohmann::json to_json(const GridRow& row);

/// Self-describing artifacts (a "kind" field plus rows) consumed by the
/// report renderer.
nlohmann::json sparsity_artifact(std::span<const SparsityRow> rows, std::uint64_t seed);
nlohmann::json cross_context_artifact(std::span<const CrossContextReport> reports, std::uint64_t seed);
nlohmann::json grid_artifact(std::span<const GridRow> rows, std::uint64_t seed);

void write_sparsity_csv(std::span<const SparsityRow> rows, const std::filesystem::path& path);
void write_cross_context_csv(std::span<const CrossContextReport> reports, const std::filesystem::path& path);
void write_grid_csv(std::span<const GridRow> rows, const std::filesystem::path& path);

/// Fixed-point rendering used in every CSV and report table.
std::string format_number(double value, int decimals = 4);

}  // namespace popfrac
