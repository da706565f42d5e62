#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "popfrac/metrics.hpp"
#include "popfrac/pipeline.hpp"
#include "popfrac/thresholding.hpp"

namespace popfrac {

struct LevelPoint {
    std::string id;
    double fraction = 0;
    double human_score = 0;
    BinaryLabel truth = BinaryLabel::non_populist;
    BinaryLabel predicted = BinaryLabel::non_populist;
};

struct LevelReport {
    std::string level;  // "speeches" or "speakers"
    LevelEvaluation evaluation;
    std::vector<LevelPoint> points;
};

struct EvaluationReport {
    std::string corpus_name;
    ThresholdMode mode = ThresholdMode::bootstrap;
    int stump_runs = kDefaultStumpRuns;
    std::uint64_t seed = 0;
    std::size_t n_sentences = 0;
    std::size_t n_populist_sentences = 0;
    double populist_percentage = 0;
    LevelReport speeches;
    LevelReport speakers;
};

/// Stump fitting and binary metrics at speech and speaker level. The two
/// levels use distinct seeds derived from `seed`.
EvaluationReport evaluate_predictions(const PipelineResult& result, ThresholdMode mode,
                                      int runs = kDefaultStumpRuns, std::uint64_t seed = 0,
                                      int folds = kDefaultFolds);

nlohmann::json to_json(const EvaluationReport& report);

// Standalone SVG documents. Output depends only on the arguments.
std::string confusion_svg(const std::string& title, const ConfusionMatrix& cm);
std::string scatter_svg(const std::string& title, std::span<const std::pair<double, double>> points,
                        std::optional<double> r_squared);
std::string histogram_svg(const std::string& title, std::span<const double> scores);

struct CurvePoint {
    int count = 0;
    double accuracy = 0;
    double f1 = 0;
    double mcc = 0;
};

/// Three side-by-side panels (accuracy, F1, MCC) against sentences per class.
std::string sparsity_svg(std::span<const CurvePoint> curve);

struct RenderedFile {
    std::string name;
    std::string content;
};

/// Renders artifacts (JSON documents with a "kind" of evaluation, sparsity,
/// cross_context, grid or metrics_table) into report.md plus SVG figures.
/// report.md comes first; figure names are derived from artifact content.
std::vector<RenderedFile> render_report(std::span<const nlohmann::json> artifacts);

void write_report(std::span<const nlohmann::json> artifacts, const std::filesystem::path& out_dir);

}  // namespace popfrac
