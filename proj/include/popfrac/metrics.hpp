#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include <nlohmann/json.hpp>

#include "popfrac/corpus.hpp"

namespace popfrac {

/// Binary confusion counts with populist as the positive class.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct ClassificationMetrics {
    ConfusionMatrix cm;
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double f2 = 0;
    double mcc = 0;
};

ConfusionMatrix confusion(std::span<const BinaryLabel> predicted, std::span<const BinaryLabel> truth);

/// (1 + b^2) P R / (b^2 P + R), 0 when the denominator vanishes.
double f_beta(double precision, double recall, double beta);

/// Empty denominators yield 0 for every ratio, including MCC.
ClassificationMetrics classification_metrics(const ConfusionMatrix& cm);

/// Probability that a random positive outscores a random negative, ties
/// counting one half. Throws Error(invalid_argument) unless both classes
/// are present.
double auroc(std::span<const double> scores, std::span<const BinaryLabel> truth);

/// Squared Pearson correlation. Throws Error(invalid_argument) for fewer
/// than two points or a constant series.
double r_squared(std::span<const double> x, std::span<const double> y);

/// Flat object: n, accuracy, precision, recall, f1, f2, auroc, mcc, plus the
/// confusion counts. auroc is null when undefined.
nlohmann::json to_json(const ClassificationMetrics& m, std::optional<double> auroc_value);

}  // namespace popfrac
