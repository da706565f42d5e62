#include "popfrac/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "popfrac/error.hpp"

namespace popfrac {

ConfusionMatrix confusion(std::span<const BinaryLabel> predicted, std::span<const BinaryLabel> truth) {
    require(predicted.size() == truth.size(), "confusion: prediction and truth lengths differ");
    require(!truth.empty(), "confusion: no labels");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predicted[i] == BinaryLabel::populist;
        const bool t = truth[i] == BinaryLabel::populist;
        if (p && t) ++cm.tp;
        else if (p) ++cm.fp;
        else if (t) ++cm.fn;
        else ++cm.tn;
    }
    return cm;
}

double f_beta(double precision, double recall, double beta) {
    const double b2 = beta * beta;
    const double denom = b2 * precision + recall;
    return denom > 0 ? (1 + b2) * precision * recall / denom : 0.0;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& cm) {
    require(cm.total() >= 1, "classification_metrics: empty confusion matrix");
    const double tp = static_cast<double>(cm.tp);
    const double fp = static_cast<double>(cm.fp);
    const double fn = static_cast<double>(cm.fn);
    const double tn = static_cast<double>(cm.tn);

    ClassificationMetrics m;
    m.cm = cm;
    m.accuracy = (tp + tn) / static_cast<double>(cm.total());
    m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    m.f1 = f_beta(m.precision, m.recall, 1.0);
    m.f2 = f_beta(m.precision, m.recall, 2.0);
    const double denom = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
    m.mcc = denom > 0 ? (tp * tn - fp * fn) / denom : 0.0;
    return m;
}

double auroc(std::span<const double> scores, std::span<const BinaryLabel> truth) {
    require(scores.size() == truth.size(), "auroc: score and truth lengths differ");
    const auto n_pos = static_cast<std::size_t>(
        std::count(truth.begin(), truth.end(), BinaryLabel::populist));
    const std::size_t n_neg = truth.size() - n_pos;
    if (n_pos == 0 || n_neg == 0) fail(ErrorKind::invalid_argument, "AuROC undefined: single-class truth");

    // Mann-Whitney U from mid-ranks. Ranks are kept doubled so every
    // quantity stays an exact integer.
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::uint64_t twice_rank_sum = 0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
        const std::uint64_t twice_mid_rank = i + 1 + j;  // 2 * ((i + 1) + j) / 2
        for (std::size_t k = i; k < j; ++k) {
            if (truth[order[k]] == BinaryLabel::populist) twice_rank_sum += twice_mid_rank;
        }
        i = j;
    }
    const std::uint64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double r_squared(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size(), "r_squared: lengths differ");
    require(x.size() >= 2, "r_squared: need at least two points");
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0, syy = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx <= 0 || syy <= 0) fail(ErrorKind::invalid_argument, "correlation undefined: constant series");
    return (sxy * sxy) / (sxx * syy);
}

nlohmann::json to_json(const ClassificationMetrics& m, std::optional<double> auroc_value) {
    return {
        {"n", m.cm.total()},
        {"accuracy", m.accuracy},
        {"precision", m.precision},
        {"recall", m.recall},
        {"f1", m.f1},
        {"f2", m.f2},
        {"auroc", auroc_value ? nlohmann::json(*auroc_value) : nlohmann::json(nullptr)},
        {"mcc", m.mcc},
        {"tp", m.cm.tp},
        {"fp", m.cm.fp},
        {"fn", m.cm.fn},
        {"tn", m.cm.tn},
    };
}

}  // namespace popfrac
