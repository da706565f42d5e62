#include "popfrac/thresholding.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "popfrac/error.hpp"
#include "popfrac/random.hpp"

namespace popfrac {

std::string_view to_string(ThresholdMode mode) {
    switch (mode) {
        case ThresholdMode::bootstrap: return "bootstrap";
        case ThresholdMode::deterministic: return "deterministic";
        case ThresholdMode::cv: return "cv";
    }
    return "bootstrap";
}

ThresholdMode parse_threshold_mode(std::string_view text) {
    if (text == "bootstrap") return ThresholdMode::bootstrap;
    if (text == "deterministic") return ThresholdMode::deterministic;
    if (text == "cv") return ThresholdMode::cv;
    fail(ErrorKind::invalid_argument, "unknown threshold mode '" + std::string(text) + "'");
}

namespace {

__extension__ typedef unsigned __int128 u128;

// Weighted Gini impurity of a split, up to the constant factor 2/n:
//   pos_l * neg_l / n_l + pos_r * neg_r / n_r
// kept as an exact fraction so ties are detected exactly.
struct Impurity {
    u128 num;
    u128 den;

    bool operator<(const Impurity& o) const { return num * o.den < o.num * den; }
};

Impurity split_impurity(std::uint64_t pos_l, std::uint64_t n_l, std::uint64_t pos_r, std::uint64_t n_r) {
    const u128 left = u128(pos_l) * (n_l - pos_l);
    const u128 right = u128(pos_r) * (n_r - pos_r);
    return {left * n_r + right * n_l, u128(n_l) * n_r};
}

void check_inputs(std::span<const double> fractions, std::span<const BinaryLabel> labels) {
    require(fractions.size() == labels.size(), "fit_stump: fractions and labels differ in length");
    require(fractions.size() >= 2, "fit_stump: need at least two points");
    for (double f : fractions) require(f >= 0.0 && f <= 1.0, "fit_stump: fraction outside [0, 1]");
}

}  // namespace

std::optional<double> best_split(std::span<const double> fractions, std::span<const BinaryLabel> labels) {
    std::vector<std::size_t> order(fractions.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return fractions[a] < fractions[b]; });

    std::uint64_t total_pos = 0;
    for (auto l : labels) total_pos += l == BinaryLabel::populist;
    const std::uint64_t n = fractions.size();
    if (total_pos == 0 || total_pos == n) return std::nullopt;

    // Sweep left to right; a candidate sits after the last copy of each
    // distinct value.
    std::optional<double> best;
    Impurity best_impurity{0, 1};
    std::uint64_t pos_l = 0;
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
        pos_l += labels[order[i]] == BinaryLabel::populist;
        const double here = fractions[order[i]];
        const double next = fractions[order[i + 1]];
        if (here == next) continue;
        const std::uint64_t n_l = i + 1;
        const Impurity imp = split_impurity(pos_l, n_l, total_pos - pos_l, n - n_l);
        if (!best || imp < best_impurity) {
            best = (here + next) / 2.0;
            best_impurity = imp;
        }
    }
    return best;
}

Stump fit_stump(std::span<const double> fractions, std::span<const BinaryLabel> labels, int runs,
                std::uint64_t seed, StumpFit fit) {
    check_inputs(fractions, labels);
    require(runs >= 1, "fit_stump: runs must be >= 1");

    Stump stump;
    stump.fit = fit;
    stump.seed = seed;
    const auto n_pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), BinaryLabel::populist));
    if (n_pos == 0 || n_pos == labels.size()) {
        stump.degenerate = n_pos == 0 ? Degeneracy::all_non_populist : Degeneracy::all_populist;
        stump.threshold = n_pos == 0 ? 1.0 : 0.0;
        return stump;
    }

    if (fit == StumpFit::deterministic) {
        const auto t = best_split(fractions, labels);
        // Both classes present but a single distinct fraction: no split separates anything.
        stump.threshold = t.value_or(fractions.front());
        stump.runs = 1;
        stump.histogram[stump.threshold] = 1;
        stump.modal_count = 1;
        return stump;
    }

    constexpr int kMaxRedraws = 1000;
    const std::size_t n = fractions.size();
    std::vector<double> f(n);
    std::vector<BinaryLabel> l(n);
    for (int run = 0; run < runs; ++run) {
        Rng rng = make_rng(mix_seed(seed, static_cast<std::uint64_t>(run)));
        std::optional<double> t;
        for (int attempt = 0; attempt < kMaxRedraws && !t; ++attempt) {
            for (std::size_t i = 0; i < n; ++i) {
                const std::size_t j = uniform_index(rng, n);
                f[i] = fractions[j];
                l[i] = labels[j];
            }
            t = best_split(f, l);
        }
        if (!t) t = best_split(fractions, labels);
        if (!t) t = fractions.front();
        ++stump.histogram[*t];
    }
    stump.runs = runs;
    for (const auto& [threshold, count] : stump.histogram) {
        if (count > stump.modal_count) {  // ascending map order keeps the smaller on ties
            stump.modal_count = count;
            stump.threshold = threshold;
        }
    }
    return stump;
}

BinaryLabel classify(const Stump& stump, double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) {
        fail(ErrorKind::invalid_argument, "fraction " + std::to_string(fraction) + " outside [0, 1]");
    }
    switch (stump.degenerate) {
        case Degeneracy::all_populist: return BinaryLabel::populist;
        case Degeneracy::all_non_populist: return BinaryLabel::non_populist;
        case Degeneracy::none: break;
    }
    return fraction >= stump.threshold ? BinaryLabel::populist : BinaryLabel::non_populist;
}

nlohmann::json to_json(const Stump& s) {
    nlohmann::json histogram = nlohmann::json::array();
    for (const auto& [t, c] : s.histogram) histogram.push_back({t, c});
    std::string_view degenerate = "none";
    if (s.degenerate == Degeneracy::all_populist) degenerate = "all_populist";
    if (s.degenerate == Degeneracy::all_non_populist) degenerate = "all_non_populist";
    return {
        {"threshold", s.threshold},
        {"runs", s.runs},
        {"seed", s.seed},
        {"fit", s.fit == StumpFit::bootstrap ? "bootstrap" : "deterministic"},
        {"modal_count", s.modal_count},
        {"degenerate", degenerate},
        {"histogram", histogram},
    };
}

Stump stump_from_json(const nlohmann::json& j) {
    try {
        Stump s;
        s.threshold = j.at("threshold").get<double>();
        s.runs = j.at("runs").get<int>();
        s.seed = j.at("seed").get<std::uint64_t>();
        s.fit = j.value("fit", std::string("bootstrap")) == "deterministic" ? StumpFit::deterministic
                                                                          : StumpFit::bootstrap;
        s.modal_count = j.value("modal_count", 0);
        const std::string d = j.value("degenerate", std::string("none"));
        if (d == "all_populist") s.degenerate = Degeneracy::all_populist;
        else if (d == "all_non_populist") s.degenerate = Degeneracy::all_non_populist;
        else if (d != "none") fail(ErrorKind::data, "unknown stump degeneracy '" + d + "'");
        for (const auto& entry : j.at("histogram")) s.histogram[entry.at(0).get<double>()] = entry.at(1).get<int>();
        if (!(s.threshold >= 0.0 && s.threshold <= 1.0)) fail(ErrorKind::data, "stump threshold outside [0, 1]");
        return s;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("invalid stump JSON: ") + e.what());
    }
}

std::vector<BinaryLabel> cross_validated_labels(std::span<const double> fractions,
                                                std::span<const BinaryLabel> labels, int folds, int runs,
                                                std::uint64_t seed) {
    check_inputs(fractions, labels);
    require(folds >= 2, "cross-validation needs at least two folds");
    const std::size_t n = fractions.size();
    const auto k = std::min<std::size_t>(static_cast<std::size_t>(folds), n);

    // Stratified assignment: deal each shuffled class round-robin.
    std::vector<std::size_t> fold_of(n);
    Rng rng = make_rng(seed);
    std::size_t dealt = 0;
    for (BinaryLabel cls : {BinaryLabel::populist, BinaryLabel::non_populist}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == cls) idx.push_back(i);
        }
        shuffle(idx, rng);
        for (std::size_t i : idx) fold_of[i] = dealt++ % k;
    }

    std::vector<BinaryLabel> out(n);
    for (std::size_t fold = 0; fold < k; ++fold) {
        std::vector<double> f;
        std::vector<BinaryLabel> l;
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] != fold) {
                f.push_back(fractions[i]);
                l.push_back(labels[i]);
            }
        }
        const Stump s = f.size() >= 2 ? fit_stump(f, l, runs, mix_seed(seed, fold + 1), StumpFit::bootstrap)
                                      : Stump{};
        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] == fold) out[i] = classify(s, fractions[i]);
        }
    }
    return out;
}

LevelEvaluation evaluate_level(std::span<const double> fractions, std::span<const double> human_scores,
                               ThresholdMode mode, int runs, std::uint64_t seed, int folds) {
    require(fractions.size() == human_scores.size(), "evaluate: fractions and grades differ in length");
    LevelEvaluation ev;
    for (double g : human_scores) ev.truth.push_back(binarize_score(g));

    const StumpFit fit = mode == ThresholdMode::deterministic ? StumpFit::deterministic : StumpFit::bootstrap;
    ev.stump = fit_stump(fractions, ev.truth, runs, seed, fit);
    if (mode == ThresholdMode::cv) {
        ev.predicted = cross_validated_labels(fractions, ev.truth, folds, runs, seed);
    } else {
        for (double f : fractions) ev.predicted.push_back(classify(ev.stump, f));
    }
    ev.metrics = classification_metrics(confusion(ev.predicted, ev.truth));
    try {
        ev.auroc = auroc(fractions, ev.truth);
    } catch (const Error&) {
    }
    try {
        ev.r_squared = r_squared(fractions, human_scores);
    } catch (const Error&) {
    }
    return ev;
}

nlohmann::json to_json(const LevelEvaluation& ev) {
    nlohmann::json j = to_json(ev.metrics, ev.auroc);
    j["r_squared"] = ev.r_squared ? nlohmann::json(*ev.r_squared) : nlohmann::json(nullptr);
    j["stump"] = to_json(ev.stump);
    return j;
}

}  // namespace popfrac
