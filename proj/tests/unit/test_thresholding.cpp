#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "popfrac/error.hpp"
#include "popfrac/thresholding.hpp"

namespace popfrac {
namespace {

constexpr auto P = BinaryLabel::populist;
constexpr auto N = BinaryLabel::non_populist;

// Exhaustive search: every midpoint between consecutive distinct values,
// weighted Gini kept as an exact fraction (2 pos neg / n per side, summed).
std::optional<double> oracle_split(const std::vector<double>& f, const std::vector<BinaryLabel>& l) {
    std::set<double> distinct(f.begin(), f.end());
    if (distinct.size() < 2) return std::nullopt;
    if (std::count(l.begin(), l.end(), P) == 0 || std::count(l.begin(), l.end(), N) == 0) return std::nullopt;
    std::vector<double> values(distinct.begin(), distinct.end());
    std::optional<double> best;
    long best_num = 0, best_den = 1;
    for (std::size_t k = 0; k + 1 < values.size(); ++k) {
        const double t = (values[k] + values[k + 1]) / 2;
        long pl = 0, nl = 0, pr = 0, nr = 0;
        for (std::size_t i = 0; i < f.size(); ++i) {
            const bool left = f[i] < t;
            const bool pos = l[i] == P;
            (left ? (pos ? pl : nl) : (pos ? pr : nr))++;
        }
        // pl nl / (pl+nl) + pr nr / (pr+nr)
        const long a = pl + nl, b = pr + nr;
        const long num = pl * nl * b + pr * nr * a;
        const long den = a * b;
        if (!best || num * best_den < best_num * den) {
            best = t;
            best_num = num;
            best_den = den;
        }
    }
    return best;
}

TEST(BestSplit, DocumentedExample) {
    const std::vector<double> f = {0.05, 0.10, 0.30, 0.40};
    const std::vector<BinaryLabel> l = {N, N, P, P};
    const auto t = best_split(f, l);
    ASSERT_TRUE(t.has_value());
    EXPECT_DOUBLE_EQ(*t, 0.20);
    EXPECT_EQ(oracle_split(f, l), t);
    const auto stump = fit_stump(f, l, 100, 1);
    for (std::size_t i = 0; i < f.size(); ++i) EXPECT_EQ(classify(stump, f[i]), l[i]);
}

TEST(BestSplit, MatchesExhaustiveSearchOnNoisyData) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 400; ++trial) {
        const std::size_t n = 2 + rng() % 25;
        std::vector<double> f(n);
        std::vector<BinaryLabel> l(n);
        for (std::size_t i = 0; i < n; ++i) {
            f[i] = static_cast<double>(rng() % 21) / 20.0;
            l[i] = rng() % 2 ? P : N;
        }
        EXPECT_EQ(best_split(f, l), oracle_split(f, l));
    }
}

TEST(FitStump, SingleClassIsDegenerate) {
    const std::vector<double> f = {0.1, 0.2, 0.3};
    const auto all_pop = fit_stump(f, std::vector<BinaryLabel>{P, P, P});
    EXPECT_EQ(all_pop.degenerate, Degeneracy::all_populist);
    EXPECT_EQ(classify(all_pop, 0.0), P);
    const auto none = fit_stump(f, std::vector<BinaryLabel>{N, N, N});
    EXPECT_EQ(none.degenerate, Degeneracy::all_non_populist);
    EXPECT_EQ(classify(none, 1.0), N);
}

TEST(FitStump, RejectsBadInput) {
    EXPECT_THROW(fit_stump(std::vector<double>{0.1}, std::vector<BinaryLabel>{P}), Error);
    EXPECT_THROW(fit_stump(std::vector<double>{0.1, 0.2}, std::vector<BinaryLabel>{P}), Error);
    EXPECT_THROW(fit_stump(std::vector<double>{0.1, 1.2}, std::vector<BinaryLabel>{P, N}), Error);
}

TEST(FitStump, BootstrapReproducible) {
    std::mt19937_64 rng(4);
    std::vector<double> f(30);
    std::vector<BinaryLabel> l(30);
    for (std::size_t i = 0; i < 30; ++i) {
        f[i] = static_cast<double>(rng() % 100) / 100.0;
        l[i] = (f[i] > 0.4) != (rng() % 5 == 0) ? P : N;
    }
    const auto a = fit_stump(f, l, 100, 77);
    const auto b = fit_stump(f, l, 100, 77);
    EXPECT_EQ(a.threshold, b.threshold);
    EXPECT_EQ(a.histogram, b.histogram);
    int total = 0;
    for (const auto& [t, c] : a.histogram) total += c;
    EXPECT_EQ(total, 100);
    EXPECT_EQ(a.histogram.at(a.threshold), a.modal_count);
}

TEST(FitStump, ModalThresholdTiesGoToSmaller) {
    // Two well separated clusters leave several equally plausible cuts;
    // whatever wins must be the smallest among those sharing the top count.
    const std::vector<double> f = {0.0, 0.1, 0.5, 0.6};
    const std::vector<BinaryLabel> l = {N, N, P, P};
    const auto s = fit_stump(f, l, 50, 3);
    for (const auto& [t, c] : s.histogram) {
        if (c == s.modal_count) {
            EXPECT_EQ(t, s.threshold);
            break;
        }
    }
}

TEST(Classify, BoundaryIsInclusive) {
    Stump s;
    s.threshold = 0.2;
    EXPECT_EQ(classify(s, 0.3), P);
    EXPECT_EQ(classify(s, 0.2), P);
    EXPECT_EQ(classify(s, 0.1), N);
    EXPECT_THROW(classify(s, -0.1), Error);
    EXPECT_THROW(classify(s, 1.1), Error);
}

TEST(Stump, JsonRoundTrip) {
    const auto s = fit_stump(std::vector<double>{0.1, 0.2, 0.5, 0.7}, std::vector<BinaryLabel>{N, P, N, P}, 20, 5);
    const auto back = stump_from_json(to_json(s));
    EXPECT_EQ(back.threshold, s.threshold);
    EXPECT_EQ(back.histogram, s.histogram);
    EXPECT_EQ(back.runs, s.runs);
    EXPECT_EQ(back.degenerate, s.degenerate);
}

TEST(ThresholdMode, Parse) {
    EXPECT_EQ(parse_threshold_mode("cv"), ThresholdMode::cv);
    EXPECT_EQ(to_string(ThresholdMode::deterministic), "deterministic");
    EXPECT_THROW(parse_threshold_mode("median"), Error);
}

TEST(CrossValidation, SeparableDataStaysPerfect) {
    std::vector<double> f;
    std::vector<BinaryLabel> l;
    for (int i = 0; i < 20; ++i) {
        f.push_back(i < 10 ? 0.02 * i : 0.5 + 0.02 * i);
        l.push_back(i < 10 ? N : P);
    }
    const auto out = cross_validated_labels(f, l, 5, 20, 9);
    EXPECT_EQ(out, l);
    EXPECT_EQ(out, cross_validated_labels(f, l, 5, 20, 9));
}

TEST(EvaluateLevel, ModesAgreeOnSeparableData) {
    const std::vector<double> fractions = {0.0, 0.05, 0.1, 0.15, 0.35, 0.45, 0.5, 0.6};
    const std::vector<double> grades = {0.0, 0.1, 0.2, 0.3, 0.7, 0.9, 1.0, 1.2};
    for (auto mode : {ThresholdMode::bootstrap, ThresholdMode::deterministic, ThresholdMode::cv}) {
        const auto ev = evaluate_level(fractions, grades, mode, 100, 1, 4);
        EXPECT_EQ(ev.metrics.accuracy, 1.0) << to_string(mode);
        ASSERT_TRUE(ev.auroc.has_value());
        EXPECT_EQ(*ev.auroc, 1.0);
        ASSERT_TRUE(ev.r_squared.has_value());
    }
    const auto det = evaluate_level(fractions, grades, ThresholdMode::deterministic, 100, 1);
    EXPECT_DOUBLE_EQ(det.stump.threshold, 0.25);
}

TEST(EvaluateLevel, SingleClassLeavesAurocUndefined) {
    const auto ev = evaluate_level(std::vector<double>{0.1, 0.2}, std::vector<double>{1.0, 2.0},
                                   ThresholdMode::bootstrap, 10, 0);
    EXPECT_FALSE(ev.auroc.has_value());
    EXPECT_EQ(ev.metrics.accuracy, 1.0);
    EXPECT_TRUE(to_json(ev).at("auroc").is_null());
}

}  // namespace
}  // namespace popfrac
