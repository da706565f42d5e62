#include "popfrac/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "popfrac/csv.hpp"
#include "popfrac/error.hpp"
#include "popfrac/hash.hpp"
#include "popfrac/leakage.hpp"
#include "popfrac/parallel.hpp"
#include "popfrac/random.hpp"

namespace popfrac {

namespace {

std::array<std::vector<std::size_t>, kNumCategories> indices_by_class(std::span<const TrainingSentence> training) {
    std::array<std::vector<std::size_t>, kNumCategories> by_class;
    for (std::size_t i = 0; i < training.size(); ++i) by_class[index_of(training[i].category)].push_back(i);
    return by_class;
}

void check_counts(std::span<const TrainingSentence> training, std::span<const int> counts) {
    require(!counts.empty(), "sparsity experiment needs at least one count");
    std::set<int> seen;
    const auto by_class = indices_by_class(training);
    for (int n : counts) {
        require(n > 0, "sparsity count must be positive, got " + std::to_string(n));
        require(seen.insert(n).second, "duplicate sparsity count " + std::to_string(n));
        for (Category c : kAllCategories) {
            const auto available = by_class[index_of(c)].size();
            if (static_cast<std::size_t>(n) > available) {
                fail(ErrorKind::invalid_argument, "sparsity count " + std::to_string(n) + " exceeds the " +
                                                      std::to_string(available) + " available '" +
                                                      std::string(to_string(c)) + "' sentences");
            }
        }
    }
}

std::ofstream open_csv(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
    return out;
}

std::string optional_number(const std::optional<double>& v) { return v ? format_number(*v) : "NA"; }

}  // namespace

std::string format_number(double value, int decimals) {
    if (std::isnan(value)) return "NA";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
    std::string s = buf;
    // avoid "-0.0000"
    if (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-') s.erase(0, 1);
    return s;
}

std::vector<TrainingSentence> sparsity_sample(std::span<const TrainingSentence> training, int per_class,
                                              std::uint64_t seed) {
    const int counts[] = {per_class};
    check_counts(training, counts);
    auto by_class = indices_by_class(training);
    std::vector<std::size_t> chosen;
    for (Category c : kAllCategories) {
        auto& pool = by_class[index_of(c)];
        Rng rng(mix_seed(mix_seed(seed, static_cast<std::uint64_t>(per_class)), index_of(c) + 1));
        // partial Fisher-Yates: the first per_class slots are the sample
        for (std::size_t i = 0; i < static_cast<std::size_t>(per_class); ++i) {
            std::swap(pool[i], pool[i + uniform_index(rng, pool.size() - i)]);
        }
        chosen.insert(chosen.end(), pool.begin(), pool.begin() + per_class);
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<TrainingSentence> sample;
    sample.reserve(chosen.size());
    for (auto i : chosen) sample.push_back(training[i]);
    return sample;
}

std::vector<SparsityRow> sparsity_experiment(std::span<const TrainingSentence> training,
                                             std::span<const int> counts, const Backend& backend,
                                             std::uint64_t seed, std::size_t workers) {
    check_counts(training, counts);
    std::vector<SparsityRow> rows(counts.size());
    parallel_for(counts.size(), workers, [&](std::size_t i) {
        const int n = counts[i];
        auto sample = sparsity_sample(training, n, seed);
        SparsityRow row;
        row.sentences_per_class = n;
        for (const auto& s : sample) ++row.sample_sizes[index_of(s.category)];
        for (auto size : row.sample_sizes) {
            if (size != static_cast<std::size_t>(n)) fail(ErrorKind::data, "sparsity sample size mismatch");
        }
        row.metrics = holdout_eval(backend, sample, mix_seed(seed, 0x5000 + static_cast<std::uint64_t>(n)));
        rows[i] = row;
    });
    return rows;
}

std::vector<SparsityRow> sparsity_experiment(std::span<const TrainingSentence> training,
                                             std::span<const int> counts, const BackendConfig& config,
                                             std::uint64_t seed, std::size_t workers) {
    const auto backend = make_backend(config);
    return sparsity_experiment(training, counts, *backend, seed, workers);
}

CrossContextReport cross_context(std::span<const TrainingSentence> train_set, const std::string& train_corpus,
                                 const Corpus& test_corpus, const BackendConfig& config,
                                 std::optional<SpeechType> speech_type_filter, std::uint64_t seed,
                                 const CrossContextOptions& options) {
    std::vector<Speech> kept;
    for (const auto& s : test_corpus.speeches()) {
        if (!speech_type_filter || s.speech_type == *speech_type_filter) kept.push_back(s);
    }
    if (kept.empty()) {
        fail(ErrorKind::invalid_argument,
             "speech type filter '" + std::string(to_string(*speech_type_filter)) + "' leaves no speeches in '" +
                 test_corpus.name() + "'");
    }
    const Corpus target(test_corpus.name(), std::move(kept));
    check_trainable(train_set);

    CrossContextReport report;
    report.train_corpus = train_corpus;
    report.test_corpus = target.name();
    report.speech_type_filter = speech_type_filter;

    const auto index = build_match_index(train_set, target, options.match_threshold, options.workers);
    std::vector<SpeechPrediction> predictions;
    if (train_corpus == target.name()) {
        auto result = run_pipeline(target, train_set, index, config, options.unit_kind, seed, options.workers);
        predictions = std::move(result.speeches);
        report.leakage_safe_units = true;
    } else {
        if (index.matched_count() != 0) {
            fail(ErrorKind::data, std::to_string(index.matched_count()) + " training sentences from '" +
                                      train_corpus + "' match speeches of '" + target.name() +
                                      "'; corpora are not disjoint");
        }
        const auto model = fit(config, train_set, mix_seed(seed, fnv1a("cross-context")));
        predictions = score_corpus(target, model, options.workers).speeches;
    }

    std::vector<double> fractions, grades;
    for (const auto& p : predictions) {
        report.n_sentences += p.n_sentences;
        report.n_populist_sentences += p.count(Category::populist);
        fractions.push_back(p.populist_fraction);
        grades.push_back(p.human_score);
    }
    report.n_speeches = predictions.size();
    report.populist_percentage =
        report.n_sentences == 0 ? 0.0
                                : 100.0 * static_cast<double>(report.n_populist_sentences) /
                                      static_cast<double>(report.n_sentences);
    report.evaluation = evaluate_level(fractions, grades, options.threshold_mode, options.stump_runs,
                                       mix_seed(seed, fnv1a("stump")));
    return report;
}

MetricSummary summarize(std::span<const SentenceMetrics> runs) {
    require(!runs.empty(), "cannot summarize zero runs");
    constexpr double SentenceMetrics::*fields[] = {&SentenceMetrics::accuracy, &SentenceMetrics::precision,
                                                   &SentenceMetrics::recall, &SentenceMetrics::f1,
                                                   &SentenceMetrics::mcc};
    MetricSummary out;
    const double n = static_cast<double>(runs.size());
    for (auto field : fields) {
        double sum = 0;
        for (const auto& r : runs) sum += r.*field;
        const double mean = sum / n;
        double ss = 0;
        for (const auto& r : runs) ss += (r.*field - mean) * (r.*field - mean);
        out.mean.*field = mean;
        out.std.*field = runs.size() > 1 ? std::sqrt(ss / (n - 1)) : 0.0;
    }
    return out;
}

std::vector<GridRow> hyperparameter_grid(std::span<const BackendConfig> variants,
                                         std::span<const TrainingSentence> labeled, int repetitions,
                                         std::uint64_t seed, std::size_t workers) {
    require(!variants.empty(), "hyperparameter grid is empty");
    require(repetitions >= 1, "repetitions must be at least 1");
    for (const auto& v : variants) v.validate();

    std::vector<GridRow> rows(variants.size());
    for (std::size_t v = 0; v < variants.size(); ++v) {
        rows[v].config = variants[v];
        rows[v].label = variants[v].kind == BackendKind::lexical_baseline ? std::string(to_string(variants[v].kind))
                                                                          : describe(variants[v].variants);
        rows[v].repetitions = repetitions;
        rows[v].runs.resize(static_cast<std::size_t>(repetitions));
    }
    // Every (variant, repetition) cell is an independent job. All cells use
    // the same holdout split; repetitions differ only in training seed.
    const std::size_t reps = static_cast<std::size_t>(repetitions);
    std::vector<std::unique_ptr<Backend>> backends;
    for (const auto& v : variants) backends.push_back(make_backend(v));
    parallel_for(variants.size() * reps, workers, [&](std::size_t job) {
        const std::size_t v = job / reps, r = job % reps;
        rows[v].runs[r] = holdout_eval(*backends[v], labeled, seed, mix_seed(seed, 0x6000 + r));
    });
    for (auto& row : rows) row.summary = summarize(row.runs);
    return rows;
}

std::vector<BackendConfig> all_variant_configs(const BackendConfig& base) {
    const VariantFlags combos[] = {
        {false, false, false}, {true, false, false}, {false, false, true}, {false, true, false},
        {true, false, true},   {true, true, false},  {false, true, true},  {true, true, true},
    };
    std::vector<BackendConfig> out;
    for (const auto& flags : combos) {
        auto c = base;
        c.variants = flags;
        out.push_back(c);
    }
    return out;
}

nlohmann::json to_json(const SparsityRow& row) {
    nlohmann::json j = to_json(row.metrics);
    j["count"] = row.sentences_per_class;
    nlohmann::json sizes = nlohmann::json::object();
    for (Category c : kAllCategories) sizes[std::string(to_string(c))] = row.sample_sizes[index_of(c)];
    j["sample_sizes"] = sizes;
    return j;
}

nlohmann::json to_json(const CrossContextReport& r) {
    return {
        {"train_corpus", r.train_corpus},
        {"test_corpus", r.test_corpus},
        {"speech_type", r.speech_type_filter ? nlohmann::json(std::string(to_string(*r.speech_type_filter)))
                                             : nlohmann::json(nullptr)},
        {"n_speeches", r.n_speeches},
        {"n_sentences", r.n_sentences},
        {"n_populist_sentences", r.n_populist_sentences},
        {"populist_percentage", r.populist_percentage},
        {"leakage_safe_units", r.leakage_safe_units},
        {"evaluation", to_json(r.evaluation)},
    };
}

nlohmann::json to_json(const GridRow& row) {
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& r : row.runs) runs.push_back(to_json(r));
    return {
        {"label", row.label},
        {"config", to_json(row.config)},
        {"repetitions", row.repetitions},
        {"mean", to_json(row.summary.mean)},
        {"std", to_json(row.summary.std)},
        {"runs", runs},
    };
}

namespace {

template <typename T>
nlohmann::json artifact(std::string_view kind, std::span<const T> items, std::uint64_t seed) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& item : items) rows.push_back(to_json(item));
    return {{"kind", kind}, {"seed", seed}, {"rows", rows}};
}

}  // namespace

nlohmann::json sparsity_artifact(std::span<const SparsityRow> rows, std::uint64_t seed) {
    return artifact("sparsity", rows, seed);
}

nlohmann::json cross_context_artifact(std::span<const CrossContextReport> reports, std::uint64_t seed) {
    return artifact("cross_context", reports, seed);
}

nlohmann::json grid_artifact(std::span<const GridRow> rows, std::uint64_t seed) {
    return artifact("grid", rows, seed);
}

void write_sparsity_csv(std::span<const SparsityRow> rows, const std::filesystem::path& path) {
    auto out = open_csv(path);
    csv::write_row(out, {"count", "Accuracy", "Precision", "Recall", "F1", "MCC", "n_populist", "n_pluralist",
                         "n_neutral"});
    for (const auto& r : rows) {
        csv::write_row(out, {std::to_string(r.sentences_per_class), format_number(r.metrics.accuracy),
                             format_number(r.metrics.precision), format_number(r.metrics.recall),
                             format_number(r.metrics.f1), format_number(r.metrics.mcc),
                             std::to_string(r.sample_sizes[0]), std::to_string(r.sample_sizes[1]),
                             std::to_string(r.sample_sizes[2])});
    }
}

void write_cross_context_csv(std::span<const CrossContextReport> reports, const std::filesystem::path& path) {
    auto out = open_csv(path);
    csv::write_row(out, {"Data", "N", "Accuracy", "Precision", "Recall", "F1", "F2", "AuROC", "MCC",
                         "populist_pct", "train_corpus", "test_corpus", "speech_type", "threshold"});
    for (const auto& r : reports) {
        const auto& m = r.evaluation.metrics;
        std::string data = r.train_corpus + " -> " + r.test_corpus;
        if (r.speech_type_filter) data += " (" + std::string(to_string(*r.speech_type_filter)) + ")";
        csv::write_row(out, {data, std::to_string(r.n_speeches), format_number(m.accuracy),
                             format_number(m.precision), format_number(m.recall), format_number(m.f1),
                             format_number(m.f2), optional_number(r.evaluation.auroc), format_number(m.mcc),
                             format_number(r.populist_percentage, 1), r.train_corpus, r.test_corpus,
                             r.speech_type_filter ? std::string(to_string(*r.speech_type_filter)) : "all",
                             format_number(r.evaluation.stump.threshold)});
    }
}

void write_grid_csv(std::span<const GridRow> rows, const std::filesystem::path& path) {
    auto out = open_csv(path);
    constexpr double SentenceMetrics::*fields[] = {&SentenceMetrics::accuracy, &SentenceMetrics::precision,
                                                   &SentenceMetrics::recall, &SentenceMetrics::f1,
                                                   &SentenceMetrics::mcc};
    const char* names[] = {"Accuracy", "Precision", "Recall", "F1", "MCC"};
    std::vector<std::string> header = {"Model", "repetitions"};
    for (auto n : names) header.emplace_back(n);
    for (auto n : names) {
        header.push_back(std::string(n) + "_mean");
        header.push_back(std::string(n) + "_std");
    }
    csv::write_row(out, header);
    for (const auto& r : rows) {
        std::vector<std::string> cells = {r.label, std::to_string(r.repetitions)};
        for (auto f : fields) {
            cells.push_back(format_number(r.summary.mean.*f, 2) + " (" + format_number(r.summary.std.*f, 2) + ")");
        }
        for (auto f : fields) {
            cells.push_back(format_number(r.summary.mean.*f));
            cells.push_back(format_number(r.summary.std.*f));
        }
        csv::write_row(out, cells);
    }
}

}  // namespace popfrac
