// popfrac command-line tool. Commands exchange file artifacts; every input
// path defaults to a file inside --out so a workspace directory can be
// driven step by step.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cli_config.hpp"
#include "popfrac/backend.hpp"
#include "popfrac/corpus.hpp"
#include "popfrac/csv.hpp"
#include "popfrac/error.hpp"
#include "popfrac/experiments.hpp"
#include "popfrac/hash.hpp"
#include "popfrac/leakage.hpp"
#include "popfrac/pipeline.hpp"
#include "popfrac/report.hpp"
#include "popfrac/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace popfrac::cli {
namespace {

// Options shared by several commands. std::optional members stay empty
// unless the flag was given, so config-file conflicts can be detected.
struct Common {
    std::optional<fs::path> config;
    fs::path out = ".";
    FlagValues flags;
    std::optional<std::string> corpus_name;
};

void add_config(CLI::App& app, Common& c) {
    app.add_option("--config", c.config, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--out", c.out, "Output directory (also the default location of inputs)")
        ->capture_default_str();
}
void add_seed(CLI::App& app, Common& c) { app.add_option("--seed", c.flags.seed, "Random seed"); }
void add_workers(CLI::App& app, Common& c) {
    app.add_option("--workers", c.flags.workers, "Worker threads")->check(CLI::PositiveNumber);
}
void add_backend(CLI::App& app, Common& c) {
    app.add_option("--backend", c.flags.backend, "Sentence classifier backend")
        ->check(CLI::IsMember({"embedding_finetune", "lexical_baseline"}));
}
void add_threshold_mode(CLI::App& app, Common& c) {
    app.add_option("--threshold-mode", c.flags.threshold_mode, "How the speech-level cutoff is fit")
        ->check(CLI::IsMember({"bootstrap", "deterministic", "cv"}));
    app.add_option("--stump-runs", c.flags.stump_runs, "Bootstrap refits of the stump");
    app.add_option("--folds", c.flags.folds, "Folds for --threshold-mode cv");
}
void add_match_threshold(CLI::App& app, Common& c) {
    app.add_option("--match-threshold", c.flags.match_threshold, "Minimum similarity linking a training "
                                                                 "sentence to a speech")
        ->check(CLI::Range(0.0, 1.0));
}
void add_unit_kind(CLI::App& app, Common& c) {
    app.add_option("--unit-kind", c.flags.unit_kind, "Leave-out grouping")
        ->check(CLI::IsMember({"term", "speaker"}));
}
void add_corpus_name(CLI::App& app, Common& c) {
    app.add_option("--corpus-name", c.corpus_name, "Corpus name (default: sidecar metadata or file stem)");
}

fs::path or_default(const std::optional<fs::path>& given, const fs::path& out, const char* file) {
    return given ? *given : out / file;
}

void require_file(const fs::path& path, std::string_view what) {
    if (!fs::is_regular_file(path)) {
        fail(ErrorKind::not_found, std::string(what) + " not found: '" + path.string() + "'");
    }
}

fs::path meta_path(const fs::path& corpus_path) {
    return corpus_path.parent_path() / (corpus_path.stem().string() + ".meta.json");
}

void write_corpus_meta(const fs::path& corpus_path, const std::string& name) {
    write_json(json{{"name", name}}, meta_path(corpus_path));
}

CorpusFormat format_of(const fs::path& path) {
    return path.extension() == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
}

Corpus load_corpus(const fs::path& path, const std::optional<std::string>& name_override) {
    require_file(path, "corpus");
    std::string name;
    if (name_override) {
        name = *name_override;
    } else if (fs::is_regular_file(meta_path(path))) {
        name = read_json(meta_path(path), "corpus metadata").at("name").get<std::string>();
    } else {
        name = path.stem().string();
    }
    auto loaded = ingest_corpus(path, format_of(path), name);
    if (!loaded.report.rejected.empty()) {
        const auto& r = loaded.report.rejected.front();
        fail(ErrorKind::data, "corpus '" + path.string() + "' has " + std::to_string(loaded.report.rejected.size()) +
                                  " invalid records (first: record " + std::to_string(r.record) + ": " + r.reason +
                                  "); run ingest first");
    }
    return std::move(loaded.corpus);
}

std::vector<TrainingSentence> load_training(const fs::path& path) {
    require_file(path, "training sentences");
    return load_training_sentences(path);
}

MatchIndex load_or_build_index(const std::optional<fs::path>& given, const fs::path& out,
                               std::span<const TrainingSentence> training, const Corpus& corpus,
                               const Settings& s) {
    if (given) {
        require_file(*given, "match index");
        return MatchIndex::read_csv(*given);
    }
    const auto path = out / "match_index.csv";
    if (fs::is_regular_file(path)) return MatchIndex::read_csv(path);
    return build_match_index(training, corpus, s.match_threshold, s.workers);
}

void announce(const fs::path& path) { std::cout << "wrote " << path.string() << '\n'; }

json match_stats_json(const MatchIndex& index) {
    json by_category = json::object();
    for (Category c : kAllCategories) {
        const auto& st = index.stats(c);
        by_category[std::string(to_string(c))] = {{"total", st.total}, {"matched", st.matched}, {"rate", st.rate()}};
    }
    return {{"threshold", index.threshold()},
            {"matched_sentences", index.matched_count()},
            {"distinct_sentences", index.entries().size()},
            {"categories", by_category},
            {"match_index_hash", to_hex(index.fingerprint())}};
}

// ---- ingest ----------------------------------------------------------------

struct IngestArgs {
    Common common;
    fs::path input;
    std::optional<std::string> format;
    std::optional<std::string> name;
};

void run_ingest(const IngestArgs& a) {
    resolve_settings(a.common.config, a.common.flags);
    require_file(a.input, "input corpus");
    const CorpusFormat format = a.format ? parse_corpus_format(*a.format) : format_of(a.input);
    const std::string name = a.name ? *a.name : a.input.stem().string();
    auto loaded = ingest_corpus(a.input, format, name);
    auto [valid, report] = validate_corpus(loaded.corpus);
    report.rejected_records = loaded.report.rejected;

    fs::create_directories(a.common.out);
    const auto corpus_path = a.common.out / "corpus.jsonl";
    write_corpus_jsonl(valid, corpus_path);
    write_corpus_meta(corpus_path, name);
    json j = to_json(report);
    j["records_read"] = loaded.report.records_read;
    j["speeches_kept"] = valid.size();
    j["corpus"] = name;
    write_json(j, a.common.out / "ingest_report.json");
    announce(corpus_path);
    announce(a.common.out / "ingest_report.json");
    std::cout << valid.size() << " speeches kept, " << report.rejected_records.size() << " records rejected, "
              << report.dropped_units.size() << " units dropped\n";
}

// ---- match -----------------------------------------------------------------

struct MatchArgs {
    Common common;
    std::optional<fs::path> corpus;
    std::optional<fs::path> training;
};

void run_match(const MatchArgs& a) {
    const Settings s = resolve_settings(a.common.config, a.common.flags);
    const Corpus corpus = load_corpus(or_default(a.corpus, a.common.out, "corpus.jsonl"), a.common.corpus_name);
    const auto training = load_training(or_default(a.training, a.common.out, "training.csv"));
    const MatchIndex index = build_match_index(training, corpus, s.match_threshold, s.workers);
    fs::create_directories(a.common.out);
    index.write_csv(a.common.out / "match_index.csv");
    write_json(match_stats_json(index), a.common.out / "match_stats.json");
    announce(a.common.out / "match_index.csv");
    announce(a.common.out / "match_stats.json");
    for (Category c : kAllCategories) {
        std::printf("%-10s matched %zu of %zu (%.1f%%)\n", std::string(to_string(c)).c_str(),
                    index.stats(c).matched, index.stats(c).total, 100.0 * index.stats(c).rate());
    }
}

// ---- train / classify --------------------------------------------------------

struct TrainArgs {
    Common common;
    std::optional<fs::path> corpus;
    std::optional<fs::path> training;
    std::optional<fs::path> match_index;
    bool single = false;
};

std::string unit_dir_name(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "unit-%04zu", i + 1);
    return buf;
}

json unit_run_json(const UnitRun& r) {
    return {{"unit_id", r.unit_id},
            {"speech_ids", r.speech_ids},
            {"seed", r.seed},
            {"n_training", r.n_training},
            {"n_excluded", r.n_excluded},
            {"training_fingerprint", to_hex(r.training_fingerprint)}};
}

UnitRun unit_run_from_json(const json& j) {
    UnitRun r;
    r.unit_id = j.at("unit_id").get<std::string>();
    r.speech_ids = j.at("speech_ids").get<std::vector<std::string>>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_training = j.at("n_training").get<std::size_t>();
    r.n_excluded = j.at("n_excluded").get<std::size_t>();
    r.training_fingerprint = from_hex(j.at("training_fingerprint").get<std::string>());
    return r;
}

void run_train(const TrainArgs& a) {
    const Settings s = resolve_settings(a.common.config, a.common.flags);
    const auto training = load_training(or_default(a.training, a.common.out, "training.csv"));
    const fs::path models_dir = a.common.out / "models";

    if (a.single) {
        check_trainable(training);
        const TrainedModel model = fit(s.backend, training, s.seed);
        fs::create_directories(models_dir / "all");
        model.save(models_dir / "all");
        write_json({{"kind", "single_model"}, {"dir", "all"}, {"config", to_json(s.backend)}, {"seed", s.seed}},
                   models_dir / "models.json");
        announce(models_dir / "models.json");
        return;
    }

    const Corpus corpus = load_corpus(or_default(a.corpus, a.common.out, "corpus.jsonl"), a.common.corpus_name);
    const MatchIndex index = load_or_build_index(a.match_index, a.common.out, training, corpus, s);
    const auto backend = make_backend(s.backend);
    const auto units = train_units(corpus, training, index, *backend, s.unit_kind, s.seed, s.workers);

    json listing = json::array();
    for (std::size_t i = 0; i < units.size(); ++i) {
        const auto dir = models_dir / unit_dir_name(i);
        fs::create_directories(dir);
        units[i].model.save(dir);
        json entry = unit_run_json(units[i].run);
        entry["dir"] = unit_dir_name(i);
        listing.push_back(entry);
    }
    write_json({{"kind", "unit_models"},
                {"corpus", corpus.name()},
                {"unit_kind", to_string(s.unit_kind)},
                {"config", to_json(s.backend)},
                {"seed", s.seed},
                {"match_index_hash", to_hex(index.fingerprint())},
                {"units", listing}},
               models_dir / "models.json");
    announce(models_dir / "models.json");

    const auto result = score_units(corpus, units, s.unit_kind, s.backend, s.seed, index.fingerprint(), s.workers);
    write_json(to_json(result), a.common.out / "predictions.json");
    announce(a.common.out / "predictions.json");
    if (const auto leaks = audit_leakage(result, index); leaks != 0) {
        fail(ErrorKind::data, "leakage audit found " + std::to_string(leaks) + " violations");
    }
}

struct ClassifyArgs {
    Common common;
    std::optional<fs::path> models;
    std::optional<fs::path> corpus;
    std::optional<fs::path> sentences;
};

void run_classify(const ClassifyArgs& a) {
    const Settings s = resolve_settings(a.common.config, a.common.flags);
    const fs::path models_dir = a.models ? *a.models : a.common.out / "models";
    require_file(models_dir / "models.json", "trained models");
    const json listing = read_json(models_dir / "models.json", "trained models");
    const auto kind = listing.at("kind").get<std::string>();

    if (a.sentences) {
        // Free-text mode: one sentence per line, single model only.
        if (kind != "single_model") {
            fail(ErrorKind::invalid_argument, "--sentences needs a model trained with --single");
        }
        require_file(*a.sentences, "sentences");
        const TrainedModel model = TrainedModel::load(models_dir / listing.at("dir").get<std::string>());
        std::ifstream in(*a.sentences);
        std::vector<std::string> lines;
        for (std::string line; std::getline(in, line);) {
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) lines.push_back(line);
        }
        const auto labels = model.predict(lines);
        fs::create_directories(a.common.out);
        std::ofstream out(a.common.out / "sentence_labels.csv", std::ios::binary);
        csv::write_row(out, {"text", "category"});
        for (std::size_t i = 0; i < lines.size(); ++i) csv::write_row(out, {lines[i], std::string(to_string(labels[i]))});
        announce(a.common.out / "sentence_labels.csv");
        return;
    }

    const Corpus corpus = load_corpus(or_default(a.corpus, a.common.out, "corpus.jsonl"), a.common.corpus_name);
    PipelineResult result;
    if (kind == "single_model") {
        const TrainedModel model = TrainedModel::load(models_dir / listing.at("dir").get<std::string>());
        result = score_corpus(corpus, model, s.workers);
    } else if (kind == "unit_models") {
        if (listing.at("corpus").get<std::string>() != corpus.name()) {
            fail(ErrorKind::invalid_argument, "models were trained for corpus '" +
                                                  listing.at("corpus").get<std::string>() + "', not '" +
                                                  corpus.name() + "'");
        }
        std::vector<UnitModel> units;
        for (const auto& entry : listing.at("units")) {
            units.push_back({unit_run_from_json(entry),
                             TrainedModel::load(models_dir / entry.at("dir").get<std::string>())});
        }
        result = score_units(corpus, units, parse_unit_kind(listing.at("unit_kind").get<std::string>()),
                             backend_config_from_json(listing.at("config")), listing.at("seed").get<std::uint64_t>(),
                             from_hex(listing.at("match_index_hash").get<std::string>()), s.workers);
    } else {
        fail(ErrorKind::data, "unknown model listing kind '" + kind + "'");
    }
    fs::create_directories(a.common.out);
    write_json(to_json(result), a.common.out / "predictions.json");
    announce(a.common.out / "predictions.json");
}

// ---- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
    Common common;
    std::optional<fs::path> predictions;
};

void run_evaluate(const EvaluateArgs& a) {
    const Settings s = resolve_settings(a.common.config, a.common.flags);
    const fs::path path = or_default(a.predictions, a.common.out, "predictions.json");
    const PipelineResult result = pipeline_result_from_json(read_json(path, "predictions"));
    const auto report = evaluate_predictions(result, s.threshold_mode, s.stump_runs, s.seed, s.folds);
    fs::create_directories(a.common.out);
    write_json(to_json(report), a.common.out / "evaluation.json");
    announce(a.common.out / "evaluation.json");
    for (const LevelReport* l : {&report.speeches, &report.speakers}) {
        const auto& m = l->evaluation.metrics;
        std::printf("%-8s n=%zu accuracy=%.3f f1=%.3f mcc=%.3f threshold=%.4f\n", l->level.c_str(), m.cm.total(),
                    m.accuracy, m.f1, m.mcc, l->evaluation.stump.threshold);
    }
}

// ---- experiments -------------------------------------------------------------

struct SparsityArgs {
    Common common;
    std::optional<fs::path> training;
};

void run_sparsity(const SparsityArgs& a) {
    const Settings s = resolve_settings(a.common.config, a.common.flags);
    const auto training = load_training(or_default(a.training, a.common.out, "training.csv"));
    const auto rows = sparsity_experiment(training, s.counts, s.backend, s.seed, s.workers);
    fs::create_directories(a.common.out);
    write_sparsity_csv(rows, a.common.out / "sparsity.csv");
    write_json(sparsity_artifact(rows, s.seed), a.common.out / "sparsity.json");
    announce(a.common.out / "sparsity.csv");
    announce(a.common.out / "sparsity.json");
}

struct CrossArgs {
    Common common;
    std::optional<fs::path> training;
    std::string train_corpus;
    std::optional<fs::path> corpus;
    std::optional<std::string> speech_type;
};

void run_cross_context(const CrossArgs& a) {
    const Settings s = resolve_settings(a.common.config, a.common.flags);
    const auto training = load_training(or_default(a.training, a.common.out, "training.csv"));
    const Corpus corpus = load_corpus(or_default(a.corpus, a.common.out, "corpus.jsonl"), a.common.corpus_name);
    std::optional<SpeechType> filter;
    if (a.speech_type) filter = parse_speech_type(*a.speech_type);
    CrossContextOptions options;
    options.match_threshold = s.match_threshold;
    options.unit_kind = s.unit_kind;
    options.threshold_mode = s.threshold_mode;
    options.stump_runs = s.stump_runs;
    options.workers = s.workers;
    const auto report = cross_context(training, a.train_corpus, corpus, s.backend, filter, s.seed, options);
    const std::vector<CrossContextReport> reports = {report};
    fs::create_directories(a.common.out);
    write_cross_context_csv(reports, a.common.out / "cross_context.csv");
    write_json(cross_context_artifact(reports, s.seed), a.common.out / "cross_context.json");
    announce(a.common.out / "cross_context.csv");
    announce(a.common.out / "cross_context.json");
    std::printf("%.1f%% of %zu sentences populist\n", report.populist_percentage, report.n_sentences);
}

struct GridArgs {
    Common common;
    std::optional<fs::path> training;
    bool baseline_only = false;
};

void run_grid(const GridArgs& a) {
    const Settings s = resolve_settings(a.common.config, a.common.flags);
    const auto training = load_training(or_default(a.training, a.common.out, "training.csv"));
    std::vector<BackendConfig> variants;
    if (a.baseline_only || s.backend.kind == BackendKind::lexical_baseline) {
        variants.push_back(s.backend);
    } else {
        variants = all_variant_configs(s.backend);
    }
    const auto rows = hyperparameter_grid(variants, training, s.repetitions, s.seed, s.workers);
    fs::create_directories(a.common.out);
    write_grid_csv(rows, a.common.out / "grid.csv");
    write_json(grid_artifact(rows, s.seed), a.common.out / "grid.json");
    announce(a.common.out / "grid.csv");
    announce(a.common.out / "grid.json");
}

// ---- synth / report ----------------------------------------------------------

struct SynthArgs {
    Common common;
    std::string preset = "desk";
    std::optional<double> noise;
    std::optional<std::string> name;
};

void run_synth(const SynthArgs& a) {
    const Settings s = resolve_settings(a.common.config, a.common.flags);
    SynthSpec spec;
    if (a.preset == "desk") spec = desk_spec(s.seed);
    else if (a.preset == "governor") spec = governor_shaped_spec(s.seed);
    else spec = presidential_shaped_spec(s.seed);
    if (a.noise) spec.noise_rate = *a.noise;
    if (a.name) spec.corpus_name = *a.name;
    const SynthCorpus synth = generate_corpus(spec);
    fs::create_directories(a.common.out);
    write_synth(synth, a.common.out);
    write_corpus_meta(a.common.out / "corpus.jsonl", synth.corpus.name());
    for (const char* f : {"corpus.jsonl", "training.csv", "ground_truth.csv", "planted_speeches.csv"}) {
        announce(a.common.out / f);
    }
}

struct ReportArgs {
    Common common;
    std::vector<fs::path> inputs;
};

void run_report(const ReportArgs& a) {
    resolve_settings(a.common.config, a.common.flags);
    std::vector<json> artifacts;
    for (const auto& p : a.inputs) artifacts.push_back(read_json(p, "report input"));
    write_report(artifacts, a.common.out);
    for (const auto& f : render_report(artifacts)) announce(a.common.out / f.name);
}

int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return 2;
    case ErrorKind::not_found: return 3;
    case ErrorKind::data: return 4;
    case ErrorKind::io: return 5;
    }
    return 1;
}

void print_error(std::string_view kind, std::string_view command, std::string_view message) {
    std::cerr << json{{"error", {{"kind", kind}, {"command", command}, {"message", message}}}}.dump() << '\n';
}

}  // namespace
}  // namespace popfrac::cli

int main(int argc, char** argv) {
    using namespace popfrac;
    using namespace popfrac::cli;

    CLI::App app{"Leakage-safe populism scoring of political speeches"};
    app.name("popfrac");
    app.require_subcommand(1);
    app.set_version_flag("--version", "popfrac 0.1.0");
    app.set_help_all_flag("--help-all", "Print help for every subcommand and exit");
    app.footer(
        "Shared flags (see `popfrac <command> --help`):\n"
        "  --config FILE            JSON config; a flag that disagrees with it is an error\n"
        "  --seed N                 random seed (default 0)\n"
        "  --workers N              worker threads (default 1)\n"
        "  --backend NAME           embedding_finetune | lexical_baseline\n"
        "  --threshold-mode MODE    bootstrap | deterministic | cv\n"
        "  --match-threshold X      similarity needed to link a training sentence (default 0.8)\n"
        "  --out DIR                output directory, also where inputs are looked up\n"
        "\n"
        "Environment:\n"
        "  POPFRAC_MODEL_CACHE      directory searched for base encoder weights");

    IngestArgs ingest;
    auto* ingest_cmd = app.add_subcommand("ingest", "Validate a speech corpus and write corpus.jsonl");
    add_config(*ingest_cmd, ingest.common);
    ingest_cmd->add_option("--input", ingest.input, "Corpus file (JSONL or CSV)")->required();
    ingest_cmd->add_option("--format", ingest.format, "Input format")->check(CLI::IsMember({"jsonl", "csv"}));
    ingest_cmd->add_option("--name", ingest.name, "Corpus name (default: input file stem)");

    MatchArgs match;
    auto* match_cmd = app.add_subcommand("match", "Link training sentences to the speeches they came from");
    add_config(*match_cmd, match.common);
    add_corpus_name(*match_cmd, match.common);
    add_workers(*match_cmd, match.common);
    add_match_threshold(*match_cmd, match.common);
    match_cmd->add_option("--corpus", match.corpus, "Corpus JSONL/CSV [OUT/corpus.jsonl]");
    match_cmd->add_option("--training", match.training, "Training sentence CSV [OUT/training.csv]");

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train one leakage-safe model per unit and score held-out speeches");
    add_config(*train_cmd, train.common);
    add_corpus_name(*train_cmd, train.common);
    add_seed(*train_cmd, train.common);
    add_workers(*train_cmd, train.common);
    add_backend(*train_cmd, train.common);
    add_match_threshold(*train_cmd, train.common);
    add_unit_kind(*train_cmd, train.common);
    train_cmd->add_option("--corpus", train.corpus, "Corpus [OUT/corpus.jsonl]");
    train_cmd->add_option("--training", train.training, "Training sentence CSV [OUT/training.csv]");
    train_cmd->add_option("--match-index", train.match_index, "Match index CSV [OUT/match_index.csv, else built]");
    train_cmd->add_flag("--single", train.single, "Train one model on all sentences (no corpus, no leave-out)");

    ClassifyArgs classify;
    auto* classify_cmd = app.add_subcommand("classify", "Score speeches (or sentences) with saved models");
    add_config(*classify_cmd, classify.common);
    add_corpus_name(*classify_cmd, classify.common);
    add_workers(*classify_cmd, classify.common);
    classify_cmd->add_option("--models", classify.models, "Model directory [OUT/models]");
    classify_cmd->add_option("--corpus", classify.corpus, "Corpus [OUT/corpus.jsonl]");
    classify_cmd->add_option("--sentences", classify.sentences, "Text file, one sentence per line");

    EvaluateArgs evaluate;
    auto* evaluate_cmd = app.add_subcommand("evaluate", "Fit cutoffs and score predictions against human grades");
    add_config(*evaluate_cmd, evaluate.common);
    add_seed(*evaluate_cmd, evaluate.common);
    add_threshold_mode(*evaluate_cmd, evaluate.common);
    evaluate_cmd->add_option("--predictions", evaluate.predictions, "Predictions JSON [OUT/predictions.json]");

    auto* experiment_cmd = app.add_subcommand("experiment", "Boundary-condition experiments");
    experiment_cmd->require_subcommand(1);

    SparsityArgs sparsity;
    auto* sparsity_cmd = experiment_cmd->add_subcommand("sparsity", "Holdout scores by sentences per category");
    add_config(*sparsity_cmd, sparsity.common);
    add_seed(*sparsity_cmd, sparsity.common);
    add_workers(*sparsity_cmd, sparsity.common);
    add_backend(*sparsity_cmd, sparsity.common);
    sparsity_cmd->add_option("--training", sparsity.training, "Training sentence CSV [OUT/training.csv]");
    sparsity_cmd->add_option("--counts", sparsity.common.flags.counts, "Sentences per category, comma separated")
        ->delimiter(',');

    CrossArgs cross;
    auto* cross_cmd = experiment_cmd->add_subcommand("cross-context", "Train on one corpus, test on another");
    add_config(*cross_cmd, cross.common);
    add_corpus_name(*cross_cmd, cross.common);
    add_seed(*cross_cmd, cross.common);
    add_workers(*cross_cmd, cross.common);
    add_backend(*cross_cmd, cross.common);
    add_threshold_mode(*cross_cmd, cross.common);
    add_match_threshold(*cross_cmd, cross.common);
    add_unit_kind(*cross_cmd, cross.common);
    cross_cmd->add_option("--training", cross.training, "Training sentence CSV [OUT/training.csv]");
    cross_cmd->add_option("--train-corpus", cross.train_corpus, "Name of the corpus the training set comes from")
        ->required();
    cross_cmd->add_option("--corpus", cross.corpus, "Test corpus [OUT/corpus.jsonl]");
    cross_cmd->add_option("--speech-type", cross.speech_type, "Only test speeches of this type")
        ->check(CLI::IsMember({"campaign", "state_of_state", "ceremonial", "famous"}));

    GridArgs grid;
    auto* grid_cmd = experiment_cmd->add_subcommand("grid", "Repeated holdout over model variants");
    add_config(*grid_cmd, grid.common);
    add_seed(*grid_cmd, grid.common);
    add_workers(*grid_cmd, grid.common);
    add_backend(*grid_cmd, grid.common);
    grid_cmd->add_option("--training", grid.training, "Training sentence CSV [OUT/training.csv]");
    grid_cmd->add_option("--repetitions", grid.common.flags.repetitions, "Holdout runs per variant");
    grid_cmd->add_flag("--baseline-only", grid.baseline_only, "Only the configured variant, not all eight");

    SynthArgs synth;
    auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic corpus with planted labels");
    add_config(*synth_cmd, synth.common);
    add_seed(*synth_cmd, synth.common);
    synth_cmd->add_option("--preset", synth.preset, "Corpus shape")
        ->check(CLI::IsMember({"desk", "governor", "presidential"}))
        ->capture_default_str();
    synth_cmd->add_option("--noise", synth.noise, "Share of off-vocabulary tokens")->check(CLI::Range(0.0, 0.999));
    synth_cmd->add_option("--name", synth.name, "Corpus name");

    ReportArgs report;
    auto* report_cmd = app.add_subcommand("report", "Render tables and SVG figures from JSON artifacts");
    add_config(*report_cmd, report.common);
    report_cmd->add_option("inputs", report.inputs, "Artifacts: evaluation, sparsity, cross-context, grid, "
                                                    "metrics-table JSON")
        ->required();

    std::string command = "popfrac";
    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        print_error("usage", command, e.what());
        return 2;
    }

    try {
        if (*ingest_cmd) command = "ingest", run_ingest(ingest);
        else if (*match_cmd) command = "match", run_match(match);
        else if (*train_cmd) command = "train", run_train(train);
        else if (*classify_cmd) command = "classify", run_classify(classify);
        else if (*evaluate_cmd) command = "evaluate", run_evaluate(evaluate);
        else if (*sparsity_cmd) command = "experiment sparsity", run_sparsity(sparsity);
        else if (*cross_cmd) command = "experiment cross-context", run_cross_context(cross);
        else if (*grid_cmd) command = "experiment grid", run_grid(grid);
        else if (*synth_cmd) command = "synth", run_synth(synth);
        else if (*report_cmd) command = "report", run_report(report);
    } catch (const Error& e) {
        print_error(to_string(e.kind()), command, e.what());
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        print_error("io", command, e.what());
        return 5;
    } catch (const std::exception& e) {
        print_error("internal", command, e.what());
        return 1;
    }
    return 0;
}
