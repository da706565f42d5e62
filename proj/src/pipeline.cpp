#include "popfrac/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>

#include "popfrac/error.hpp"
#include "popfrac/hash.hpp"
#include "popfrac/parallel.hpp"
#include "popfrac/random.hpp"

namespace popfrac {

std::string_view to_string(UnitKind kind) { return kind == UnitKind::term ? "term" : "speaker"; }

UnitKind parse_unit_kind(std::string_view text) {
    if (text == "term") return UnitKind::term;
    if (text == "speaker") return UnitKind::speaker;
    fail(ErrorKind::invalid_argument, "unknown unit kind '" + std::string(text) + "' (expected term or speaker)");
}

std::vector<Unit> plan_units(const Corpus& corpus, UnitKind kind, const MatchIndex& index) {
    std::map<std::string, Unit> units;
    std::map<std::string, std::string, std::less<>> unit_of_speech;
    for (const Speech& s : corpus.speeches()) {
        const std::string& id = kind == UnitKind::term ? s.unit_id : s.speaker_id;
        Unit& u = units[id];
        u.unit_id = id;
        u.kind = kind;
        u.speech_ids.push_back(s.id);
        unit_of_speech[s.id] = id;
    }
    for (const MatchEntry& e : index.entries()) {
        if (!e.speech_id) continue;
        auto it = unit_of_speech.find(*e.speech_id);
        if (it != unit_of_speech.end()) units.at(it->second).excluded.insert(e.key);
    }
    std::vector<Unit> out;
    out.reserve(units.size());
    for (auto& [_, u] : units) out.push_back(std::move(u));
    return out;
}

std::vector<TrainingSentence> training_for_unit(const Unit& unit, std::span<const TrainingSentence> training) {
    std::vector<TrainingSentence> kept;
    kept.reserve(training.size());
    for (const TrainingSentence& s : training) {
        if (!unit.excluded.contains(key_of(s))) kept.push_back(s);
    }
    return kept;
}

namespace {

void check_classes_survive(const Unit& unit, std::span<const TrainingSentence> kept,
                           std::span<const TrainingSentence> training) {
    std::array<std::size_t, kNumCategories> before{}, after{};
    for (const auto& s : training) ++before[index_of(s.category)];
    for (const auto& s : kept) ++after[index_of(s.category)];
    for (Category c : kAllCategories) {
        if (after[index_of(c)] < 2 && before[index_of(c)] >= 2) {
            fail(ErrorKind::invalid_argument,
                 "unit '" + unit.unit_id + "': exclusion leaves class '" + std::string(to_string(c)) +
                     "' with " + std::to_string(after[index_of(c)]) + " training sentences");
        }
    }
}

}  // namespace

TrainedModel train_excluding(const Unit& unit, std::span<const TrainingSentence> training,
                             const Backend& backend, std::uint64_t seed) {
    const auto kept = training_for_unit(unit, training);
    check_classes_survive(unit, kept, training);
    TrainedModel model = backend.fit(kept, seed);
    model.provenance().n_excluded = training.size() - kept.size();
    return model;
}

TrainedModel train_excluding(const Unit& unit, std::span<const TrainingSentence> training,
                             const MatchIndex& index, const BackendConfig& config, std::uint64_t seed) {
    // Recompute the exclusion set from the index so a Unit built elsewhere
    // cannot drift from it.
    Unit u = unit;
    std::set<std::string, std::less<>> speeches(unit.speech_ids.begin(), unit.speech_ids.end());
    for (const MatchEntry& e : index.entries()) {
        if (e.speech_id && speeches.contains(*e.speech_id)) u.excluded.insert(e.key);
    }
    return train_excluding(u, training, *make_backend(config), seed);
}

double SpeechPrediction::fraction(Category c) const {
    return n_sentences == 0 ? 0.0 : static_cast<double>(count(c)) / static_cast<double>(n_sentences);
}

SpeechPrediction score_speech(const TrainedModel& model, const Speech& speech) {
    const auto sentences = classifiable_sentences(speech.text);
    if (sentences.empty()) {
        fail(ErrorKind::invalid_argument, "speech '" + speech.id + "' has no sentences to classify");
    }
    SpeechPrediction p;
    p.speech_id = speech.id;
    p.speaker_id = speech.speaker_id;
    p.human_score = speech.human_score.value();
    p.n_sentences = sentences.size();
    for (Category c : model.predict(sentences)) ++p.counts[index_of(c)];
    p.populist_fraction = p.fraction(Category::populist);
    return p;
}

SpeakerPrediction aggregate_speaker(std::span<const SpeechPrediction> predictions, const Corpus& corpus) {
    require(!predictions.empty(), "aggregate_speaker: no speech predictions");
    SpeakerPrediction sp;
    sp.speaker_id = predictions.front().speaker_id;
    double grade_sum = 0;
    for (const SpeechPrediction& p : predictions) {
        if (p.speaker_id != sp.speaker_id) {
            fail(ErrorKind::invalid_argument, "aggregate_speaker: mixed speakers '" + sp.speaker_id + "' and '" +
                                                  p.speaker_id + "'");
        }
        const Speech* s = corpus.find(p.speech_id);
        if (s && s->speaker_id != sp.speaker_id) {
            fail(ErrorKind::invalid_argument, "aggregate_speaker: speech '" + p.speech_id +
                                                  "' belongs to speaker '" + s->speaker_id + "'");
        }
        ++sp.n_speeches;
        sp.n_sentences += p.n_sentences;
        for (std::size_t k = 0; k < kNumCategories; ++k) sp.counts[k] += p.counts[k];
        grade_sum += s ? s->human_score.value() : p.human_score;
    }
    sp.populist_fraction = sp.n_sentences == 0 ? 0.0
                                               : static_cast<double>(sp.count(Category::populist)) /
                                                     static_cast<double>(sp.n_sentences);
    sp.mean_human_score = grade_sum / static_cast<double>(sp.n_speeches);
    return sp;
}

std::vector<SpeakerPrediction> aggregate_speakers(std::span<const SpeechPrediction> predictions,
                                                  const Corpus& corpus) {
    std::map<std::string, std::vector<SpeechPrediction>> by_speaker;
    for (const auto& p : predictions) by_speaker[p.speaker_id].push_back(p);
    std::vector<SpeakerPrediction> out;
    for (const auto& [_, preds] : by_speaker) out.push_back(aggregate_speaker(preds, corpus));
    return out;
}

std::uint64_t unit_seed(std::uint64_t run_seed, std::string_view unit_id) {
    return mix_seed(run_seed, fnv1a(unit_id));
}

std::vector<UnitModel> train_units(const Corpus& corpus, std::span<const TrainingSentence> training,
                                   const MatchIndex& index, const Backend& backend, UnitKind kind,
                                   std::uint64_t seed, std::size_t workers) {
    const std::vector<Unit> units = plan_units(corpus, kind, index);

    std::vector<std::optional<UnitModel>> trained(units.size());
    parallel_for(units.size(), workers, [&](std::size_t u) {
        const Unit& unit = units[u];
        try {
            UnitRun run;
            run.unit_id = unit.unit_id;
            run.speech_ids = unit.speech_ids;
            run.seed = unit_seed(seed, unit.unit_id);
            const auto kept = training_for_unit(unit, training);
            for (const auto& s : kept) run.used.push_back(key_of(s));
            TrainedModel model = train_excluding(unit, training, backend, run.seed);
            run.n_training = model.provenance().n_training;
            run.n_excluded = model.provenance().n_excluded;
            run.training_fingerprint = model.provenance().training_fingerprint;
            trained[u].emplace(UnitModel{std::move(run), std::move(model)});
        } catch (const Error& e) {
            fail(e.kind(), "unit '" + unit.unit_id + "': " + e.what());
        }
    });

    std::vector<UnitModel> out;
    out.reserve(trained.size());
    for (auto& t : trained) out.push_back(std::move(*t));
    return out;
}

PipelineResult score_units(const Corpus& corpus, std::span<const UnitModel> units, UnitKind kind,
                           const BackendConfig& config, std::uint64_t seed,
                           std::uint64_t match_index_fingerprint, std::size_t workers) {
    std::vector<std::vector<SpeechPrediction>> scored(units.size());
    parallel_for(units.size(), workers, [&](std::size_t u) {
        const UnitModel& unit = units[u];
        try {
            for (const auto& id : unit.run.speech_ids) scored[u].push_back(score_speech(unit.model, corpus.at(id)));
        } catch (const Error& e) {
            fail(e.kind(), "unit '" + unit.run.unit_id + "': " + e.what());
        }
    });

    std::map<std::string, SpeechPrediction, std::less<>> by_id;
    for (auto& preds : scored) {
        for (auto& p : preds) by_id.emplace(p.speech_id, std::move(p));
    }

    PipelineResult result;
    result.corpus_name = corpus.name();
    result.unit_kind = kind;
    result.config = config;
    result.seed = seed;
    result.match_index_fingerprint = match_index_fingerprint;
    for (const auto& u : units) result.units.push_back(u.run);
    for (const Speech& s : corpus.speeches()) {
        auto it = by_id.find(s.id);
        if (it == by_id.end()) fail(ErrorKind::data, "speech '" + s.id + "' is not covered by any trained unit");
        result.speeches.push_back(it->second);
    }
    result.speakers = aggregate_speakers(result.speeches, corpus);
    return result;
}

PipelineResult score_corpus(const Corpus& corpus, const TrainedModel& model, std::size_t workers) {
    const auto speeches = corpus.speeches();
    PipelineResult result;
    result.corpus_name = corpus.name();
    result.config = model.provenance().config;
    result.seed = model.provenance().seed;
    result.speeches.resize(speeches.size());
    parallel_for(speeches.size(), workers, [&](std::size_t i) {
        try {
            result.speeches[i] = score_speech(model, speeches[i]);
        } catch (const Error& e) {
            fail(e.kind(), "speech '" + speeches[i].id + "': " + e.what());
        }
    });
    result.speakers = aggregate_speakers(result.speeches, corpus);
    return result;
}

PipelineResult run_pipeline(const Corpus& corpus, std::span<const TrainingSentence> training,
                            const MatchIndex& index, const Backend& backend, UnitKind kind,
                            std::uint64_t seed, std::size_t workers) {
    const auto units = train_units(corpus, training, index, backend, kind, seed, workers);
    return score_units(corpus, units, kind, backend.config(), seed, index.fingerprint(), workers);
}

PipelineResult run_pipeline(const Corpus& corpus, std::span<const TrainingSentence> training,
                            const MatchIndex& index, const BackendConfig& config, UnitKind kind,
                            std::uint64_t seed, std::size_t workers) {
    return run_pipeline(corpus, training, index, *make_backend(config), kind, seed, workers);
}

std::size_t audit_leakage(const PipelineResult& result, const MatchIndex& index) {
    std::size_t violations = 0;
    for (const UnitRun& run : result.units) {
        std::set<std::string_view> speeches(run.speech_ids.begin(), run.speech_ids.end());
        for (const SentenceKey& key : run.used) {
            const MatchEntry* e = index.find(key);
            if (e && e->speech_id && speeches.contains(*e->speech_id)) ++violations;
        }
    }
    return violations;
}

namespace {

nlohmann::json counts_json(const std::array<std::size_t, kNumCategories>& counts) {
    return {{"populist", counts[0]}, {"pluralist", counts[1]}, {"neutral", counts[2]}};
}

std::array<std::size_t, kNumCategories> counts_from_json(const nlohmann::json& j) {
    return {j.at("populist").get<std::size_t>(), j.at("pluralist").get<std::size_t>(),
            j.at("neutral").get<std::size_t>()};
}

}  // namespace

nlohmann::json to_json(const SpeechPrediction& p) {
    return {
        {"speech_id", p.speech_id},
        {"speaker_id", p.speaker_id},
        {"n_sentences", p.n_sentences},
        {"counts", counts_json(p.counts)},
        {"populist_fraction", p.populist_fraction},
        {"pluralist_fraction", p.fraction(Category::pluralist)},
        {"neutral_fraction", p.fraction(Category::neutral)},
        {"human_score", p.human_score},
    };
}

nlohmann::json to_json(const SpeakerPrediction& p) {
    return {
        {"speaker_id", p.speaker_id},
        {"n_speeches", p.n_speeches},
        {"n_sentences", p.n_sentences},
        {"counts", counts_json(p.counts)},
        {"populist_fraction", p.populist_fraction},
        {"human_score", p.mean_human_score},
    };
}

nlohmann::json to_json(const PipelineResult& r) {
    nlohmann::json units = nlohmann::json::array();
    for (const UnitRun& u : r.units) {
        units.push_back({{"unit_id", u.unit_id},
                         {"speech_ids", u.speech_ids},
                         {"seed", u.seed},
                         {"n_training", u.n_training},
                         {"n_excluded", u.n_excluded},
                         {"training_fingerprint", to_hex(u.training_fingerprint)}});
    }
    nlohmann::json speeches = nlohmann::json::array();
    for (const auto& p : r.speeches) speeches.push_back(to_json(p));
    nlohmann::json speakers = nlohmann::json::array();
    for (const auto& p : r.speakers) speakers.push_back(to_json(p));
    return {
        {"corpus", r.corpus_name},
        {"speeches", speeches},
        {"speakers", speakers},
        {"provenance",
         {{"config", to_json(r.config)},
          {"seed", r.seed},
          {"unit_kind", to_string(r.unit_kind)},
          {"match_index_hash", to_hex(r.match_index_fingerprint)},
          {"units", units}}},
    };
}

PipelineResult pipeline_result_from_json(const nlohmann::json& j) {
    try {
        PipelineResult r;
        r.corpus_name = j.at("corpus").get<std::string>();
        const auto& prov = j.at("provenance");
        r.config = backend_config_from_json(prov.at("config"));
        r.seed = prov.at("seed").get<std::uint64_t>();
        r.unit_kind = parse_unit_kind(prov.at("unit_kind").get<std::string>());
        r.match_index_fingerprint = from_hex(prov.at("match_index_hash").get<std::string>());
        for (const auto& u : prov.at("units")) {
            UnitRun run;
            run.unit_id = u.at("unit_id").get<std::string>();
            run.speech_ids = u.at("speech_ids").get<std::vector<std::string>>();
            run.seed = u.at("seed").get<std::uint64_t>();
            run.n_training = u.at("n_training").get<std::size_t>();
            run.n_excluded = u.at("n_excluded").get<std::size_t>();
            run.training_fingerprint = from_hex(u.at("training_fingerprint").get<std::string>());
            r.units.push_back(std::move(run));
        }
        for (const auto& p : j.at("speeches")) {
            SpeechPrediction sp;
            sp.speech_id = p.at("speech_id").get<std::string>();
            sp.speaker_id = p.at("speaker_id").get<std::string>();
            sp.n_sentences = p.at("n_sentences").get<std::size_t>();
            sp.counts = counts_from_json(p.at("counts"));
            sp.populist_fraction = p.at("populist_fraction").get<double>();
            sp.human_score = p.at("human_score").get<double>();
            r.speeches.push_back(std::move(sp));
        }
        for (const auto& p : j.at("speakers")) {
            SpeakerPrediction sp;
            sp.speaker_id = p.at("speaker_id").get<std::string>();
            sp.n_speeches = p.at("n_speeches").get<std::size_t>();
            sp.n_sentences = p.at("n_sentences").get<std::size_t>();
            sp.counts = counts_from_json(p.at("counts"));
            sp.populist_fraction = p.at("populist_fraction").get<double>();
            sp.mean_human_score = p.at("human_score").get<double>();
            r.speakers.push_back(std::move(sp));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, std::string("invalid predictions JSON: ") + e.what());
    }
}

void write_json(const nlohmann::json& j, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path, std::string_view what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::not_found, std::string(what) + " not found: '" + path.string() + "'");
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::data, "'" + path.string() + "' is not valid JSON: " + e.what());
    }
}

}  // namespace popfrac
