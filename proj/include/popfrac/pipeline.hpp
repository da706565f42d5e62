#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "popfrac/backend.hpp"
#include "popfrac/corpus.hpp"
#include "popfrac/leakage.hpp"

namespace popfrac {

/// Grouping for leave-out training: a governor's term or a candidate.
enum class UnitKind { term, speaker };

std::string_view to_string(UnitKind kind);
UnitKind parse_unit_kind(std::string_view text);

struct Unit {
    std::string unit_id;
    UnitKind kind = UnitKind::term;
    std::vector<std::string> speech_ids;
    /// Training sentences matched to one of this unit's speeches.
    std::set<SentenceKey> excluded;
};

std::vector<Unit> plan_units(const Corpus& corpus, UnitKind kind, const MatchIndex& index);

/// Training sentences left for a unit after exclusion, in input order.
std::vector<TrainingSentence> training_for_unit(const Unit& unit, std::span<const TrainingSentence> training);

/// Fits on the training set minus the unit's exclusions. Throws
/// Error(invalid_argument) naming the class when exclusion empties one.
TrainedModel train_excluding(const Unit& unit, std::span<const TrainingSentence> training,
                             const Backend& backend, std::uint64_t seed);
TrainedModel train_excluding(const Unit& unit, std::span<const TrainingSentence> training,
                             const MatchIndex& index, const BackendConfig& config, std::uint64_t seed);

struct SpeechPrediction {
    std::string speech_id;
    std::string speaker_id;
    std::size_t n_sentences = 0;
    std::array<std::size_t, kNumCategories> counts{};
    double populist_fraction = 0;
    double human_score = 0;

    std::size_t count(Category c) const { return counts[index_of(c)]; }
    double fraction(Category c) const;
};

/// Splits, classifies and tallies. Throws Error(invalid_argument) when the
/// speech yields no classifiable sentence.
SpeechPrediction score_speech(const TrainedModel& model, const Speech& speech);

struct SpeakerPrediction {
    std::string speaker_id;
    std::size_t n_speeches = 0;
    std::size_t n_sentences = 0;
    std::array<std::size_t, kNumCategories> counts{};
    double populist_fraction = 0;  // pooled over sentences, not averaged over speeches
    double mean_human_score = 0;   // unweighted mean over speeches

    std::size_t count(Category c) const { return counts[index_of(c)]; }
};

/// Pools sentence counts of one speaker's speeches. Throws
/// Error(invalid_argument) for an empty list or mixed speakers.
SpeakerPrediction aggregate_speaker(std::span<const SpeechPrediction> predictions, const Corpus& corpus);

/// All speakers, ordered by speaker id.
std::vector<SpeakerPrediction> aggregate_speakers(std::span<const SpeechPrediction> predictions,
                                                  const Corpus& corpus);

/// What one unit was trained on.
struct UnitRun {
    std::string unit_id;
    std::vector<std::string> speech_ids;
    std::uint64_t seed = 0;
    std::size_t n_training = 0;
    std::size_t n_excluded = 0;
    std::uint64_t training_fingerprint = 0;
    std::vector<SentenceKey> used;  // in memory only; not persisted
};

struct PipelineResult {
    std::string corpus_name;
    UnitKind unit_kind = UnitKind::term;
    BackendConfig config;
    std::uint64_t seed = 0;
    std::uint64_t match_index_fingerprint = 0;
    std::vector<UnitRun> units;                 // ordered by unit id
    std::vector<SpeechPrediction> speeches;     // corpus order
    std::vector<SpeakerPrediction> speakers;    // ordered by speaker id
};

/// Seed used for a unit: derived from the run seed and the unit id, so it
/// does not depend on processing order.
std::uint64_t unit_seed(std::uint64_t run_seed, std::string_view unit_id);

/// A unit's leakage-safe model with its training record.
struct UnitModel {
    UnitRun run;
    TrainedModel model;
};

/// Training stage of run_pipeline: one model per unit, ordered by unit id.
std::vector<UnitModel> train_units(const Corpus& corpus, std::span<const TrainingSentence> training,
                                   const MatchIndex& index, const Backend& backend, UnitKind kind,
                                   std::uint64_t seed, std::size_t workers = 1);

/// Scoring stage: each unit's speeches are classified by that unit's model
/// only. Throws Error(data) when a corpus speech belongs to no unit.
PipelineResult score_units(const Corpus& corpus, std::span<const UnitModel> units, UnitKind kind,
                           const BackendConfig& config, std::uint64_t seed,
                           std::uint64_t match_index_fingerprint, std::size_t workers = 1);

/// Scores every speech with a single model (no leave-out); the result has
/// no units.
PipelineResult score_corpus(const Corpus& corpus, const TrainedModel& model, std::size_t workers = 1);

/// plan_units -> train_excluding -> score_speech -> aggregate_speakers.
/// Units run on up to `workers` threads; any unit failure aborts the run
/// with the unit named in the message.
PipelineResult run_pipeline(const Corpus& corpus, std::span<const TrainingSentence> training,
                            const MatchIndex& index, const Backend& backend, UnitKind kind,
                            std::uint64_t seed, std::size_t workers = 1);
PipelineResult run_pipeline(const Corpus& corpus, std::span<const TrainingSentence> training,
                            const MatchIndex& index, const BackendConfig& config, UnitKind kind,
                            std::uint64_t seed, std::size_t workers = 1);

/// Number of (unit, training sentence) pairs where a sentence used for the
/// unit's model is matched in `index` to one of the unit's speeches.
std::size_t audit_leakage(const PipelineResult& result, const MatchIndex& index);

nlohmann::json to_json(const SpeechPrediction& p);
nlohmann::json to_json(const SpeakerPrediction& p);
nlohmann::json to_json(const PipelineResult& result);
PipelineResult pipeline_result_from_json(const nlohmann::json& j);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path, std::string_view what);

}  // namespace popfrac
