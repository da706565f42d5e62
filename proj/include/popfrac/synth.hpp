#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "popfrac/corpus.hpp"

namespace popfrac {

/// Parameters of a synthetic corpus with planted sentence labels.
struct SynthSpec {
    std::string corpus_name = "synthetic";
    int n_speakers = 6;
    int speeches_per_speaker = 4;
    /// Optional per-speaker speech counts; overrides speeches_per_speaker.
    std::vector<int> speeches_per_speaker_list;
    int sentences_per_speech = 20;
    /// Populist fraction per speech, applied cyclically in generation order
    /// (speaker by speaker).
    std::vector<double> fraction_schedule = {0.0, 0.05, 0.10, 0.15, 0.35, 0.45, 0.50, 0.60};
    int vocabulary_size = 40;
    /// Token pools per category; generated from the seed when empty.
    std::array<std::vector<std::string>, kNumCategories> vocabularies;
    /// Probability that a token is drawn from another category's pool.
    double noise_rate = 0.0;
    int min_tokens = 6;
    int max_tokens = 12;
    int extracts_per_speech = 2;  // verbatim training extracts per speech
    int fresh_per_category = 30;  // training sentences not taken from any speech
    std::uint64_t seed = 0;

    /// Throws Error(invalid_argument) when the spec cannot produce a valid
    /// corpus.
    void validate() const;
};

/// 6 speakers x 4 speeches x 20 sentences; speakers alternate between a
/// low (0-0.15) and a high (0.35-0.6) fraction cluster.
SynthSpec desk_spec(std::uint64_t seed = 0);
/// 73 units, 288 speeches (69 units of four, four of three).
SynthSpec governor_shaped_spec(std::uint64_t seed = 0);
/// 7 speakers, 45 speeches.
SynthSpec presidential_shaped_spec(std::uint64_t seed = 0);

struct PlantedSentence {
    std::string speech_id;
    std::size_t index = 0;
    Category category = Category::neutral;
    std::string text;
};

struct PlantedSpeech {
    std::string speech_id;
    std::string speaker_id;
    std::string unit_id;
    std::size_t n_sentences = 0;
    std::size_t n_populist = 0;
    double planted_fraction = 0;
    Grade human_score;
    BinaryLabel label = BinaryLabel::non_populist;
};

struct SynthCorpus {
    Corpus corpus;
    std::vector<TrainingSentence> training;
    std::vector<bool> training_is_extract;  // parallel to training
    std::vector<PlantedSpeech> speeches;
    std::vector<PlantedSentence> sentences;
};

/// Speech grades are 2 x realised populist fraction, rounded to one decimal,
/// so the 0.5 grade cutoff sits at fraction 0.25. Every generated sentence
/// is unique across the corpus and the training set.
SynthCorpus generate_corpus(const SynthSpec& spec);

/// Writes corpus.jsonl, training.csv, ground_truth.csv (planted sentence
/// labels) and planted_speeches.csv into `dir`.
void write_synth(const SynthCorpus& synth, const std::filesystem::path& dir);

}  // namespace popfrac
