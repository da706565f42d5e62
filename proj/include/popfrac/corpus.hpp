#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace popfrac {

enum class SpeechType { campaign, state_of_state, ceremonial, famous };
enum class Category { populist = 0, pluralist = 1, neutral = 2 };
enum class BinaryLabel { non_populist = 0, populist = 1 };

inline constexpr std::size_t kNumCategories = 3;
inline constexpr Category kAllCategories[] = {Category::populist, Category::pluralist,
                                              Category::neutral};

std::string_view to_string(SpeechType type);
std::string_view to_string(Category category);
std::string_view to_string(BinaryLabel label);
SpeechType parse_speech_type(std::string_view text);
Category parse_category(std::string_view text);

inline std::size_t index_of(Category c) { return static_cast<std::size_t>(c); }

/// Human holistic grade on [0, 2] with one decimal place, stored as tenths
/// so that equality and the 0.5 cutoff are exact.
class Grade {
public:
    Grade() = default;

    /// Throws Error(data) when the value is outside [0, 2] or has more than
    /// one decimal place.
    static Grade from_double(double value);
    static Grade from_tenths(int tenths);

    int tenths() const { return tenths_; }
    double value() const { return tenths_ / 10.0; }

    friend auto operator<=>(const Grade&, const Grade&) = default;

private:
    explicit Grade(int tenths) : tenths_(tenths) {}
    int tenths_ = 0;
};

struct Speech {
    std::string id;
    std::string speaker_id;
    std::string unit_id;
    std::optional<std::string> state;
    SpeechType speech_type = SpeechType::campaign;
    std::optional<std::string> period;
    std::string text;
    Grade human_score;
};

struct TrainingSentence {
    std::string text;
    Category category = Category::neutral;
    std::optional<std::string> source_speech_id;
};

/// Speeches keyed for lookup by id. Speech order is preserved as loaded.
class Corpus {
public:
    Corpus() = default;
    /// Throws Error(data) on duplicate ids.
    Corpus(std::string name, std::vector<Speech> speeches);

    const std::string& name() const { return name_; }
    std::span<const Speech> speeches() const { return speeches_; }
    std::size_t size() const { return speeches_.size(); }
    bool empty() const { return speeches_.empty(); }

    const Speech* find(std::string_view id) const;
    const Speech& at(std::string_view id) const;
    bool contains(std::string_view id) const { return find(id) != nullptr; }

    /// unit_id -> speech ids, ordered by unit id; speech ids in corpus order.
    const std::map<std::string, std::vector<std::string>, std::less<>>& units() const {
        return units_;
    }

private:
    std::string name_;
    std::vector<Speech> speeches_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
    std::map<std::string, std::vector<std::string>, std::less<>> units_;
};

enum class CorpusFormat { jsonl, csv };
CorpusFormat parse_corpus_format(std::string_view text);

struct RejectedRecord {
    std::size_t record = 0;  // 1-based record number in the file
    std::string id;          // empty when the id itself was unreadable
    std::string reason;
};

struct LoadReport {
    std::size_t records_read = 0;
    std::vector<RejectedRecord> rejected;
};

struct LoadResult {
    Corpus corpus;
    LoadReport report;
};

/// Reads a speech corpus. Malformed records and out-of-range grades are
/// collected into the report; a duplicate id is fatal.
LoadResult ingest_corpus(const std::filesystem::path& path, CorpusFormat format,
                         std::string name = {});

/// Parses a single JSON record; throws Error(data) with the rejection reason.
Speech speech_from_json(const nlohmann::json& record);
nlohmann::json to_json(const Speech& speech);

void write_corpus_jsonl(const Corpus& corpus, std::ostream& out);
void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path);

struct DroppedUnit {
    std::string unit_id;
    std::size_t n_speeches = 0;
};

struct ValidationReport {
    std::vector<DroppedUnit> dropped_units;
    std::vector<RejectedRecord> rejected_records;
    std::size_t dropped_speeches() const;
};

inline constexpr std::size_t kMinSpeechesPerUnit = 3;

/// Removes units with fewer than three speeches. Throws Error(data) when
/// nothing survives.
std::pair<Corpus, ValidationReport> validate_corpus(const Corpus& corpus);

nlohmann::json to_json(const ValidationReport& report);

/// Training sentence CSV: header `text,category[,source_speech_id]`.
std::vector<TrainingSentence> load_training_sentences(const std::filesystem::path& path);
void write_training_sentences(std::span<const TrainingSentence> sentences,
                              const std::filesystem::path& path);

/// Splits on '.', '!' and '?'. A run of consecutive terminators ("...",
/// "?!") closes one sentence and stays attached to it. A trailing fragment
/// without terminator becomes the last sentence. Sentences are trimmed and
/// whitespace-only fragments dropped.
std::vector<std::string> split_sentences(std::string_view text);

/// Sentences shorter than this after trimming are not sent to a classifier.
inline constexpr std::size_t kMinSentenceLength = 2;

/// split_sentences followed by the minimum-length filter.
std::vector<std::string> classifiable_sentences(std::string_view text);

inline constexpr double kGradeCutoff = 0.5;

/// populist iff score >= 0.5. Throws Error(invalid_argument) outside [0, 2].
BinaryLabel binarize_score(double score);
BinaryLabel binarize_score(Grade grade);

}  // namespace popfrac
