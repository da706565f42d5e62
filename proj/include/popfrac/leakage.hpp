#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "popfrac/corpus.hpp"

namespace popfrac {

/// Lowercases ASCII, maps typographic quotes and dashes to their ASCII forms,
/// removes ASCII punctuation, collapses whitespace to single spaces and
/// trims. Idempotent.
std::string normalize_text(std::string_view text);

/// Splits normalized text on single spaces.
std::vector<std::string> tokenize(std::string_view normalized);

/// Identity of a training sentence that survives reordering and
/// persistence: the category plus a hash of the raw text.
struct SentenceKey {
    Category category = Category::neutral;
    std::uint64_t text_hash = 0;

    friend auto operator<=>(const SentenceKey&, const SentenceKey&) = default;
};

SentenceKey key_of(const TrainingSentence& sentence);

struct MatchEntry {
    SentenceKey key;
    std::optional<std::string> speech_id;
    double similarity = 0.0;  // 1.0 for exact containment and pre-linked sentences
    bool prelinked = false;
};

struct CategoryMatchStats {
    std::size_t total = 0;
    std::size_t matched = 0;
    double rate() const { return total == 0 ? 0.0 : static_cast<double>(matched) / total; }
};

class MatchIndex {
public:
    MatchIndex() = default;
    MatchIndex(std::vector<MatchEntry> entries,
               std::array<CategoryMatchStats, kNumCategories> stats, double threshold);

    const MatchEntry* find(const SentenceKey& key) const;
    std::optional<std::string> speech_of(const TrainingSentence& sentence) const;

    /// Entries ordered by key, one per distinct training sentence.
    std::span<const MatchEntry> entries() const { return entries_; }
    const CategoryMatchStats& stats(Category c) const { return stats_[index_of(c)]; }
    double threshold() const { return threshold_; }
    std::size_t matched_count() const;

    /// Hash over the persisted content.
    std::uint64_t fingerprint() const;

    /// CSV columns: text_hash,category,speech_id,similarity.
    void write_csv(const std::filesystem::path& path) const;
    /// Rebuilds an index from CSV; match-rate statistics are recomputed from
    /// the entries (one per distinct sentence).
    static MatchIndex read_csv(const std::filesystem::path& path);

private:
    std::vector<MatchEntry> entries_;
    std::array<CategoryMatchStats, kNumCategories> stats_{};
    double threshold_ = 0.0;
};

struct SpeechMatch {
    std::string speech_id;
    double similarity = 0.0;
};

/// Normalized, tokenized view of a corpus for repeated sentence lookups.
class SpeechMatcher {
public:
    explicit SpeechMatcher(const Corpus& corpus);

    /// Exact containment of the normalized sentence first (lowest speech id
    /// wins); otherwise the best sliding-window token-set Jaccard similarity
    /// over all speeches, accepted when >= threshold.
    std::optional<SpeechMatch> match(std::string_view sentence, double threshold) const;

private:
    struct Entry {
        std::string id;
        std::string normalized;
        std::vector<int> tokens;
        std::vector<int> distinct;  // sorted
    };
    std::vector<Entry> speeches_;  // ordered by id
    std::map<std::string, int, std::less<>> vocabulary_;
};

inline constexpr double kDefaultMatchThreshold = 0.8;

std::optional<std::string> match_sentence(const TrainingSentence& sentence, const Corpus& corpus,
                                          double threshold);

/// Matches every training sentence. Sentences carrying source_speech_id are
/// kept as linked when that speech is in the corpus. Throws
/// Error(invalid_argument) for a threshold outside [0, 1].
MatchIndex build_match_index(std::span<const TrainingSentence> training, const Corpus& corpus,
                             double threshold, std::size_t workers = 1);

}  // namespace popfrac
