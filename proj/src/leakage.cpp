#include "popfrac/leakage.hpp"

#include <algorithm>
#include <fstream>
#include <unordered_map>

#include "popfrac/csv.hpp"
#include "popfrac/error.hpp"
#include "popfrac/hash.hpp"
#include "popfrac/parallel.hpp"

namespace popfrac {

namespace {

// UTF-8 sequences folded before punctuation stripping.
struct Fold {
    std::string_view from;
    char to;
};

constexpr Fold kFolds[] = {
    {"‘", '\''}, {"’", '\''}, {"‚", '\''}, {"′", '\''},
    {"“", '"'},  {"”", '"'},  {"„", '"'},  {"″", '"'},
    {"‐", '-'},  {"‑", '-'},  {"‒", '-'},  {"–", '-'},
    {"—", '-'},  {"―", '-'},  {"−", '-'},  {" ", ' '},
};

bool is_ascii_punct(unsigned char c) {
    return (c >= 33 && c <= 47) || (c >= 58 && c <= 64) || (c >= 91 && c <= 96) ||
           (c >= 123 && c <= 126);
}

bool is_ascii_space(unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

std::string normalize_text(std::string_view text) {
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    auto put = [&](char c) {
        if (is_ascii_space(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            return;
        }
        if (is_ascii_punct(static_cast<unsigned char>(c))) return;
        if (pending_space) out += ' ';
        pending_space = false;
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        out += c;
    };

    for (std::size_t i = 0; i < text.size();) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (c >= 0x80) {
            bool folded = false;
            for (const Fold& f : kFolds) {
                if (text.substr(i).starts_with(f.from)) {
                    put(f.to);
                    i += f.from.size();
                    folded = true;
                    break;
                }
            }
            if (folded) continue;
        }
        put(static_cast<char>(c));
        ++i;
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view normalized) {
    std::vector<std::string> tokens;
    std::size_t start = 0;
    while (start < normalized.size()) {
        std::size_t end = normalized.find(' ', start);
        if (end == std::string_view::npos) end = normalized.size();
        if (end > start) tokens.emplace_back(normalized.substr(start, end - start));
        start = end + 1;
    }
    return tokens;
}

SentenceKey key_of(const TrainingSentence& sentence) {
    return {sentence.category, fnv1a(sentence.text)};
}

MatchIndex::MatchIndex(std::vector<MatchEntry> entries,
                       std::array<CategoryMatchStats, kNumCategories> stats, double threshold)
    : entries_(std::move(entries)), stats_(stats), threshold_(threshold) {
    std::sort(entries_.begin(), entries_.end(),
              [](const MatchEntry& a, const MatchEntry& b) { return a.key < b.key; });
}

const MatchEntry* MatchIndex::find(const SentenceKey& key) const {
    auto it = std::lower_bound(entries_.begin(), entries_.end(), key,
                               [](const MatchEntry& e, const SentenceKey& k) { return e.key < k; });
    return (it != entries_.end() && it->key == key) ? &*it : nullptr;
}

std::optional<std::string> MatchIndex::speech_of(const TrainingSentence& sentence) const {
    const MatchEntry* e = find(key_of(sentence));
    return e ? e->speech_id : std::nullopt;
}

std::size_t MatchIndex::matched_count() const {
    return static_cast<std::size_t>(std::count_if(
        entries_.begin(), entries_.end(), [](const MatchEntry& e) { return e.speech_id.has_value(); }));
}

std::uint64_t MatchIndex::fingerprint() const {
    Fnv1a h;
    for (const MatchEntry& e : entries_) {
        h.field(to_hex(e.key.text_hash)).field(to_string(e.key.category));
        h.field(e.speech_id.value_or(""));
    }
    return h.digest();
}

void MatchIndex::write_csv(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
    csv::write_row(out, {"text_hash", "category", "speech_id", "similarity"});
    char sim[32];
    for (const MatchEntry& e : entries_) {
        std::snprintf(sim, sizeof(sim), "%.6f", e.similarity);
        csv::write_row(out, {to_hex(e.key.text_hash), std::string(to_string(e.key.category)),
                             e.speech_id.value_or(""), sim});
    }
}

MatchIndex MatchIndex::read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::not_found, "match index not found: '" + path.string() + "'");
    const auto rows = csv::read_all(in);
    if (rows.empty() || rows.front().size() < 4 || rows.front()[0] != "text_hash") {
        fail(ErrorKind::data, "'" + path.string() + "' is not a match index CSV");
    }
    std::vector<MatchEntry> entries;
    std::array<CategoryMatchStats, kNumCategories> stats{};
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() < 4) fail(ErrorKind::data, "match index row " + std::to_string(r + 1) + " is short");
        MatchEntry e;
        e.key = {parse_category(row[1]), from_hex(row[0])};
        if (!row[2].empty()) e.speech_id = row[2];
        e.similarity = std::stod(row[3]);
        auto& st = stats[index_of(e.key.category)];
        ++st.total;
        if (e.speech_id) ++st.matched;
        entries.push_back(std::move(e));
    }
    return MatchIndex(std::move(entries), stats, 0.0);
}

SpeechMatcher::SpeechMatcher(const Corpus& corpus) {
    std::vector<const Speech*> ordered;
    for (const Speech& s : corpus.speeches()) ordered.push_back(&s);
    std::sort(ordered.begin(), ordered.end(),
              [](const Speech* a, const Speech* b) { return a->id < b->id; });

    for (const Speech* s : ordered) {
        Entry e;
        e.id = s->id;
        e.normalized = normalize_text(s->text);
        for (const auto& tok : tokenize(e.normalized)) {
            auto [it, _] = vocabulary_.emplace(tok, static_cast<int>(vocabulary_.size()));
            e.tokens.push_back(it->second);
        }
        e.distinct = e.tokens;
        std::sort(e.distinct.begin(), e.distinct.end());
        e.distinct.erase(std::unique(e.distinct.begin(), e.distinct.end()), e.distinct.end());
        speeches_.push_back(std::move(e));
    }
}

std::optional<SpeechMatch> SpeechMatcher::match(std::string_view sentence, double threshold) const {
    const std::string needle = normalize_text(sentence);
    if (needle.empty()) return std::nullopt;

    for (const Entry& e : speeches_) {
        if (e.normalized.find(needle) != std::string::npos) return SpeechMatch{e.id, 1.0};
    }

    // Tokens unseen in the corpus get distinct negative ids: they count
    // towards the sentence set but can never be matched.
    std::vector<int> words;
    int unseen = -1;
    for (const auto& tok : tokenize(needle)) {
        auto it = vocabulary_.find(tok);
        words.push_back(it == vocabulary_.end() ? unseen-- : it->second);
    }
    std::vector<int> set = words;
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
    const std::size_t set_size = set.size();
    auto in_set = [&](int id) { return std::binary_search(set.begin(), set.end(), id); };

    std::optional<SpeechMatch> best;
    double best_sim = -1.0;
    std::unordered_map<int, int> window;
    for (const Entry& e : speeches_) {
        if (e.tokens.empty()) continue;
        std::size_t shared = 0;
        for (int id : set) shared += std::binary_search(e.distinct.begin(), e.distinct.end(), id);
        const double bound = static_cast<double>(shared) / static_cast<double>(set_size);
        if (bound < threshold || bound <= best_sim) continue;

        const std::size_t width = std::min(words.size(), e.tokens.size());
        window.clear();
        std::size_t inter = 0;
        auto add = [&](int id) {
            if (window[id]++ == 0 && in_set(id)) ++inter;
        };
        auto remove = [&](int id) {
            auto it = window.find(id);
            if (--it->second == 0) {
                window.erase(it);
                if (in_set(id)) --inter;
            }
        };
        for (std::size_t i = 0; i < width; ++i) add(e.tokens[i]);
        for (std::size_t start = 0;; ++start) {
            const double sim = static_cast<double>(inter) /
                               static_cast<double>(window.size() + set_size - inter);
            if (sim > best_sim) {
                best_sim = sim;
                best = SpeechMatch{e.id, sim};
            }
            if (start + width >= e.tokens.size()) break;
            remove(e.tokens[start]);
            add(e.tokens[start + width]);
        }
    }
    if (best && best->similarity >= threshold) return best;
    return std::nullopt;
}

std::optional<std::string> match_sentence(const TrainingSentence& sentence, const Corpus& corpus,
                                          double threshold) {
    require(threshold >= 0.0 && threshold <= 1.0, "match threshold must lie in [0, 1]");
    auto m = SpeechMatcher(corpus).match(sentence.text, threshold);
    if (!m) return std::nullopt;
    return m->speech_id;
}

MatchIndex build_match_index(std::span<const TrainingSentence> training, const Corpus& corpus,
                             double threshold, std::size_t workers) {
    require(threshold >= 0.0 && threshold <= 1.0, "match threshold must lie in [0, 1]");
    const SpeechMatcher matcher(corpus);

    // One lookup per distinct key; duplicates share the result.
    std::map<SentenceKey, std::size_t> first_of;
    std::vector<std::size_t> distinct;
    for (std::size_t i = 0; i < training.size(); ++i) {
        if (first_of.emplace(key_of(training[i]), distinct.size()).second) distinct.push_back(i);
    }

    std::vector<MatchEntry> entries(distinct.size());
    parallel_for(distinct.size(), workers, [&](std::size_t d) {
        const TrainingSentence& s = training[distinct[d]];
        MatchEntry& e = entries[d];
        e.key = key_of(s);
        if (auto m = matcher.match(s.text, threshold)) {
            e.speech_id = m->speech_id;
            e.similarity = m->similarity;
        }
    });

    // Pre-links override matching; the smallest linked id wins among
    // duplicates so the result does not depend on input order. Links to
    // speeches absent from the corpus cannot leak and are ignored.
    std::map<SentenceKey, std::string> links;
    for (const TrainingSentence& s : training) {
        if (!s.source_speech_id || !corpus.contains(*s.source_speech_id)) continue;
        auto [it, inserted] = links.emplace(key_of(s), *s.source_speech_id);
        if (!inserted && *s.source_speech_id < it->second) it->second = *s.source_speech_id;
    }
    for (MatchEntry& e : entries) {
        if (auto it = links.find(e.key); it != links.end()) {
            e.speech_id = it->second;
            e.similarity = 1.0;
            e.prelinked = true;
        }
    }

    std::array<CategoryMatchStats, kNumCategories> stats{};
    for (const TrainingSentence& s : training) {
        auto& st = stats[index_of(s.category)];
        ++st.total;
        if (entries[first_of.at(key_of(s))].speech_id) ++st.matched;
    }
    return MatchIndex(std::move(entries), stats, threshold);
}

}  // namespace popfrac
