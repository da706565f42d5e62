#include <gtest/gtest.h>

#include <random>
#include <set>

#include "popfrac/error.hpp"
#include "popfrac/leakage.hpp"
#include "test_util.hpp"

namespace popfrac {
namespace {

using testing::make_speech;
using testing::TempDir;

TEST(Normalize, Examples) {
    EXPECT_EQ(normalize_text("Hello, World!"), "hello world");
    EXPECT_EQ(normalize_text("a\t b\n  c"), "a b c");
    EXPECT_EQ(normalize_text("don’t"), "dont");
    EXPECT_EQ(normalize_text("  “Quoted”  "), "quoted");
    EXPECT_EQ(normalize_text("!!!"), "");
}

TEST(Normalize, Idempotent) {
    std::mt19937 rng(2);
    const std::string alphabet = "abcXYZ ,.!?'\"\t\n-";
    for (int i = 0; i < 300; ++i) {
        std::string s;
        for (int k = 0; k < 40; ++k) s += alphabet[rng() % alphabet.size()];
        const auto once = normalize_text(s);
        EXPECT_EQ(normalize_text(once), once);
    }
}

TEST(Tokenize, SplitsOnSpaces) {
    EXPECT_EQ(tokenize("a bb c"), (std::vector<std::string>{"a", "bb", "c"}));
    EXPECT_TRUE(tokenize("").empty());
}

// Reference matcher: exact containment of the normalized sentence, else the
// best token-set Jaccard over every window of the sentence's token count.
std::optional<std::pair<std::string, double>> oracle_match(const std::string& sentence, const Corpus& corpus,
                                                           double threshold) {
    const auto needle = normalize_text(sentence);
    if (needle.empty()) return std::nullopt;
    std::vector<const Speech*> speeches;
    for (const auto& s : corpus.speeches()) speeches.push_back(&s);
    std::sort(speeches.begin(), speeches.end(), [](auto* a, auto* b) { return a->id < b->id; });
    for (auto* s : speeches) {
        if (normalize_text(s->text).find(needle) != std::string::npos) return std::pair{s->id, 1.0};
    }
    const auto words = tokenize(needle);
    const std::set<std::string> want(words.begin(), words.end());
    std::optional<std::pair<std::string, double>> best;
    for (auto* s : speeches) {
        const auto tokens = tokenize(normalize_text(s->text));
        if (tokens.empty()) continue;
        const std::size_t width = std::min(words.size(), tokens.size());
        for (std::size_t start = 0; start + width <= tokens.size(); ++start) {
            const std::set<std::string> win(tokens.begin() + start, tokens.begin() + start + width);
            std::size_t inter = 0;
            for (const auto& w : win) inter += want.count(w);
            const double j = static_cast<double>(inter) / static_cast<double>(win.size() + want.size() - inter);
            if (!best || j > best->second) best = std::pair{s->id, j};
        }
    }
    if (best && best->second >= threshold) return best;
    return std::nullopt;
}

Corpus small_corpus() {
    return Corpus("c", {make_speech("s1", "a", "u", "The people deserve better than this corrupt elite. We will win."),
                        make_speech("s2", "b", "u", "Roads and bridges were repaired across the state this year."),
                        make_speech("s3", "c", "u", "Together we can work across the aisle for every family.")});
}

TEST(Match, VerbatimSentenceFindsSource) {
    const auto corpus = small_corpus();
    const TrainingSentence s{"Roads and bridges were repaired", Category::neutral, std::nullopt};
    EXPECT_EQ(match_sentence(s, corpus, 0.8), "s2");
}

TEST(Match, OneEditedWordStillMatches) {
    const auto corpus = small_corpus();
    const std::string edited = "Together we can work across the aisle for each family";
    const auto oracle = oracle_match(edited, corpus, 0.8);
    ASSERT_TRUE(oracle.has_value());
    EXPECT_GE(oracle->second, 0.8);
    const TrainingSentence s{edited, Category::pluralist, std::nullopt};
    EXPECT_EQ(match_sentence(s, corpus, 0.8), "s3");
}

TEST(Match, UnrelatedSentenceDoesNotMatch) {
    const auto corpus = small_corpus();
    const TrainingSentence s{"Taxes on imported cheese rose sharply", Category::neutral, std::nullopt};
    EXPECT_FALSE(match_sentence(s, corpus, 0.8).has_value());
    EXPECT_THROW(match_sentence(s, corpus, 1.5), Error);
}

TEST(Match, AgreesWithOracleOnRandomCorpora) {
    std::mt19937 rng(17);
    const std::vector<std::string> vocab = {"alpha", "beta", "gamma", "delta", "eps", "zeta", "eta", "theta",
                                            "iota",  "kappa", "lambda", "mu"};
    for (int trial = 0; trial < 60; ++trial) {
        std::vector<Speech> speeches;
        for (int k = 0; k < 4; ++k) {
            std::string text;
            for (int t = 0; t < 25; ++t) text += vocab[rng() % vocab.size()] + (rng() % 6 == 0 ? ". " : " ");
            speeches.push_back(make_speech("sp" + std::to_string(k), "x", "u", text));
        }
        const Corpus corpus("r", speeches);
        const SpeechMatcher matcher(corpus);
        for (int q = 0; q < 10; ++q) {
            std::string sentence;
            const int n = 2 + static_cast<int>(rng() % 6);
            for (int t = 0; t < n; ++t) sentence += vocab[rng() % vocab.size()] + " ";
            for (double threshold : {0.0, 0.5, 0.8}) {
                const auto want = oracle_match(sentence, corpus, threshold);
                const auto got = matcher.match(sentence, threshold);
                ASSERT_EQ(want.has_value(), got.has_value()) << sentence;
                if (want) {
                    EXPECT_EQ(got->speech_id, want->first) << sentence;
                    EXPECT_DOUBLE_EQ(got->similarity, want->second);
                }
            }
        }
    }
}

TEST(MatchIndex, PrelinksBypassMatching) {
    const auto corpus = small_corpus();
    const std::vector<TrainingSentence> training = {
        {"Entirely unrelated words here", Category::populist, "s1"},
        {"More unrelated words", Category::neutral, "s2"},
    };
    const auto index = build_match_index(training, corpus, 0.8);
    EXPECT_EQ(index.speech_of(training[0]), "s1");
    EXPECT_EQ(index.speech_of(training[1]), "s2");
    EXPECT_EQ(index.stats(Category::populist).rate(), 1.0);
    EXPECT_EQ(index.stats(Category::neutral).rate(), 1.0);
    EXPECT_TRUE(index.find(key_of(training[0]))->prelinked);
}

TEST(MatchIndex, LinkToMissingSpeechIgnored) {
    const auto corpus = small_corpus();
    const std::vector<TrainingSentence> training = {{"Nothing like the corpus", Category::populist, "lost-42"}};
    const auto index = build_match_index(training, corpus, 0.8);
    EXPECT_FALSE(index.speech_of(training[0]).has_value());
    EXPECT_EQ(index.matched_count(), 0u);
}

TEST(MatchIndex, NeutralRateCountsContainments) {
    // 8 verbatim extracts and 2 fresh sentences.
    std::vector<Speech> speeches;
    std::vector<TrainingSentence> training;
    for (int i = 0; i < 8; ++i) {
        const std::string sentence = "neutral extract number w" + std::to_string(i) + " about roads";
        speeches.push_back(make_speech("s" + std::to_string(i), "x", "u", "Intro text. " + sentence + ". Outro."));
        training.push_back({sentence, Category::neutral, std::nullopt});
    }
    training.push_back({"fresh sentence qq1 never spoken", Category::neutral, std::nullopt});
    training.push_back({"fresh sentence qq2 never uttered", Category::neutral, std::nullopt});
    const Corpus corpus("c", speeches);

    std::size_t oracle_hits = 0;
    for (const auto& t : training) oracle_hits += oracle_match(t.text, corpus, 0.8).has_value();
    const auto index = build_match_index(training, corpus, 0.8);
    EXPECT_EQ(index.stats(Category::neutral).matched, oracle_hits);
    EXPECT_DOUBLE_EQ(index.stats(Category::neutral).rate(), 0.8);
}

TEST(MatchIndex, WorkerCountDoesNotChangeResult) {
    const auto corpus = small_corpus();
    std::vector<TrainingSentence> training;
    for (const auto& s : corpus.speeches()) {
        for (const auto& sentence : split_sentences(s.text)) training.push_back({sentence, Category::neutral, {}});
    }
    training.push_back({"unmatched filler words", Category::populist, {}});
    const auto a = build_match_index(training, corpus, 0.8, 1);
    const auto b = build_match_index(training, corpus, 0.8, 3);
    EXPECT_EQ(a.fingerprint(), b.fingerprint());
}

TEST(MatchIndex, CsvRoundTrip) {
    TempDir dir("index");
    const auto corpus = small_corpus();
    const std::vector<TrainingSentence> training = {
        {"The people deserve better", Category::populist, {}},
        {"nothing in common here at all", Category::neutral, {}},
        {"Together we can work", Category::pluralist, "s3"},
    };
    const auto index = build_match_index(training, corpus, 0.8);
    index.write_csv(dir / "m.csv");
    const auto back = MatchIndex::read_csv(dir / "m.csv");
    EXPECT_EQ(back.fingerprint(), index.fingerprint());
    EXPECT_EQ(back.speech_of(training[0]), "s1");
    EXPECT_FALSE(back.speech_of(training[1]).has_value());
    EXPECT_EQ(back.matched_count(), 2u);
}

TEST(MatchIndex, DuplicateSentencesShareOneEntry) {
    const auto corpus = small_corpus();
    const std::vector<TrainingSentence> training = {{"We will win", Category::populist, {}},
                                                    {"We will win", Category::populist, {}}};
    const auto index = build_match_index(training, corpus, 0.8);
    EXPECT_EQ(index.entries().size(), 1u);
    EXPECT_EQ(index.stats(Category::populist).total, 2u);
    EXPECT_EQ(index.stats(Category::populist).matched, 2u);
}

}  // namespace
}  // namespace popfrac
