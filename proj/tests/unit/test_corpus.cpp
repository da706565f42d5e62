#include <gtest/gtest.h>

#include <fstream>

#include "popfrac/corpus.hpp"
#include "popfrac/error.hpp"
#include "test_util.hpp"

namespace popfrac {
namespace {

using testing::make_speech;
using testing::TempDir;

void write_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream(p, std::ios::binary) << content;
}

std::string record(const std::string& id, const std::string& unit, double score, const std::string& text = "Hi.") {
    nlohmann::json j = {{"id", id},         {"speaker_id", "spk-" + unit}, {"unit_id", unit},
                        {"speech_type", "campaign"}, {"text", text},        {"human_score", score}};
    return j.dump() + "\n";
}

TEST(Grade, StoresTenths) {
    EXPECT_EQ(Grade::from_double(0.5).tenths(), 5);
    EXPECT_EQ(Grade::from_double(2.0).tenths(), 20);
    EXPECT_EQ(Grade::from_double(1.3).value(), 1.3);
    EXPECT_THROW(Grade::from_double(2.3), Error);
    EXPECT_THROW(Grade::from_double(-0.1), Error);
    EXPECT_THROW(Grade::from_double(0.25), Error);
}

TEST(Ingest, LoadsWellFormedJsonl) {
    TempDir dir("ingest");
    write_file(dir / "c.jsonl", record("a", "u1", 0.0) + record("b", "u1", 0.5) + record("c", "u1", 1.0) +
                                    record("d", "u1", 2.0));
    const auto loaded = ingest_corpus(dir / "c.jsonl", CorpusFormat::jsonl, "gov");
    EXPECT_EQ(loaded.corpus.size(), 4u);
    EXPECT_EQ(loaded.corpus.units().size(), 1u);
    EXPECT_EQ(loaded.corpus.name(), "gov");
    EXPECT_TRUE(loaded.report.rejected.empty());
    EXPECT_EQ(loaded.corpus.at("b").human_score.tenths(), 5);
}

TEST(Ingest, RejectsOutOfRangeScore) {
    TempDir dir("ingest");
    write_file(dir / "c.jsonl", record("a", "u1", 0.0) + record("b", "u1", 2.3) + "not json\n");
    const auto loaded = ingest_corpus(dir / "c.jsonl", CorpusFormat::jsonl);
    EXPECT_EQ(loaded.corpus.size(), 1u);
    ASSERT_EQ(loaded.report.rejected.size(), 2u);
    EXPECT_EQ(loaded.report.rejected[0].id, "b");
    EXPECT_NE(loaded.report.rejected[0].reason.find("score out of range"), std::string::npos);
    EXPECT_EQ(loaded.report.rejected[1].record, 3u);
}

TEST(Ingest, DuplicateIdIsFatal) {
    TempDir dir("ingest");
    write_file(dir / "c.jsonl", record("a", "u1", 0.0) + record("a", "u1", 1.0));
    EXPECT_THROW(ingest_corpus(dir / "c.jsonl", CorpusFormat::jsonl), Error);
}

TEST(Ingest, MissingFileIsNotFound) {
    try {
        ingest_corpus("/nonexistent/popfrac.jsonl", CorpusFormat::jsonl);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::not_found);
        EXPECT_NE(std::string(e.what()).find("corpus not found"), std::string::npos) << e.what();
    }
}

TEST(Ingest, CsvWithQuotedText) {
    TempDir dir("ingest");
    write_file(dir / "c.csv",
               "id,speaker_id,unit_id,state,speech_type,period,text,human_score\n"
               "a,s1,u1,CA,campaign,2018,\"We, the people. Win!\",1.5\n"
               "b,s1,u1,,state_of_state,,Plain text.,0\n"
               "c,s1,u1,,campaign,,Bad score.,abc\n");
    const auto loaded = ingest_corpus(dir / "c.csv", CorpusFormat::csv);
    ASSERT_EQ(loaded.corpus.size(), 2u);
    EXPECT_EQ(loaded.corpus.at("a").text, "We, the people. Win!");
    EXPECT_EQ(*loaded.corpus.at("a").state, "CA");
    EXPECT_FALSE(loaded.corpus.at("b").state.has_value());
    EXPECT_EQ(loaded.corpus.at("b").speech_type, SpeechType::state_of_state);
    EXPECT_EQ(loaded.report.rejected.size(), 1u);
}

TEST(Ingest, JsonlRoundTrip) {
    TempDir dir("ingest");
    Corpus c("x", {make_speech("a", "s", "u", "One. Two?", 7), make_speech("b", "s", "u", "Three!", 20)});
    write_corpus_jsonl(c, dir / "c.jsonl");
    const auto back = ingest_corpus(dir / "c.jsonl", CorpusFormat::jsonl, "x").corpus;
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back.at("a").text, "One. Two?");
    EXPECT_EQ(back.at("b").human_score, Grade::from_tenths(20));
}

TEST(Validate, DropsSmallUnits) {
    Corpus c("x", {make_speech("a", "s1", "u1", "t."), make_speech("b", "s1", "u1", "t."),
                   make_speech("c", "s2", "u2", "t."), make_speech("d", "s2", "u2", "t."),
                   make_speech("e", "s2", "u2", "t.")});
    const auto [valid, report] = validate_corpus(c);
    EXPECT_EQ(valid.size(), 3u);
    ASSERT_EQ(report.dropped_units.size(), 1u);
    EXPECT_EQ(report.dropped_units[0].unit_id, "u1");
    EXPECT_EQ(report.dropped_speeches(), 2u);
    EXPECT_EQ(to_json(report).at("dropped_units").size(), 1u);
}

TEST(Validate, IdentityWhenAllUnitsLargeEnough) {
    Corpus c("x", {make_speech("a", "s", "u", "t."), make_speech("b", "s", "u", "t."),
                   make_speech("c", "s", "u", "t.")});
    const auto [valid, report] = validate_corpus(c);
    EXPECT_EQ(valid.size(), 3u);
    EXPECT_TRUE(report.dropped_units.empty());
}

TEST(Validate, EmptyResultIsFatal) {
    Corpus c("x", {make_speech("a", "s", "u", "t.")});
    try {
        validate_corpus(c);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("empty corpus"), std::string::npos);
    }
}

TEST(Split, TwoTerminators) {
    EXPECT_EQ(split_sentences("We will win. They lost!"),
              (std::vector<std::string>{"We will win.", "They lost!"}));
}

TEST(Split, EmptyInput) {
    EXPECT_TRUE(split_sentences("").empty());
    EXPECT_TRUE(split_sentences("  \n\t ").empty());
}

TEST(Split, UnterminatedSentenceKeptWhole) {
    EXPECT_EQ(split_sentences("Are we safe"), (std::vector<std::string>{"Are we safe"}));
}

TEST(Split, TerminatorRunsStayTogether) {
    EXPECT_EQ(split_sentences("Wait... Really?! Yes"),
              (std::vector<std::string>{"Wait...", "Really?!", "Yes"}));
    EXPECT_EQ(split_sentences("..."), (std::vector<std::string>{"..."}));
}

TEST(Split, ClassifiableDropsTinyFragments) {
    EXPECT_EQ(split_sentences("Yes. . No"), (std::vector<std::string>{"Yes.", ".", "No"}));
    EXPECT_EQ(classifiable_sentences("Yes. . No"), (std::vector<std::string>{"Yes.", "No"}));
}

TEST(Binarize, CutoffIsInclusive) {
    EXPECT_EQ(binarize_score(0.0), BinaryLabel::non_populist);
    EXPECT_EQ(binarize_score(0.4), BinaryLabel::non_populist);
    EXPECT_EQ(binarize_score(0.5), BinaryLabel::populist);
    EXPECT_EQ(binarize_score(2.0), BinaryLabel::populist);
    EXPECT_EQ(binarize_score(Grade::from_tenths(5)), BinaryLabel::populist);
    EXPECT_THROW(binarize_score(2.1), Error);
}

TEST(TrainingSentences, CsvRoundTrip) {
    TempDir dir("training");
    const std::vector<TrainingSentence> in = {{"The elite, \"corrupt\".", Category::populist, "s1"},
                                              {"We work together.", Category::pluralist, std::nullopt},
                                              {"Roads are paved.", Category::neutral, std::nullopt}};
    write_training_sentences(in, dir / "t.csv");
    const auto out = load_training_sentences(dir / "t.csv");
    ASSERT_EQ(out.size(), 3u);
    EXPECT_EQ(out[0].text, in[0].text);
    EXPECT_EQ(out[0].source_speech_id, in[0].source_speech_id);
    EXPECT_EQ(out[1].category, Category::pluralist);
    EXPECT_FALSE(out[2].source_speech_id.has_value());
}

TEST(TrainingSentences, UnknownCategoryRejected) {
    TempDir dir("training");
    write_file(dir / "t.csv", "text,category\nHello.,angry\n");
    EXPECT_THROW(load_training_sentences(dir / "t.csv"), Error);
}

TEST(Corpus, UnitsGroupSpeechIdsInCorpusOrder) {
    Corpus c("x", {make_speech("b", "s", "u2", "t."), make_speech("a", "s", "u1", "t."),
                   make_speech("c", "s", "u2", "t.")});
    const auto& units = c.units();
    ASSERT_EQ(units.size(), 2u);
    EXPECT_EQ(units.at("u2"), (std::vector<std::string>{"b", "c"}));
    EXPECT_THROW(c.at("zz"), Error);
    EXPECT_THROW(Corpus("x", {make_speech("a", "s", "u", "t."), make_speech("a", "s", "u", "t.")}), Error);
}

}  // namespace
}  // namespace popfrac
