#include "popfrac/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "popfrac/csv.hpp"
#include "popfrac/error.hpp"

namespace popfrac {

namespace {

bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_terminator(char c) { return c == '.' || c == '!' || c == '?'; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::ifstream open_input(const std::filesystem::path& path, std::string_view what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::not_found, std::string(what) + " not found: '" + path.string() + "'");
    return in;
}

std::optional<std::string> optional_field(const nlohmann::json& record, const char* key) {
    auto it = record.find(key);
    if (it == record.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) fail(ErrorKind::data, std::string("field '") + key + "' must be a string");
    std::string value = it->get<std::string>();
    if (value.empty()) return std::nullopt;
    return value;
}

std::string required_string(const nlohmann::json& record, const char* key) {
    auto it = record.find(key);
    if (it == record.end() || it->is_null()) {
        fail(ErrorKind::data, std::string("missing field '") + key + "'");
    }
    if (!it->is_string()) fail(ErrorKind::data, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

double parse_double_strict(std::string_view raw, const char* what) {
    const std::string text(trim(raw));
    std::size_t used = 0;
    double value = 0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (text.empty() || used != text.size()) {
        fail(ErrorKind::data, std::string("field '") + what + "' is not a number");
    }
    return value;
}

}  // namespace

std::string_view to_string(SpeechType type) {
    switch (type) {
        case SpeechType::campaign: return "campaign";
        case SpeechType::state_of_state: return "state_of_state";
        case SpeechType::ceremonial: return "ceremonial";
        case SpeechType::famous: return "famous";
    }
    return "campaign";
}

std::string_view to_string(Category category) {
    switch (category) {
        case Category::populist: return "populist";
        case Category::pluralist: return "pluralist";
        case Category::neutral: return "neutral";
    }
    return "neutral";
}

std::string_view to_string(BinaryLabel label) {
    return label == BinaryLabel::populist ? "populist" : "non_populist";
}

SpeechType parse_speech_type(std::string_view text) {
    if (text == "campaign") return SpeechType::campaign;
    if (text == "state_of_state") return SpeechType::state_of_state;
    if (text == "ceremonial") return SpeechType::ceremonial;
    if (text == "famous") return SpeechType::famous;
    fail(ErrorKind::data, "unknown speech_type '" + std::string(text) + "'");
}

Category parse_category(std::string_view text) {
    if (text == "populist") return Category::populist;
    if (text == "pluralist") return Category::pluralist;
    if (text == "neutral") return Category::neutral;
    fail(ErrorKind::data, "unknown category '" + std::string(text) + "'");
}

CorpusFormat parse_corpus_format(std::string_view text) {
    if (text == "jsonl") return CorpusFormat::jsonl;
    if (text == "csv") return CorpusFormat::csv;
    fail(ErrorKind::invalid_argument, "unknown corpus format '" + std::string(text) + "'");
}

Grade Grade::from_double(double value) {
    if (!std::isfinite(value) || value < 0.0 || value > 2.0) {
        fail(ErrorKind::data, "score out of range");
    }
    const double scaled = value * 10.0;
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > 1e-6) {
        fail(ErrorKind::data, "score has more than one decimal place");
    }
    return Grade(static_cast<int>(rounded));
}

Grade Grade::from_tenths(int tenths) {
    if (tenths < 0 || tenths > 20) fail(ErrorKind::data, "score out of range");
    return Grade(tenths);
}

Corpus::Corpus(std::string name, std::vector<Speech> speeches)
    : name_(std::move(name)), speeches_(std::move(speeches)) {
    for (std::size_t i = 0; i < speeches_.size(); ++i) {
        const Speech& s = speeches_[i];
        if (!by_id_.emplace(s.id, i).second) {
            fail(ErrorKind::data, "duplicate speech id '" + s.id + "'");
        }
        units_[s.unit_id].push_back(s.id);
    }
}

const Speech* Corpus::find(std::string_view id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &speeches_[it->second];
}

const Speech& Corpus::at(std::string_view id) const {
    const Speech* s = find(id);
    if (!s) fail(ErrorKind::not_found, "unknown speech id '" + std::string(id) + "'");
    return *s;
}

Speech speech_from_json(const nlohmann::json& record) {
    if (!record.is_object()) fail(ErrorKind::data, "record is not a JSON object");
    Speech s;
    s.id = required_string(record, "id");
    if (s.id.empty()) fail(ErrorKind::data, "empty id");
    s.speaker_id = required_string(record, "speaker_id");
    s.unit_id = required_string(record, "unit_id");
    s.state = optional_field(record, "state");
    s.speech_type = parse_speech_type(required_string(record, "speech_type"));
    s.period = optional_field(record, "period");
    s.text = required_string(record, "text");
    if (trim(s.text).empty()) fail(ErrorKind::data, "empty text");
    auto score = record.find("human_score");
    if (score == record.end() || score->is_null()) fail(ErrorKind::data, "missing field 'human_score'");
    if (!score->is_number()) fail(ErrorKind::data, "field 'human_score' is not a number");
    s.human_score = Grade::from_double(score->get<double>());
    return s;
}

nlohmann::json to_json(const Speech& speech) {
    return nlohmann::json{
        {"id", speech.id},
        {"speaker_id", speech.speaker_id},
        {"unit_id", speech.unit_id},
        {"state", speech.state ? nlohmann::json(*speech.state) : nlohmann::json(nullptr)},
        {"speech_type", to_string(speech.speech_type)},
        {"period", speech.period ? nlohmann::json(*speech.period) : nlohmann::json(nullptr)},
        {"text", speech.text},
        {"human_score", speech.human_score.value()},
    };
}

namespace {

// Records are parsed independently; a duplicate id is detected here rather
// than in the Corpus constructor so the error can name the record.
struct Collector {
    LoadReport report;
    std::vector<Speech> speeches;
    std::map<std::string, std::size_t, std::less<>> seen;

    void accept(std::size_t record, Speech s) {
        auto [it, inserted] = seen.emplace(s.id, record);
        if (!inserted) {
            fail(ErrorKind::data, "duplicate speech id '" + s.id + "' at record " +
                                      std::to_string(record) + " (first seen at record " +
                                      std::to_string(it->second) + ")");
        }
        speeches.push_back(std::move(s));
    }

    void reject(std::size_t record, std::string id, std::string reason) {
        report.rejected.push_back({record, std::move(id), std::move(reason)});
    }
};

std::string id_hint(const nlohmann::json& record) {
    if (record.is_object()) {
        auto it = record.find("id");
        if (it != record.end() && it->is_string()) return it->get<std::string>();
    }
    return {};
}

void ingest_jsonl(std::istream& in, Collector& c) {
    std::string line;
    std::size_t record = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        ++record;
        ++c.report.records_read;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            c.reject(record, {}, "malformed JSON");
            continue;
        }
        Speech s;
        try {
            s = speech_from_json(j);
        } catch (const Error& e) {
            c.reject(record, id_hint(j), e.what());
            continue;
        }
        c.accept(record, std::move(s));
    }
}

void ingest_csv(std::istream& in, Collector& c) {
    csv::Row header;
    if (!csv::read_row(in, header)) return;
    std::map<std::string, std::size_t> column;
    for (std::size_t i = 0; i < header.size(); ++i) column[std::string(trim(header[i]))] = i;

    csv::Row row;
    std::size_t record = 0;
    while (csv::read_row(in, row)) {
        if (row.size() == 1 && row[0].empty()) continue;
        ++record;
        ++c.report.records_read;
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [name, idx] : column) {
            if (idx < row.size()) j[name] = row[idx];
        }
        try {
            if (row.size() != header.size()) {
                fail(ErrorKind::data, "expected " + std::to_string(header.size()) + " columns, got " +
                                          std::to_string(row.size()));
            }
            if (j.contains("human_score")) {
                const std::string raw = j["human_score"].get<std::string>();
                j["human_score"] = raw.empty() ? nlohmann::json(nullptr)
                                               : nlohmann::json(parse_double_strict(raw, "human_score"));
            }
            c.accept(record, speech_from_json(j));
        } catch (const Error& e) {
            if (std::string_view(e.what()).starts_with("duplicate speech id")) throw;
            c.reject(record, id_hint(j), e.what());
        }
    }
}

}  // namespace

LoadResult ingest_corpus(const std::filesystem::path& path, CorpusFormat format, std::string name) {
    std::ifstream in = open_input(path, "corpus");
    Collector c;
    if (format == CorpusFormat::jsonl) {
        ingest_jsonl(in, c);
    } else {
        ingest_csv(in, c);
    }
    if (name.empty()) name = path.stem().string();
    return {Corpus(std::move(name), std::move(c.speeches)), std::move(c.report)};
}

void write_corpus_jsonl(const Corpus& corpus, std::ostream& out) {
    for (const Speech& s : corpus.speeches()) out << to_json(s).dump() << '\n';
}

void write_corpus_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
    write_corpus_jsonl(corpus, out);
}

std::size_t ValidationReport::dropped_speeches() const {
    std::size_t n = 0;
    for (const auto& u : dropped_units) n += u.n_speeches;
    return n;
}

std::pair<Corpus, ValidationReport> validate_corpus(const Corpus& corpus) {
    ValidationReport report;
    std::map<std::string, bool, std::less<>> keep;
    for (const auto& [unit, ids] : corpus.units()) {
        const bool ok = ids.size() >= kMinSpeechesPerUnit;
        keep[unit] = ok;
        if (!ok) report.dropped_units.push_back({unit, ids.size()});
    }
    std::vector<Speech> kept;
    for (const Speech& s : corpus.speeches()) {
        if (keep.at(s.unit_id)) kept.push_back(s);
    }
    if (kept.empty()) {
        fail(ErrorKind::data, "empty corpus: no unit of '" + corpus.name() + "' has at least " +
                                  std::to_string(kMinSpeechesPerUnit) + " speeches");
    }
    return {Corpus(corpus.name(), std::move(kept)), std::move(report)};
}

nlohmann::json to_json(const ValidationReport& report) {
    nlohmann::json dropped = nlohmann::json::array();
    for (const auto& u : report.dropped_units) {
        dropped.push_back({{"unit_id", u.unit_id}, {"n_speeches", u.n_speeches}});
    }
    nlohmann::json rejected = nlohmann::json::array();
    for (const auto& r : report.rejected_records) {
        rejected.push_back({{"record", r.record}, {"id", r.id}, {"reason", r.reason}});
    }
    return {{"dropped_units", dropped}, {"rejected_records", rejected}};
}

std::vector<TrainingSentence> load_training_sentences(const std::filesystem::path& path) {
    std::ifstream in = open_input(path, "training sentences");
    const auto rows = csv::read_all(in);
    if (rows.empty()) fail(ErrorKind::data, "'" + path.string() + "' has no header");

    const csv::Row& header = rows.front();
    std::optional<std::size_t> text_col, cat_col, src_col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = trim(header[i]);
        if (name == "text") text_col = i;
        if (name == "category") cat_col = i;
        if (name == "source_speech_id") src_col = i;
    }
    if (!text_col || !cat_col) {
        fail(ErrorKind::data, "'" + path.string() + "' must have columns text,category");
    }

    std::vector<TrainingSentence> out;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const csv::Row& row = rows[r];
        const auto where = "'" + path.string() + "' row " + std::to_string(r + 1) + ": ";
        if (*text_col >= row.size() || *cat_col >= row.size()) {
            fail(ErrorKind::data, where + "too few columns");
        }
        TrainingSentence s;
        s.text = row[*text_col];
        if (trim(s.text).empty()) fail(ErrorKind::data, where + "empty text");
        try {
            s.category = parse_category(trim(row[*cat_col]));
        } catch (const Error& e) {
            fail(ErrorKind::data, where + e.what());
        }
        if (src_col && *src_col < row.size() && !row[*src_col].empty()) {
            s.source_speech_id = row[*src_col];
        }
        out.push_back(std::move(s));
    }
    return out;
}

void write_training_sentences(std::span<const TrainingSentence> sentences,
                              const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
    csv::write_row(out, {"text", "category", "source_speech_id"});
    for (const auto& s : sentences) {
        csv::write_row(out, {s.text, std::string(to_string(s.category)),
                             s.source_speech_id.value_or("")});
    }
}

std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> sentences;
    std::size_t start = 0;
    std::size_t i = 0;
    auto emit = [&](std::size_t end) {
        const auto piece = trim(text.substr(start, end - start));
        if (!piece.empty()) sentences.emplace_back(piece);
        start = end;
    };
    while (i < text.size()) {
        if (is_terminator(text[i])) {
            while (i < text.size() && is_terminator(text[i])) ++i;
            emit(i);
        } else {
            ++i;
        }
    }
    emit(text.size());
    return sentences;
}

std::vector<std::string> classifiable_sentences(std::string_view text) {
    auto sentences = split_sentences(text);
    std::erase_if(sentences, [](const std::string& s) { return s.size() < kMinSentenceLength; });
    return sentences;
}

BinaryLabel binarize_score(double score) {
    if (!(score >= 0.0 && score <= 2.0)) {
        fail(ErrorKind::invalid_argument, "score " + std::to_string(score) + " outside [0, 2]");
    }
    return score >= kGradeCutoff ? BinaryLabel::populist : BinaryLabel::non_populist;
}

BinaryLabel binarize_score(Grade grade) {
    return grade.tenths() >= 5 ? BinaryLabel::populist : BinaryLabel::non_populist;
}

}  // namespace popfrac
