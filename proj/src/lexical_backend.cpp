// Multinomial naive Bayes over normalized term frequencies. Fitting only
// accumulates integer counts, so the model does not depend on the order of
// the training sentences.

#include <cmath>
#include <fstream>
#include <map>

#include "backend_impl.hpp"
#include "popfrac/error.hpp"
#include "popfrac/leakage.hpp"

namespace popfrac::detail {

namespace {

using Counts = std::array<std::uint64_t, kNumCategories>;

class LexicalClassifier final : public SentenceClassifier {
public:
    LexicalClassifier(std::map<std::string, Counts, std::less<>> vocabulary, Counts documents,
                      double smoothing)
        : vocabulary_(std::move(vocabulary)), documents_(documents), smoothing_(smoothing) {
        Counts tokens{};
        for (const auto& [_, c] : vocabulary_) {
            for (std::size_t k = 0; k < kNumCategories; ++k) tokens[k] += c[k];
        }
        std::uint64_t total_docs = 0;
        for (auto d : documents_) total_docs += d;
        const double v = static_cast<double>(vocabulary_.size());
        for (std::size_t k = 0; k < kNumCategories; ++k) {
            log_prior_[k] = std::log(static_cast<double>(documents_[k]) / static_cast<double>(total_docs));
            log_denominator_[k] = std::log(static_cast<double>(tokens[k]) + smoothing_ * v);
        }
    }

    std::array<double, kNumCategories> scores(std::string_view sentence) const override {
        std::array<double, kNumCategories> s = log_prior_;
        for (const auto& tok : tokenize(normalize_text(sentence))) {
            auto it = vocabulary_.find(tok);
            if (it == vocabulary_.end()) continue;  // out-of-vocabulary terms carry no evidence
            for (std::size_t k = 0; k < kNumCategories; ++k) {
                s[k] += std::log(static_cast<double>(it->second[k]) + smoothing_) - log_denominator_[k];
            }
        }
        return s;
    }

    void save_payload(const std::filesystem::path& dir) const override {
        nlohmann::json vocab = nlohmann::json::object();
        for (const auto& [tok, c] : vocabulary_) vocab[tok] = c;
        nlohmann::json j = {{"smoothing", smoothing_}, {"documents", documents_}, {"vocabulary", vocab}};
        std::ofstream out(dir / "lexical.json", std::ios::binary);
        if (!out) fail(ErrorKind::io, "cannot write '" + (dir / "lexical.json").string() + "'");
        out << j.dump() << '\n';
    }

private:
    std::map<std::string, Counts, std::less<>> vocabulary_;
    Counts documents_;
    double smoothing_;
    std::array<double, kNumCategories> log_prior_{};
    std::array<double, kNumCategories> log_denominator_{};
};

}  // namespace

std::shared_ptr<const SentenceClassifier> fit_lexical(const BackendConfig& config,
                                                      std::span<const TrainingSentence> labeled) {
    std::map<std::string, Counts, std::less<>> vocabulary;
    Counts documents{};
    for (const TrainingSentence& s : labeled) {
        const std::size_t k = index_of(s.category);
        ++documents[k];
        for (auto& tok : tokenize(normalize_text(s.text))) ++vocabulary[std::move(tok)][k];
    }
    return std::make_shared<LexicalClassifier>(std::move(vocabulary), documents, config.lexical_smoothing);
}

std::shared_ptr<const SentenceClassifier> load_lexical(const std::filesystem::path& dir) {
    std::ifstream in(dir / "lexical.json", std::ios::binary);
    if (!in) fail(ErrorKind::not_found, "lexical model payload not found in '" + dir.string() + "'");
    try {
        const auto j = nlohmann::json::parse(in);
        std::map<std::string, Counts, std::less<>> vocabulary;
        for (const auto& [tok, c] : j.at("vocabulary").items()) vocabulary[tok] = c.get<Counts>();
        return std::make_shared<LexicalClassifier>(std::move(vocabulary), j.at("documents").get<Counts>(),
                                                   j.at("smoothing").get<double>());
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::data, "invalid lexical model payload: " + std::string(e.what()));
    }
}

}  // namespace popfrac::detail
