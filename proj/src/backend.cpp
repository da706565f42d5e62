#include "popfrac/backend.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>

#include "backend_impl.hpp"
#include "popfrac/error.hpp"
#include "popfrac/hash.hpp"
#include "popfrac/random.hpp"

namespace popfrac {

std::string_view to_string(BackendKind kind) {
    return kind == BackendKind::embedding_finetune ? "embedding_finetune" : "lexical_baseline";
}

BackendKind parse_backend_kind(std::string_view text) {
    if (text == "embedding_finetune") return BackendKind::embedding_finetune;
    if (text == "lexical_baseline") return BackendKind::lexical_baseline;
    fail(ErrorKind::invalid_argument, "unknown backend '" + std::string(text) + "'");
}

std::string describe(const VariantFlags& flags) {
    std::string out;
    auto add = [&](bool on, std::string_view name) {
        if (!on) return;
        if (!out.empty()) out += '+';
        out += name;
    };
    add(flags.differential_head, "differential_head");
    add(flags.end_to_end, "end_to_end");
    add(flags.alternate_embedding_model, "alternate_embedding_model");
    return out.empty() ? "baseline" : out;
}

void BackendConfig::validate() const {
    require(epochs >= 1, "epochs must be >= 1");
    require(batch_size >= 1, "batch_size must be >= 1");
    require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must lie in (0, 1)");
    require(lexical_smoothing > 0.0, "lexical_smoothing must be positive");
    if (kind == BackendKind::lexical_baseline && variants != VariantFlags{}) {
        fail(ErrorKind::invalid_argument,
             "variant flags (" + describe(variants) + ") are not supported by lexical_baseline");
    }
    const EmbeddingParams& e = embedding;
    require(e.pair_iterations >= 1, "pair_iterations must be >= 1");
    require(e.head_epochs >= 1, "head_epochs must be >= 1");
    require(e.logistic_iterations >= 1, "logistic_iterations must be >= 1");
    require(e.body_learning_rate > 0 && e.head_learning_rate > 0, "learning rates must be positive");
    require(e.l2 >= 0, "l2 must be non-negative");
}

nlohmann::json to_json(const BackendConfig& c) {
    return {
        {"backend", to_string(c.kind)},
        {"epochs", c.epochs},
        {"batch_size", c.batch_size},
        {"train_fraction", c.train_fraction},
        {"seed", c.seed},
        {"differential_head", c.variants.differential_head},
        {"end_to_end", c.variants.end_to_end},
        {"alternate_embedding_model", c.variants.alternate_embedding_model},
        {"pair_iterations", c.embedding.pair_iterations},
        {"body_learning_rate", c.embedding.body_learning_rate},
        {"head_epochs", c.embedding.head_epochs},
        {"head_learning_rate", c.embedding.head_learning_rate},
        {"logistic_iterations", c.embedding.logistic_iterations},
        {"l2", c.embedding.l2},
        {"lexical_smoothing", c.lexical_smoothing},
    };
}

BackendConfig backend_config_from_json(const nlohmann::json& j, BackendConfig c) {
    if (!j.is_object()) fail(ErrorKind::invalid_argument, "backend config must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "backend") c.kind = parse_backend_kind(value.get<std::string>());
            else if (key == "epochs") c.epochs = value.get<int>();
            else if (key == "batch_size") c.batch_size = value.get<int>();
            else if (key == "train_fraction") c.train_fraction = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "differential_head") c.variants.differential_head = value.get<bool>();
            else if (key == "end_to_end") c.variants.end_to_end = value.get<bool>();
            else if (key == "alternate_embedding_model") c.variants.alternate_embedding_model = value.get<bool>();
            else if (key == "pair_iterations") c.embedding.pair_iterations = value.get<int>();
            else if (key == "body_learning_rate") c.embedding.body_learning_rate = value.get<double>();
            else if (key == "head_epochs") c.embedding.head_epochs = value.get<int>();
            else if (key == "head_learning_rate") c.embedding.head_learning_rate = value.get<double>();
            else if (key == "logistic_iterations") c.embedding.logistic_iterations = value.get<int>();
            else if (key == "l2") c.embedding.l2 = value.get<double>();
            else if (key == "lexical_smoothing") c.lexical_smoothing = value.get<double>();
            else fail(ErrorKind::invalid_argument, "unknown backend config key '" + key + "'");
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::invalid_argument, std::string("backend config: ") + e.what());
    }
    return c;
}

Category SentenceClassifier::predict(std::string_view sentence) const {
    const auto s = scores(sentence);
    std::size_t best = 0;
    for (std::size_t k = 1; k < kNumCategories; ++k) {
        if (s[k] > s[best]) best = k;
    }
    return static_cast<Category>(best);
}

nlohmann::json to_json(const ModelProvenance& p) {
    return {
        {"config", to_json(p.config)},
        {"seed", p.seed},
        {"training_fingerprint", to_hex(p.training_fingerprint)},
        {"n_training", p.n_training},
        {"n_excluded", p.n_excluded},
    };
}

TrainedModel::TrainedModel(std::shared_ptr<const SentenceClassifier> classifier,
                           ModelProvenance provenance)
    : classifier_(std::move(classifier)), provenance_(std::move(provenance)) {}

Category TrainedModel::predict(std::string_view sentence) const {
    if (sentence.empty()) fail(ErrorKind::invalid_argument, "cannot classify an empty sentence");
    return classifier_->predict(sentence);
}

std::vector<Category> TrainedModel::predict(std::span<const std::string> sentences) const {
    std::vector<Category> out;
    out.reserve(sentences.size());
    for (const auto& s : sentences) out.push_back(predict(s));
    return out;
}

std::array<double, kNumCategories> TrainedModel::scores(std::string_view sentence) const {
    if (sentence.empty()) fail(ErrorKind::invalid_argument, "cannot classify an empty sentence");
    return classifier_->scores(sentence);
}

void TrainedModel::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest = to_json(provenance_);
    manifest["format_version"] = 1;
    manifest["backend"] = to_string(provenance_.config.kind);
    manifest["labels"] = {"populist", "pluralist", "neutral"};
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + (dir / "manifest.json").string() + "'");
    out << manifest.dump(2) << '\n';
    classifier_->save_payload(dir);
}

TrainedModel TrainedModel::load(const std::filesystem::path& dir) {
    std::ifstream in(dir / "manifest.json", std::ios::binary);
    if (!in) fail(ErrorKind::not_found, "model manifest not found in '" + dir.string() + "'");
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        fail(ErrorKind::data, "invalid model manifest: " + std::string(e.what()));
    }
    if (manifest.value("format_version", 0) != 1) {
        fail(ErrorKind::data, "unsupported model format in '" + dir.string() + "'");
    }
    ModelProvenance p;
    p.config = backend_config_from_json(manifest.at("config"));
    p.seed = manifest.at("seed").get<std::uint64_t>();
    p.training_fingerprint = from_hex(manifest.at("training_fingerprint").get<std::string>());
    p.n_training = manifest.at("n_training").get<std::size_t>();
    p.n_excluded = manifest.at("n_excluded").get<std::size_t>();

    std::shared_ptr<const SentenceClassifier> classifier =
        p.config.kind == BackendKind::lexical_baseline ? detail::load_lexical(dir)
                                                       : detail::load_embedding(p.config, dir);
    return TrainedModel(std::move(classifier), std::move(p));
}

std::uint64_t training_fingerprint(std::span<const TrainingSentence> labeled) {
    std::vector<std::pair<int, std::string_view>> items;
    items.reserve(labeled.size());
    for (const auto& s : labeled) items.emplace_back(static_cast<int>(s.category), s.text);
    std::sort(items.begin(), items.end());
    Fnv1a h;
    for (const auto& [cat, text] : items) h.field(to_string(static_cast<Category>(cat))).field(text);
    return h.digest();
}

void check_trainable(std::span<const TrainingSentence> labeled) {
    std::array<std::size_t, kNumCategories> counts{};
    for (const auto& s : labeled) {
        if (s.text.empty()) fail(ErrorKind::invalid_argument, "training sentence with empty text");
        ++counts[index_of(s.category)];
    }
    for (Category c : kAllCategories) {
        const std::size_t n = counts[index_of(c)];
        if (n == 0) {
            fail(ErrorKind::invalid_argument, "class absent: no '" + std::string(to_string(c)) +
                                                  "' training sentences");
        }
        if (n < 2) {
            fail(ErrorKind::invalid_argument, "class '" + std::string(to_string(c)) +
                                                  "' has fewer than 2 training sentences");
        }
    }
}

namespace {

class ConfiguredBackend final : public Backend {
public:
    explicit ConfiguredBackend(BackendConfig config) : config_(std::move(config)) {
        config_.validate();
    }

    TrainedModel fit(std::span<const TrainingSentence> labeled, std::uint64_t seed) const override {
        check_trainable(labeled);
        auto classifier = config_.kind == BackendKind::lexical_baseline
                              ? detail::fit_lexical(config_, labeled)
                              : detail::fit_embedding(config_, labeled, seed);
        ModelProvenance p;
        p.config = config_;
        p.seed = seed;
        p.training_fingerprint = training_fingerprint(labeled);
        p.n_training = labeled.size();
        return TrainedModel(std::move(classifier), std::move(p));
    }

    const BackendConfig& config() const override { return config_; }

private:
    BackendConfig config_;
};

}  // namespace

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    return std::make_unique<ConfiguredBackend>(config);
}

TrainedModel fit(const BackendConfig& config, std::span<const TrainingSentence> labeled,
                 std::uint64_t seed) {
    return make_backend(config)->fit(labeled, seed);
}

std::vector<Category> predict(const TrainedModel& model, std::span<const std::string> sentences) {
    return model.predict(sentences);
}

nlohmann::json to_json(const SentenceMetrics& m) {
    return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall},
            {"f1", m.f1}, {"mcc", m.mcc}};
}

SentenceMetrics sentence_metrics(std::span<const Category> truth, std::span<const Category> predicted) {
    require(truth.size() == predicted.size(), "truth and prediction lengths differ");
    require(!truth.empty(), "no predictions to score");

    constexpr std::size_t K = kNumCategories;
    std::array<std::array<double, K>, K> cm{};  // [truth][predicted]
    for (std::size_t i = 0; i < truth.size(); ++i) cm[index_of(truth[i])][index_of(predicted[i])] += 1;

    const double total = static_cast<double>(truth.size());
    std::array<double, K> t{}, p{};
    double correct = 0;
    for (std::size_t a = 0; a < K; ++a) {
        correct += cm[a][a];
        for (std::size_t b = 0; b < K; ++b) {
            t[a] += cm[a][b];
            p[b] += cm[a][b];
        }
    }

    SentenceMetrics m;
    m.accuracy = correct / total;
    for (std::size_t k = 0; k < K; ++k) {
        const double prec = p[k] > 0 ? cm[k][k] / p[k] : 0.0;
        const double rec = t[k] > 0 ? cm[k][k] / t[k] : 0.0;
        m.precision += prec / K;
        m.recall += rec / K;
        m.f1 += (prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0) / K;
    }

    double pt = 0, pp = 0, tt = 0;
    for (std::size_t k = 0; k < K; ++k) {
        pt += p[k] * t[k];
        pp += p[k] * p[k];
        tt += t[k] * t[k];
    }
    const double denom = std::sqrt((total * total - pp) * (total * total - tt));
    m.mcc = denom > 0 ? (correct * total - pt) / denom : 0.0;
    return m;
}

SplitIndices stratified_split(std::span<const TrainingSentence> labeled, double train_fraction,
                              std::uint64_t seed) {
    require(train_fraction > 0.0 && train_fraction < 1.0, "train_fraction must lie in (0, 1)");
    std::array<std::vector<std::size_t>, kNumCategories> by_class;
    for (std::size_t i = 0; i < labeled.size(); ++i) by_class[index_of(labeled[i].category)].push_back(i);

    SplitIndices split;
    for (Category c : kAllCategories) {
        auto& idx = by_class[index_of(c)];
        if (idx.size() < kMinPerClassForHoldout) {
            fail(ErrorKind::invalid_argument,
                 "class '" + std::string(to_string(c)) + "' too small to split (" +
                     std::to_string(idx.size()) + " < " + std::to_string(kMinPerClassForHoldout) + ")");
        }
        Rng rng = make_rng(mix_seed(seed, index_of(c)));
        shuffle(idx, rng);
        auto n_train = static_cast<std::size_t>(std::llround(train_fraction * idx.size()));
        n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        split.train.insert(split.train.end(), idx.begin(), idx.begin() + n_train);
        split.test.insert(split.test.end(), idx.begin() + n_train, idx.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

SentenceMetrics holdout_eval(const Backend& backend, std::span<const TrainingSentence> labeled,
                             std::uint64_t seed) {
    return holdout_eval(backend, labeled, seed, seed);
}

SentenceMetrics holdout_eval(const Backend& backend, std::span<const TrainingSentence> labeled,
                             std::uint64_t split_seed, std::uint64_t fit_seed) {
    const SplitIndices split = stratified_split(labeled, backend.config().train_fraction, split_seed);
    std::vector<TrainingSentence> train;
    for (std::size_t i : split.train) train.push_back(labeled[i]);
    const TrainedModel model = backend.fit(train, fit_seed);

    std::vector<Category> truth, predicted;
    for (std::size_t i : split.test) {
        truth.push_back(labeled[i].category);
        predicted.push_back(model.predict(labeled[i].text));
    }
    return sentence_metrics(truth, predicted);
}

SentenceMetrics holdout_eval(const BackendConfig& config, std::span<const TrainingSentence> labeled,
                             std::uint64_t seed) {
    return holdout_eval(*make_backend(config), labeled, seed);
}

}  // namespace popfrac
