#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "popfrac/corpus.hpp"

namespace popfrac {

enum class BackendKind { embedding_finetune, lexical_baseline };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

/// Model variants explored by the hyperparameter grid. Only the embedding
/// backend interprets them.
struct VariantFlags {
    bool differential_head = false;
    bool end_to_end = false;
    bool alternate_embedding_model = false;

    friend bool operator==(const VariantFlags&, const VariantFlags&) = default;
};

std::string describe(const VariantFlags& flags);

/// Knobs of the embedding backend that are not part of the public training
/// contract (epochs, batch size, split).
struct EmbeddingParams {
    int pair_iterations = 20;        // positive + negative pair per sentence per iteration
    double body_learning_rate = 0.05;
    int head_epochs = 20;            // differentiable head only
    double head_learning_rate = 0.5;
    int logistic_iterations = 300;   // full-batch gradient steps for the default head
    double l2 = 1e-3;

    friend bool operator==(const EmbeddingParams&, const EmbeddingParams&) = default;
};

struct BackendConfig {
    BackendKind kind = BackendKind::embedding_finetune;
    int epochs = 1;
    int batch_size = 6;
    double train_fraction = 0.75;
    std::uint64_t seed = 0;
    VariantFlags variants;
    EmbeddingParams embedding;
    double lexical_smoothing = 0.1;  // additive smoothing of the lexical baseline

    /// Throws Error(invalid_argument) for out-of-range values or variant
    /// flags on a backend that does not support them.
    void validate() const;

    friend bool operator==(const BackendConfig&, const BackendConfig&) = default;
};

nlohmann::json to_json(const BackendConfig& config);
/// Overlays keys present in `j` onto `base`. Unknown keys are rejected.
BackendConfig backend_config_from_json(const nlohmann::json& j, BackendConfig base = {});

/// Fitted 3-class sentence classifier.
class SentenceClassifier {
public:
    virtual ~SentenceClassifier() = default;

    /// Per-category scores, higher is more likely; indexed by Category.
    virtual std::array<double, kNumCategories> scores(std::string_view sentence) const = 0;
    /// Writes backend-specific payload files into an existing directory.
    virtual void save_payload(const std::filesystem::path& dir) const = 0;

    /// Argmax of scores; ties resolve to the lower category index.
    Category predict(std::string_view sentence) const;
};

struct ModelProvenance {
    BackendConfig config;
    std::uint64_t seed = 0;
    std::uint64_t training_fingerprint = 0;
    std::size_t n_training = 0;
    std::size_t n_excluded = 0;
};

nlohmann::json to_json(const ModelProvenance& provenance);

class TrainedModel {
public:
    TrainedModel(std::shared_ptr<const SentenceClassifier> classifier, ModelProvenance provenance);

    /// One label per sentence, in order. Throws Error(invalid_argument) for
    /// an empty sentence.
    std::vector<Category> predict(std::span<const std::string> sentences) const;
    Category predict(std::string_view sentence) const;
    std::array<double, kNumCategories> scores(std::string_view sentence) const;

    const ModelProvenance& provenance() const { return provenance_; }
    ModelProvenance& provenance() { return provenance_; }

    /// Directory layout: manifest.json plus backend payload files.
    void save(const std::filesystem::path& dir) const;
    static TrainedModel load(const std::filesystem::path& dir);

private:
    std::shared_ptr<const SentenceClassifier> classifier_;
    ModelProvenance provenance_;
};

/// Order-independent hash of a labeled set.
std::uint64_t training_fingerprint(std::span<const TrainingSentence> labeled);

/// Checks fit preconditions: all categories present with at least two
/// non-empty sentences each.
void check_trainable(std::span<const TrainingSentence> labeled);

class Backend {
public:
    virtual ~Backend() = default;
    virtual TrainedModel fit(std::span<const TrainingSentence> labeled, std::uint64_t seed) const = 0;
    virtual const BackendConfig& config() const = 0;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

TrainedModel fit(const BackendConfig& config, std::span<const TrainingSentence> labeled,
                 std::uint64_t seed);
std::vector<Category> predict(const TrainedModel& model, std::span<const std::string> sentences);

/// Sentence-level 3-class scores: accuracy, macro-averaged one-vs-rest
/// precision/recall/F1, and the multi-class Matthews correlation.
struct SentenceMetrics {
    double accuracy = 0;
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    double mcc = 0;
};

nlohmann::json to_json(const SentenceMetrics& m);

SentenceMetrics sentence_metrics(std::span<const Category> truth, std::span<const Category> predicted);

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

inline constexpr std::size_t kMinPerClassForHoldout = 4;

/// Per-category seeded shuffle; round(fraction * n) of each class go to
/// train, clamped so both sides keep at least one sentence.
SplitIndices stratified_split(std::span<const TrainingSentence> labeled, double train_fraction,
                              std::uint64_t seed);

SentenceMetrics holdout_eval(const Backend& backend, std::span<const TrainingSentence> labeled,
                             std::uint64_t seed);
/// Split and model randomness seeded separately; repeated runs that share
/// the split only differ through training.
SentenceMetrics holdout_eval(const Backend& backend, std::span<const TrainingSentence> labeled,
                             std::uint64_t split_seed, std::uint64_t fit_seed);
SentenceMetrics holdout_eval(const BackendConfig& config, std::span<const TrainingSentence> labeled,
                             std::uint64_t seed);

/// Environment variable naming the directory searched for base encoder
/// weights of the embedding backend.
inline constexpr const char* kModelCacheEnv = "POPFRAC_MODEL_CACHE";

}  // namespace popfrac
