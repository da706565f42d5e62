// Contrastive sentence-embedding fine-tuning followed by a classification
// head.
//
// Body: a frozen-by-default hashed feature table (the base encoder), mean
// pooled, followed by a trainable affine map initialised to the identity.
// Fine-tuning draws one positive (same class) and one negative (other class)
// partner per sentence per iteration and minimises (cos(a, b) - label)^2 over
// shuffled mini-batches. The head sees L2-normalised embeddings and is either
// a full-batch multinomial logistic regression or, with differential_head, a
// softmax layer trained by mini-batch SGD. end_to_end additionally lets every
// phase update the rows of the feature table.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <unordered_map>

#include "backend_impl.hpp"
#include "popfrac/error.hpp"
#include "popfrac/hash.hpp"
#include "popfrac/leakage.hpp"
#include "popfrac/random.hpp"

namespace popfrac::detail {

namespace {

enum class FeatureScheme { word_bigram, char_trigram };

struct BaseSpec {
    std::string_view name;
    FeatureScheme scheme;
    std::uint32_t buckets;
    std::uint32_t dim;
    std::uint64_t init_seed;
};

constexpr BaseSpec kDefaultBase{"hashed-word-bigram-64", FeatureScheme::word_bigram, 1u << 15, 64,
                                0x5eedba5e0001ULL};
constexpr BaseSpec kAlternateBase{"hashed-char-trigram-96", FeatureScheme::char_trigram, 1u << 15, 96,
                                  0x5eedba5e0002ULL};

const BaseSpec& base_spec(bool alternate) { return alternate ? kAlternateBase : kDefaultBase; }

constexpr char kBaseMagic[8] = {'P', 'F', 'B', 'A', 'S', 'E', '0', '1'};
constexpr char kModelMagic[8] = {'P', 'F', 'E', 'M', 'B', '0', '0', '1'};

template <typename T>
void write_pod(std::ostream& out, const T& value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (!in) fail(ErrorKind::data, "truncated model file");
    return value;
}

template <typename T>
void write_vec(std::ostream& out, const std::vector<T>& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
void read_vec(std::istream& in, std::vector<T>& v) {
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
    if (!in) fail(ErrorKind::data, "truncated model file");
}

/// Immutable base encoder weights shared by every model in the process.
class BaseEncoder {
public:
    BaseEncoder(const BaseSpec& spec, std::vector<float> table)
        : spec_(spec), table_(std::move(table)) {
        fingerprint_ = fnv1a(std::string_view(reinterpret_cast<const char*>(table_.data()),
                                              table_.size() * sizeof(float)));
    }

    const BaseSpec& spec() const { return spec_; }
    std::uint32_t dim() const { return spec_.dim; }
    std::uint64_t fingerprint() const { return fingerprint_; }
    const float* row(std::uint32_t bucket) const { return table_.data() + std::size_t(bucket) * spec_.dim; }

    std::vector<std::uint32_t> features(std::string_view sentence) const {
        const auto tokens = tokenize(normalize_text(sentence));
        std::vector<std::uint32_t> out;
        auto add = [&](std::string_view tag, std::string_view text) {
            Fnv1a h;
            h.update(spec_.name).update(tag).update(text);
            out.push_back(static_cast<std::uint32_t>(h.digest() % spec_.buckets));
        };
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            add("w:", tokens[i]);
            if (spec_.scheme == FeatureScheme::word_bigram) {
                if (i + 1 < tokens.size()) add("b:", tokens[i] + " " + tokens[i + 1]);
            } else {
                const std::string padded = "<" + tokens[i] + ">";
                for (std::size_t c = 0; c + 3 <= padded.size(); ++c) add("c:", std::string_view(padded).substr(c, 3));
            }
        }
        return out;
    }

private:
    BaseSpec spec_;
    std::vector<float> table_;
    std::uint64_t fingerprint_ = 0;
};

std::vector<float> generate_table(const BaseSpec& spec) {
    std::vector<float> table(std::size_t(spec.buckets) * spec.dim);
    Rng rng = make_rng(spec.init_seed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(spec.dim));
    for (float& w : table) w = static_cast<float>(standard_normal(rng) * scale);
    return table;
}

// Reads <cache>/<name>.bin when present: magic, u32 buckets, u32 dim, then
// buckets*dim little-endian float32 values.
std::optional<std::vector<float>> load_cached_table(const BaseSpec& spec) {
    const char* cache = std::getenv(kModelCacheEnv);
    if (!cache || !*cache) return std::nullopt;
    const auto path = std::filesystem::path(cache) / (std::string(spec.name) + ".bin");
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kBaseMagic, sizeof(magic)) != 0) {
        fail(ErrorKind::data, "'" + path.string() + "' is not a base encoder file");
    }
    const auto buckets = read_pod<std::uint32_t>(in);
    const auto dim = read_pod<std::uint32_t>(in);
    if (buckets != spec.buckets || dim != spec.dim) {
        fail(ErrorKind::data, "'" + path.string() + "' has shape " + std::to_string(buckets) + "x" +
                                  std::to_string(dim) + ", expected " + std::to_string(spec.buckets) +
                                  "x" + std::to_string(spec.dim));
    }
    std::vector<float> table(std::size_t(buckets) * dim);
    read_vec(in, table);
    return table;
}

std::shared_ptr<const BaseEncoder> base_encoder(const BaseSpec& spec) {
    static std::mutex mutex;
    static std::unordered_map<std::string, std::shared_ptr<const BaseEncoder>> loaded;
    const char* cache = std::getenv(kModelCacheEnv);
    const std::string key = std::string(spec.name) + "@" + (cache ? cache : "");
    std::lock_guard lock(mutex);
    auto it = loaded.find(key);
    if (it != loaded.end()) return it->second;
    auto table = load_cached_table(spec);
    auto encoder = std::make_shared<const BaseEncoder>(spec, table ? std::move(*table) : generate_table(spec));
    loaded.emplace(key, encoder);
    return encoder;
}

/// Trainable state on top of a base encoder.
struct EmbeddingModel {
    std::shared_ptr<const BaseEncoder> base;
    std::uint32_t dim = 0;
    std::vector<double> weight;  // dim x dim, row-major
    std::vector<double> bias;    // dim
    std::unordered_map<std::uint32_t, std::vector<float>> row_overrides;
    std::vector<double> head;       // kNumCategories x dim
    std::vector<double> head_bias;  // kNumCategories

    explicit EmbeddingModel(std::shared_ptr<const BaseEncoder> b) : base(std::move(b)), dim(base->dim()) {
        weight.assign(std::size_t(dim) * dim, 0.0);
        for (std::uint32_t i = 0; i < dim; ++i) weight[std::size_t(i) * dim + i] = 1.0;
        bias.assign(dim, 0.0);
        head.assign(kNumCategories * dim, 0.0);
        head_bias.assign(kNumCategories, 0.0);
    }

    const float* row(std::uint32_t bucket) const {
        auto it = row_overrides.find(bucket);
        return it != row_overrides.end() ? it->second.data() : base->row(bucket);
    }

    std::vector<double> pooled(std::span<const std::uint32_t> feats) const {
        std::vector<double> u(dim, 0.0);
        if (feats.empty()) return u;
        for (std::uint32_t f : feats) {
            const float* r = row(f);
            for (std::uint32_t d = 0; d < dim; ++d) u[d] += r[d];
        }
        const double inv = 1.0 / static_cast<double>(feats.size());
        for (double& x : u) x *= inv;
        return u;
    }

    std::vector<double> project(const std::vector<double>& u) const {
        std::vector<double> z = bias;
        for (std::uint32_t i = 0; i < dim; ++i) {
            const double* w = weight.data() + std::size_t(i) * dim;
            double acc = 0;
            for (std::uint32_t j = 0; j < dim; ++j) acc += w[j] * u[j];
            z[i] += acc;
        }
        return z;
    }

    std::vector<double> unit_embedding(std::span<const std::uint32_t> feats) const {
        auto z = project(pooled(feats));
        normalize(z);
        return z;
    }

    static double normalize(std::vector<double>& z) {
        double n = 0;
        for (double x : z) n += x * x;
        n = std::sqrt(n);
        if (n > 1e-12) {
            for (double& x : z) x /= n;
        } else {
            std::fill(z.begin(), z.end(), 0.0);
        }
        return n;
    }

    std::array<double, kNumCategories> logits(const std::vector<double>& x) const {
        std::array<double, kNumCategories> out{};
        for (std::size_t k = 0; k < kNumCategories; ++k) {
            double acc = head_bias[k];
            const double* h = head.data() + k * dim;
            for (std::uint32_t d = 0; d < dim; ++d) acc += h[d] * x[d];
            out[k] = acc;
        }
        return out;
    }
};

std::array<double, kNumCategories> softmax(const std::array<double, kNumCategories>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::array<double, kNumCategories> p{};
    double sum = 0;
    for (std::size_t k = 0; k < kNumCategories; ++k) sum += p[k] = std::exp(logits[k] - m);
    for (double& x : p) x /= sum;
    return p;
}

/// Gradient accumulator for one mini-batch of body updates.
struct BodyGradient {
    std::vector<double> weight, bias;
    std::unordered_map<std::uint32_t, std::vector<double>> rows;

    explicit BodyGradient(std::uint32_t dim) : weight(std::size_t(dim) * dim, 0.0), bias(dim, 0.0) {}

    void clear() {
        std::fill(weight.begin(), weight.end(), 0.0);
        std::fill(bias.begin(), bias.end(), 0.0);
        rows.clear();
    }

    // Accumulates d loss / d z back through z = W u + b and, when requested,
    // through the mean pooling into the feature rows.
    void add(const EmbeddingModel& m, std::span<const std::uint32_t> feats, const std::vector<double>& u,
             const std::vector<double>& dz, bool into_rows) {
        const std::uint32_t dim = m.dim;
        for (std::uint32_t i = 0; i < dim; ++i) {
            bias[i] += dz[i];
            double* g = weight.data() + std::size_t(i) * dim;
            for (std::uint32_t j = 0; j < dim; ++j) g[j] += dz[i] * u[j];
        }
        if (!into_rows || feats.empty()) return;
        std::vector<double> du(dim, 0.0);
        for (std::uint32_t i = 0; i < dim; ++i) {
            const double* w = m.weight.data() + std::size_t(i) * dim;
            for (std::uint32_t j = 0; j < dim; ++j) du[j] += w[j] * dz[i];
        }
        const double inv = 1.0 / static_cast<double>(feats.size());
        for (std::uint32_t f : feats) {
            auto& r = rows[f];
            if (r.empty()) r.assign(dim, 0.0);
            for (std::uint32_t d = 0; d < dim; ++d) r[d] += du[d] * inv;
        }
    }

    void apply(EmbeddingModel& m, double step) const {
        for (std::size_t i = 0; i < weight.size(); ++i) m.weight[i] -= step * weight[i];
        for (std::size_t i = 0; i < bias.size(); ++i) m.bias[i] -= step * bias[i];
        // Apply row updates in bucket order so results do not depend on hash
        // map iteration order.
        std::vector<std::uint32_t> buckets;
        buckets.reserve(rows.size());
        for (const auto& [b, _] : rows) buckets.push_back(b);
        std::sort(buckets.begin(), buckets.end());
        for (std::uint32_t b : buckets) {
            auto [it, inserted] = m.row_overrides.try_emplace(b);
            if (inserted) {
                const float* src = m.base->row(b);
                it->second.assign(src, src + m.dim);
            }
            const auto& g = rows.at(b);
            for (std::uint32_t d = 0; d < m.dim; ++d) it->second[d] -= static_cast<float>(step * g[d]);
        }
    }
};

struct Pair {
    std::uint32_t a, b;
    double label;
};

std::vector<Pair> make_pairs(std::span<const TrainingSentence> labeled, int iterations, Rng& rng) {
    std::array<std::vector<std::uint32_t>, kNumCategories> by_class;
    for (std::uint32_t i = 0; i < labeled.size(); ++i) by_class[index_of(labeled[i].category)].push_back(i);

    std::vector<Pair> pairs;
    pairs.reserve(std::size_t(iterations) * labeled.size() * 2);
    for (int it = 0; it < iterations; ++it) {
        for (std::uint32_t i = 0; i < labeled.size(); ++i) {
            const std::size_t k = index_of(labeled[i].category);
            const auto& same = by_class[k];
            std::uint32_t j = i;
            while (j == i) j = same[uniform_index(rng, same.size())];
            pairs.push_back({i, j, 1.0});

            const std::size_t others = labeled.size() - same.size();
            std::size_t pick = uniform_index(rng, others);
            for (std::size_t c = 0; c < kNumCategories; ++c) {
                if (c == k) continue;
                if (pick < by_class[c].size()) {
                    pairs.push_back({i, by_class[c][pick], 0.0});
                    break;
                }
                pick -= by_class[c].size();
            }
        }
    }
    return pairs;
}

void contrastive_finetune(EmbeddingModel& m, const BackendConfig& cfg,
                          std::span<const TrainingSentence> labeled,
                          const std::vector<std::vector<std::uint32_t>>& feats, Rng& rng) {
    auto pairs = make_pairs(labeled, cfg.embedding.pair_iterations, rng);
    const bool rows = cfg.variants.end_to_end;
    BodyGradient grad(m.dim);

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(pairs, rng);
        for (std::size_t start = 0; start < pairs.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(pairs.size(), start + std::size_t(cfg.batch_size));
            grad.clear();
            for (std::size_t p = start; p < end; ++p) {
                const Pair& pr = pairs[p];
                const auto ua = m.pooled(feats[pr.a]);
                const auto ub = m.pooled(feats[pr.b]);
                const auto za = m.project(ua);
                const auto zb = m.project(ub);
                double na = 0, nb = 0, dot = 0;
                for (std::uint32_t d = 0; d < m.dim; ++d) {
                    na += za[d] * za[d];
                    nb += zb[d] * zb[d];
                    dot += za[d] * zb[d];
                }
                na = std::sqrt(na);
                nb = std::sqrt(nb);
                if (na < 1e-9 || nb < 1e-9) continue;
                const double cos = dot / (na * nb);
                const double dl = 2.0 * (cos - pr.label);
                std::vector<double> ga(m.dim), gb(m.dim);
                for (std::uint32_t d = 0; d < m.dim; ++d) {
                    ga[d] = dl * (zb[d] / (na * nb) - cos * za[d] / (na * na));
                    gb[d] = dl * (za[d] / (na * nb) - cos * zb[d] / (nb * nb));
                }
                grad.add(m, feats[pr.a], ua, ga, rows);
                grad.add(m, feats[pr.b], ub, gb, rows);
            }
            grad.apply(m, cfg.embedding.body_learning_rate / static_cast<double>(end - start));
        }
    }
}

constexpr double kLogisticStep = 1.0;

void fit_logistic_head(EmbeddingModel& m, const BackendConfig& cfg,
                       std::span<const TrainingSentence> labeled,
                       const std::vector<std::vector<std::uint32_t>>& feats) {
    const std::size_t n = labeled.size();
    std::vector<std::vector<double>> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = m.unit_embedding(feats[i]);

    const std::uint32_t dim = m.dim;
    std::vector<double> gh(kNumCategories * dim);
    std::array<double, kNumCategories> gc{};
    for (int it = 0; it < cfg.embedding.logistic_iterations; ++it) {
        std::fill(gh.begin(), gh.end(), 0.0);
        gc.fill(0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto p = softmax(m.logits(x[i]));
            p[index_of(labeled[i].category)] -= 1.0;
            for (std::size_t k = 0; k < kNumCategories; ++k) {
                gc[k] += p[k];
                for (std::uint32_t d = 0; d < dim; ++d) gh[k * dim + d] += p[k] * x[i][d];
            }
        }
        const double inv = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < gh.size(); ++i) {
            m.head[i] -= kLogisticStep * (gh[i] * inv + cfg.embedding.l2 * m.head[i]);
        }
        for (std::size_t k = 0; k < kNumCategories; ++k) m.head_bias[k] -= kLogisticStep * gc[k] * inv;
    }
}

void fit_differentiable_head(EmbeddingModel& m, const BackendConfig& cfg,
                             std::span<const TrainingSentence> labeled,
                             const std::vector<std::vector<std::uint32_t>>& feats, Rng& rng) {
    const std::uint32_t dim = m.dim;
    const bool through_body = cfg.variants.end_to_end;
    std::vector<std::uint32_t> order(labeled.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;

    BodyGradient body(dim);
    std::vector<double> gh(kNumCategories * dim);
    std::array<double, kNumCategories> gc{};
    for (int epoch = 0; epoch < cfg.embedding.head_epochs; ++epoch) {
        shuffle(order, rng);
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
            std::fill(gh.begin(), gh.end(), 0.0);
            gc.fill(0.0);
            body.clear();
            for (std::size_t s = start; s < end; ++s) {
                const std::uint32_t i = order[s];
                const auto u = m.pooled(feats[i]);
                auto x = m.project(u);
                const double norm = EmbeddingModel::normalize(x);
                auto p = softmax(m.logits(x));
                p[index_of(labeled[i].category)] -= 1.0;
                std::vector<double> dx(dim, 0.0);
                for (std::size_t k = 0; k < kNumCategories; ++k) {
                    gc[k] += p[k];
                    for (std::uint32_t d = 0; d < dim; ++d) {
                        gh[k * dim + d] += p[k] * x[d];
                        dx[d] += p[k] * m.head[k * dim + d];
                    }
                }
                if (through_body && norm > 1e-12) {
                    double xdx = 0;
                    for (std::uint32_t d = 0; d < dim; ++d) xdx += x[d] * dx[d];
                    std::vector<double> dz(dim);
                    for (std::uint32_t d = 0; d < dim; ++d) dz[d] = (dx[d] - x[d] * xdx) / norm;
                    body.add(m, feats[i], u, dz, true);
                }
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            const double step = cfg.embedding.head_learning_rate;
            for (std::size_t k = 0; k < gh.size(); ++k) {
                m.head[k] -= step * (gh[k] * inv + cfg.embedding.l2 * m.head[k]);
            }
            for (std::size_t k = 0; k < kNumCategories; ++k) m.head_bias[k] -= step * gc[k] * inv;
            if (through_body) body.apply(m, cfg.embedding.body_learning_rate * inv);
        }
    }
}

class EmbeddingClassifier final : public SentenceClassifier {
public:
    explicit EmbeddingClassifier(EmbeddingModel model) : model_(std::move(model)) {}

    std::array<double, kNumCategories> scores(std::string_view sentence) const override {
        const auto feats = model_.base->features(sentence);
        const auto p = softmax(model_.logits(model_.unit_embedding(feats)));
        std::array<double, kNumCategories> out{};
        for (std::size_t k = 0; k < kNumCategories; ++k) out[k] = std::log(std::max(p[k], 1e-300));
        return out;
    }

    void save_payload(const std::filesystem::path& dir) const override {
        const auto path = dir / "embedding.bin";
        std::ofstream out(path, std::ios::binary);
        if (!out) fail(ErrorKind::io, "cannot write '" + path.string() + "'");
        out.write(kModelMagic, sizeof(kModelMagic));
        const auto& name = model_.base->spec().name;
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_pod(out, model_.base->fingerprint());
        write_pod(out, model_.dim);
        write_vec(out, model_.weight);
        write_vec(out, model_.bias);
        write_vec(out, model_.head);
        write_vec(out, model_.head_bias);
        std::vector<std::uint32_t> buckets;
        for (const auto& [b, _] : model_.row_overrides) buckets.push_back(b);
        std::sort(buckets.begin(), buckets.end());
        write_pod(out, static_cast<std::uint64_t>(buckets.size()));
        for (std::uint32_t b : buckets) {
            write_pod(out, b);
            write_vec(out, model_.row_overrides.at(b));
        }
    }

private:
    EmbeddingModel model_;
};

}  // namespace

std::shared_ptr<const SentenceClassifier> fit_embedding(const BackendConfig& config,
                                                        std::span<const TrainingSentence> labeled,
                                                        std::uint64_t seed) {
    EmbeddingModel model(base_encoder(base_spec(config.variants.alternate_embedding_model)));
    std::vector<std::vector<std::uint32_t>> feats;
    feats.reserve(labeled.size());
    for (const auto& s : labeled) feats.push_back(model.base->features(s.text));

    Rng rng = make_rng(seed);
    contrastive_finetune(model, config, labeled, feats, rng);
    if (config.variants.differential_head) {
        fit_differentiable_head(model, config, labeled, feats, rng);
    } else {
        fit_logistic_head(model, config, labeled, feats);
    }
    return std::make_shared<EmbeddingClassifier>(std::move(model));
}

std::shared_ptr<const SentenceClassifier> load_embedding(const BackendConfig& config,
                                                         const std::filesystem::path& dir) {
    const auto path = dir / "embedding.bin";
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::not_found, "embedding model payload not found in '" + dir.string() + "'");
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kModelMagic, sizeof(magic)) != 0) {
        fail(ErrorKind::data, "'" + path.string() + "' is not an embedding model file");
    }
    const BaseSpec& spec = base_spec(config.variants.alternate_embedding_model);
    std::string name(read_pod<std::uint32_t>(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    if (name != spec.name) fail(ErrorKind::data, "model was trained on base encoder '" + name + "'");

    EmbeddingModel model(base_encoder(spec));
    if (read_pod<std::uint64_t>(in) != model.base->fingerprint()) {
        fail(ErrorKind::data, "base encoder weights differ from the ones the model was trained on; check " +
                                  std::string(kModelCacheEnv));
    }
    if (read_pod<std::uint32_t>(in) != model.dim) fail(ErrorKind::data, "embedding dimension mismatch");
    read_vec(in, model.weight);
    read_vec(in, model.bias);
    read_vec(in, model.head);
    read_vec(in, model.head_bias);
    const auto n_rows = read_pod<std::uint64_t>(in);
    for (std::uint64_t r = 0; r < n_rows; ++r) {
        const auto bucket = read_pod<std::uint32_t>(in);
        if (bucket >= spec.buckets) fail(ErrorKind::data, "feature bucket out of range");
        std::vector<float> row(model.dim);
        read_vec(in, row);
        model.row_overrides.emplace(bucket, std::move(row));
    }
    return std::make_shared<EmbeddingClassifier>(std::move(model));
}

}  // namespace popfrac::detail
