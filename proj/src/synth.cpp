#include "popfrac/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "popfrac/csv.hpp"
#include "popfrac/error.hpp"
#include "popfrac/random.hpp"

namespace popfrac {

void SynthSpec::validate() const {
    require(n_speakers >= 1, "synth: n_speakers must be >= 1");
    require(sentences_per_speech >= 1, "synth: sentences_per_speech must be >= 1");
    if (speeches_per_speaker_list.empty()) {
        require(speeches_per_speaker >= static_cast<int>(kMinSpeechesPerUnit),
                "synth: speeches_per_speaker must be >= 3 or validation drops every unit");
    } else {
        require(speeches_per_speaker_list.size() == static_cast<std::size_t>(n_speakers),
                "synth: speeches_per_speaker_list needs one entry per speaker");
        for (int n : speeches_per_speaker_list) {
            require(n >= static_cast<int>(kMinSpeechesPerUnit),
                    "synth: every speaker needs >= 3 speeches or validation drops the unit");
        }
    }
    require(!fraction_schedule.empty(), "synth: empty fraction schedule");
    for (double f : fraction_schedule) require(f >= 0.0 && f <= 1.0, "synth: fractions must lie in [0, 1]");
    require(noise_rate >= 0.0 && noise_rate < 1.0, "synth: noise_rate must lie in [0, 1)");
    require(min_tokens >= 1 && max_tokens >= min_tokens, "synth: invalid sentence length range");
    require(extracts_per_speech >= 0 && extracts_per_speech <= sentences_per_speech,
            "synth: extracts_per_speech out of range");
    require(fresh_per_category >= 0, "synth: fresh_per_category must be >= 0");

    const bool given = std::any_of(vocabularies.begin(), vocabularies.end(),
                                   [](const auto& v) { return !v.empty(); });
    if (given) {
        std::set<std::string> seen;
        for (const auto& pool : vocabularies) {
            require(!pool.empty(), "synth: every category needs a token pool");
            for (const auto& tok : pool) {
                if (!seen.insert(tok).second && noise_rate == 0.0) {
                    fail(ErrorKind::invalid_argument,
                         "synth: token '" + tok + "' appears in more than one category pool with noise 0");
                }
            }
        }
    } else {
        require(vocabulary_size >= 2, "synth: vocabulary_size must be >= 2");
    }
}

SynthSpec desk_spec(std::uint64_t seed) {
    SynthSpec s;
    s.corpus_name = "synthetic-desk";
    s.seed = seed;
    return s;
}

SynthSpec governor_shaped_spec(std::uint64_t seed) {
    SynthSpec s;
    s.corpus_name = "synthetic-governors";
    s.n_speakers = 73;
    s.speeches_per_speaker_list.assign(73, 4);
    for (int i = 0; i < 4; ++i) s.speeches_per_speaker_list[static_cast<std::size_t>(i) * 18] = 3;
    s.sentences_per_speech = 12;
    s.extracts_per_speech = 1;
    s.fresh_per_category = 40;
    s.seed = seed;
    return s;
}

SynthSpec presidential_shaped_spec(std::uint64_t seed) {
    SynthSpec s;
    s.corpus_name = "synthetic-presidential";
    s.n_speakers = 7;
    s.speeches_per_speaker_list = {7, 7, 7, 6, 6, 6, 6};
    s.sentences_per_speech = 20;
    s.seed = seed;
    return s;
}

namespace {

constexpr std::string_view kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
                                        "br", "dr", "gr", "kl", "pr", "st", "tr", "sk"};
constexpr std::string_view kVowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};

std::string make_word(Rng& rng) {
    const std::size_t syllables = 2 + uniform_index(rng, 2);
    std::string w;
    for (std::size_t i = 0; i < syllables; ++i) {
        w += kOnsets[uniform_index(rng, std::size(kOnsets))];
        w += kVowels[uniform_index(rng, std::size(kVowels))];
    }
    return w;
}

std::string two_digits(int value, int width) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*d", width, value);
    return buf;
}

class SentenceFactory {
public:
    SentenceFactory(const SynthSpec& spec, Rng& rng) : spec_(spec), rng_(rng) {
        if (!spec.vocabularies[0].empty()) {
            pools_ = spec.vocabularies;
            return;
        }
        std::set<std::string> used;
        for (auto& pool : pools_) {
            while (pool.size() < static_cast<std::size_t>(spec.vocabulary_size)) {
                std::string w = make_word(rng_);
                if (used.insert(w).second) pool.push_back(std::move(w));
            }
        }
    }

    std::string make(Category category) {
        for (;;) {
            const auto span = static_cast<std::size_t>(spec_.max_tokens - spec_.min_tokens + 1);
            const std::size_t n = static_cast<std::size_t>(spec_.min_tokens) + uniform_index(rng_, span);
            std::string text;
            for (std::size_t t = 0; t < n; ++t) {
                std::size_t k = index_of(category);
                if (spec_.noise_rate > 0 && uniform01(rng_) < spec_.noise_rate) {
                    k = (k + 1 + uniform_index(rng_, kNumCategories - 1)) % kNumCategories;
                }
                const auto& pool = pools_[k];
                std::string w = pool[uniform_index(rng_, pool.size())];
                if (t == 0 && !w.empty() && w[0] >= 'a' && w[0] <= 'z') w[0] = static_cast<char>(w[0] - 'a' + 'A');
                if (t) text += ' ';
                text += w;
            }
            text += '.';
            if (seen_.insert(text).second) return text;
        }
    }

private:
    const SynthSpec& spec_;
    Rng& rng_;
    std::array<std::vector<std::string>, kNumCategories> pools_;
    std::set<std::string> seen_;
};

constexpr SpeechType kTypes[] = {SpeechType::campaign, SpeechType::state_of_state, SpeechType::ceremonial,
                                 SpeechType::famous};

}  // namespace

SynthCorpus generate_corpus(const SynthSpec& spec) {
    spec.validate();
    Rng rng = make_rng(spec.seed);
    SentenceFactory factory(spec, rng);

    SynthCorpus out;
    std::vector<Speech> speeches;
    std::size_t global = 0;
    const int speech_digits = 4;
    for (int sp = 0; sp < spec.n_speakers; ++sp) {
        const std::string speaker = "spk" + two_digits(sp + 1, 3);
        const int n_speeches = spec.speeches_per_speaker_list.empty()
                                   ? spec.speeches_per_speaker
                                   : spec.speeches_per_speaker_list[static_cast<std::size_t>(sp)];
        for (int k = 0; k < n_speeches; ++k, ++global) {
            const double planted = spec.fraction_schedule[global % spec.fraction_schedule.size()];
            const auto n = static_cast<std::size_t>(spec.sentences_per_speech);
            const auto n_pop = static_cast<std::size_t>(std::llround(planted * static_cast<double>(n)));

            std::vector<Category> labels(n);
            for (std::size_t i = 0; i < n; ++i) {
                labels[i] = i < n_pop ? Category::populist
                                      : ((i - n_pop) % 2 == 0 ? Category::pluralist : Category::neutral);
            }
            shuffle(labels, rng);

            Speech s;
            s.id = "s" + two_digits(static_cast<int>(global + 1), speech_digits);
            s.speaker_id = speaker;
            s.unit_id = "term-" + speaker;
            s.state = "ST" + two_digits(sp % 50 + 1, 2);
            s.speech_type = kTypes[static_cast<std::size_t>(k) % std::size(kTypes)];
            s.period = "synthetic";

            std::vector<std::string> texts;
            for (std::size_t i = 0; i < n; ++i) {
                texts.push_back(factory.make(labels[i]));
                out.sentences.push_back({s.id, i, labels[i], texts.back()});
                if (i) s.text += ' ';
                s.text += texts.back();
            }
            const int tenths = std::clamp(
                static_cast<int>(std::llround(20.0 * static_cast<double>(n_pop) / static_cast<double>(n))), 0, 20);
            s.human_score = Grade::from_tenths(tenths);

            std::vector<std::size_t> positions(n);
            for (std::size_t i = 0; i < n; ++i) positions[i] = i;
            shuffle(positions, rng);
            for (int e = 0; e < spec.extracts_per_speech; ++e) {
                const std::size_t i = positions[static_cast<std::size_t>(e)];
                out.training.push_back({texts[i], labels[i], std::nullopt});
                out.training_is_extract.push_back(true);
            }

            out.speeches.push_back({s.id, s.speaker_id, s.unit_id, n, n_pop,
                                    static_cast<double>(n_pop) / static_cast<double>(n), s.human_score,
                                    binarize_score(s.human_score)});
            speeches.push_back(std::move(s));
        }
    }

    for (Category c : kAllCategories) {
        for (int i = 0; i < spec.fresh_per_category; ++i) {
            out.training.push_back({factory.make(c), c, std::nullopt});
            out.training_is_extract.push_back(false);
        }
    }
    out.corpus = Corpus(spec.corpus_name, std::move(speeches));
    return out;
}

void write_synth(const SynthCorpus& synth, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    write_corpus_jsonl(synth.corpus, dir / "corpus.jsonl");
    write_training_sentences(synth.training, dir / "training.csv");

    std::ofstream out(dir / "ground_truth.csv", std::ios::binary);
    if (!out) fail(ErrorKind::io, "cannot write '" + (dir / "ground_truth.csv").string() + "'");
    csv::write_row(out, {"speech_id", "sentence_index", "category", "text"});
    for (const auto& s : synth.sentences) {
        csv::write_row(out, {s.speech_id, std::to_string(s.index), std::string(to_string(s.category)), s.text});
    }

    std::ofstream speeches(dir / "planted_speeches.csv", std::ios::binary);
    if (!speeches) fail(ErrorKind::io, "cannot write '" + (dir / "planted_speeches.csv").string() + "'");
    csv::write_row(speeches, {"speech_id", "speaker_id", "unit_id", "n_sentences", "n_populist",
                              "planted_fraction", "human_score", "label"});
    char buf[32];
    for (const auto& s : synth.speeches) {
        std::snprintf(buf, sizeof(buf), "%.6f", s.planted_fraction);
        csv::write_row(speeches, {s.speech_id, s.speaker_id, s.unit_id, std::to_string(s.n_sentences),
                                  std::to_string(s.n_populist), buf, std::to_string(s.human_score.tenths() / 10) +
                                  "." + std::to_string(s.human_score.tenths() % 10),
                                  s.label == BinaryLabel::populist ? "1" : "0"});
    }
}

}  // namespace popfrac
