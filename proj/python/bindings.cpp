#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "popfrac/backend.hpp"
#include "popfrac/corpus.hpp"
#include "popfrac/error.hpp"
#include "popfrac/experiments.hpp"
#include "popfrac/leakage.hpp"
#include "popfrac/metrics.hpp"
#include "popfrac/pipeline.hpp"
#include "popfrac/report.hpp"
#include "popfrac/synth.hpp"
#include "popfrac/thresholding.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace popfrac;

// Structured results cross the boundary as JSON text; the Python package
// decodes them into plain dicts and lists.
namespace {

BackendConfig backend_config(const std::string& backend, const std::string& config_json) {
    BackendConfig c;
    if (!config_json.empty()) c = backend_config_from_json(nlohmann::json::parse(config_json));
    c.kind = parse_backend_kind(backend);
    c.validate();
    return c;
}

std::vector<BinaryLabel> binary_labels(const std::vector<int>& labels) {
    std::vector<BinaryLabel> out;
    for (int l : labels) {
        if (l != 0 && l != 1) throw Error(ErrorKind::invalid_argument, "labels must be 0 or 1");
        out.push_back(l ? BinaryLabel::populist : BinaryLabel::non_populist);
    }
    return out;
}

Corpus load(const fs::path& path, const std::string& name) {
    const auto format = path.extension() == ".csv" ? CorpusFormat::csv : CorpusFormat::jsonl;
    return validate_corpus(ingest_corpus(path, format, name).corpus).first;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "popfrac core bindings";

    py::register_exception<Error>(m, "PopfracError", PyExc_RuntimeError);

    m.def("split_sentences", [](const std::string& text) { return split_sentences(text); });
    m.def("normalize_text", [](const std::string& text) { return normalize_text(text); });

    m.def("classification_metrics", [](std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
        return to_json(classification_metrics({tp, fp, fn, tn}), std::nullopt).dump();
    }, py::arg("tp"), py::arg("fp"), py::arg("fn"), py::arg("tn"));

    m.def("auroc", [](const std::vector<double>& scores, const std::vector<int>& labels) {
        return auroc(scores, binary_labels(labels));
    }, py::arg("scores"), py::arg("labels"));

    m.def("fit_stump", [](const std::vector<double>& fractions, const std::vector<int>& labels, int runs,
                          std::uint64_t seed, bool deterministic) {
        return to_json(fit_stump(fractions, binary_labels(labels), runs, seed,
                                 deterministic ? StumpFit::deterministic : StumpFit::bootstrap)).dump();
    }, py::arg("fractions"), py::arg("labels"), py::arg("runs") = kDefaultStumpRuns, py::arg("seed") = 0,
       py::arg("deterministic") = false);

    m.def("synth", [](const std::string& preset, std::uint64_t seed, const fs::path& out, double noise) {
        SynthSpec spec = preset == "governor"       ? governor_shaped_spec(seed)
                         : preset == "presidential" ? presidential_shaped_spec(seed)
                         : preset == "desk"         ? desk_spec(seed)
                                                    : throw Error(ErrorKind::invalid_argument,
                                                                  "unknown preset '" + preset + "'");
        spec.noise_rate = noise;
        const auto s = generate_corpus(spec);
        write_synth(s, out);
        return s.corpus.name();
    }, py::arg("preset"), py::arg("seed"), py::arg("out"), py::arg("noise") = 0.0);

    m.def("run_pipeline", [](const fs::path& corpus, const fs::path& training, const std::string& corpus_name,
                             const std::string& backend, const std::string& config_json, const std::string& unit_kind,
                             std::uint64_t seed, double match_threshold, std::size_t workers) {
        py::gil_scoped_release release;
        const Corpus c = load(corpus, corpus_name);
        const auto t = load_training_sentences(training);
        const auto index = build_match_index(t, c, match_threshold, workers);
        const auto result = run_pipeline(c, t, index, backend_config(backend, config_json),
                                         parse_unit_kind(unit_kind), seed, workers);
        auto j = to_json(result);
        j["leakage_violations"] = audit_leakage(result, index);
        return j.dump();
    }, py::arg("corpus"), py::arg("training"), py::arg("corpus_name"), py::arg("backend"),
       py::arg("config_json"), py::arg("unit_kind"), py::arg("seed"), py::arg("match_threshold"),
       py::arg("workers"));

    m.def("evaluate", [](const std::string& predictions_json, const std::string& mode, int runs, std::uint64_t seed) {
        const auto result = pipeline_result_from_json(nlohmann::json::parse(predictions_json));
        return to_json(evaluate_predictions(result, parse_threshold_mode(mode), runs, seed)).dump();
    }, py::arg("predictions_json"), py::arg("mode"), py::arg("runs"), py::arg("seed"));

    m.def("fit_model", [](const fs::path& training, const fs::path& model_dir, const std::string& backend,
                          const std::string& config_json, std::uint64_t seed) {
        py::gil_scoped_release release;
        const auto t = load_training_sentences(training);
        fit(backend_config(backend, config_json), t, seed).save(model_dir);
    }, py::arg("training"), py::arg("model_dir"), py::arg("backend"), py::arg("config_json"), py::arg("seed"));

    m.def("classify", [](const fs::path& model_dir, const std::vector<std::string>& sentences) {
        const auto model = TrainedModel::load(model_dir);
        std::vector<std::string> out;
        for (Category c : model.predict(sentences)) out.emplace_back(to_string(c));
        return out;
    }, py::arg("model_dir"), py::arg("sentences"));

    m.def("sparsity", [](const fs::path& training, const std::vector<int>& counts, const std::string& backend,
                         const std::string& config_json, std::uint64_t seed, std::size_t workers) {
        py::gil_scoped_release release;
        const auto t = load_training_sentences(training);
        const auto rows = sparsity_experiment(t, counts, backend_config(backend, config_json), seed, workers);
        return sparsity_artifact(rows, seed).dump();
    }, py::arg("training"), py::arg("counts"), py::arg("backend"), py::arg("config_json"), py::arg("seed"),
       py::arg("workers"));

    m.def("render_report", [](const std::vector<std::string>& artifacts_json) {
        std::vector<nlohmann::json> artifacts;
        for (const auto& a : artifacts_json) artifacts.push_back(nlohmann::json::parse(a));
        std::vector<std::pair<std::string, std::string>> out;
        for (auto& f : render_report(artifacts)) out.emplace_back(f.name, f.content);
        return out;
    }, py::arg("artifacts_json"));

    m.attr("DEFAULT_SPARSITY_COUNTS") = kDefaultSparsityCounts;
    m.attr("MODEL_CACHE_ENV") = kModelCacheEnv;
}
