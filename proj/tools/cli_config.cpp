#include "cli_config.hpp"

#include <fstream>
#include <sstream>

#include "popfrac/error.hpp"
#include "popfrac/experiments.hpp"

namespace popfrac::cli {

namespace {

std::string show(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

// Picks the flag value, the config value, or the default; a flag and a
// config entry that disagree is an error.
template <typename T>
T merge(const char* flag, const char* key, const std::optional<T>& from_flag, const nlohmann::json& config,
        T fallback) {
    std::optional<T> from_config;
    if (config.contains(key)) {
        try {
            from_config = config.at(key).get<T>();
        } catch (const nlohmann::json::exception&) {
            fail(ErrorKind::invalid_argument, std::string("config key '") + key + "' has the wrong type");
        }
    }
    if (from_flag && from_config && *from_flag != *from_config) {
        fail(ErrorKind::invalid_argument, std::string("conflicting values for ") + flag + ": flag gives " +
                                              show(nlohmann::json(*from_flag)) + ", config gives " +
                                              show(nlohmann::json(*from_config)));
    }
    if (from_flag) return *from_flag;
    if (from_config) return *from_config;
    return fallback;
}

const char* const kKnownKeys[] = {"seed",       "workers", "backend",     "threshold_mode", "match_threshold",
                                  "unit_kind",  "stump_runs", "folds",    "repetitions",    "sparsity_counts"};

}  // namespace

Settings resolve_settings(const std::optional<std::filesystem::path>& config_path, const FlagValues& flags) {
    nlohmann::json config = nlohmann::json::object();
    if (config_path) {
        std::ifstream in(*config_path);
        if (!in) fail(ErrorKind::not_found, "config not found: '" + config_path->string() + "'");
        try {
            config = nlohmann::json::parse(in);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::invalid_argument, "config '" + config_path->string() + "' is not valid JSON: " + e.what());
        }
        if (!config.is_object()) fail(ErrorKind::invalid_argument, "config must be a JSON object");
        for (const auto& [key, value] : config.items()) {
            bool known = false;
            for (const char* k : kKnownKeys) known = known || key == k;
            if (!known) fail(ErrorKind::invalid_argument, "unknown config key '" + key + "'");
        }
    }

    Settings s;
    s.seed = merge<std::uint64_t>("--seed", "seed", flags.seed, config, 0);
    s.workers = merge<std::size_t>("--workers", "workers", flags.workers, config, 1);
    require(s.workers >= 1, "--workers must be at least 1");

    nlohmann::json backend_json = config.value("backend", nlohmann::json::object());
    if (!backend_json.is_object()) fail(ErrorKind::invalid_argument, "config key 'backend' must be an object");
    if (flags.backend && backend_json.contains("backend") &&
        backend_json.at("backend") != nlohmann::json(*flags.backend)) {
        fail(ErrorKind::invalid_argument, "conflicting values for --backend: flag gives " + *flags.backend +
                                              ", config gives " + show(backend_json.at("backend")));
    }
    if (flags.backend) backend_json["backend"] = *flags.backend;
    s.backend = backend_config_from_json(backend_json);
    s.backend.seed = s.seed;
    s.backend.validate();

    s.threshold_mode = parse_threshold_mode(
        merge<std::string>("--threshold-mode", "threshold_mode", flags.threshold_mode, config, "bootstrap"));
    s.match_threshold =
        merge<double>("--match-threshold", "match_threshold", flags.match_threshold, config, kDefaultMatchThreshold);
    require(s.match_threshold >= 0.0 && s.match_threshold <= 1.0, "--match-threshold must lie in [0, 1]");
    s.unit_kind = parse_unit_kind(merge<std::string>("--unit-kind", "unit_kind", flags.unit_kind, config, "term"));
    s.stump_runs = merge<int>("--stump-runs", "stump_runs", flags.stump_runs, config, kDefaultStumpRuns);
    require(s.stump_runs >= 1, "--stump-runs must be at least 1");
    s.folds = merge<int>("--folds", "folds", flags.folds, config, kDefaultFolds);
    require(s.folds >= 2, "--folds must be at least 2");
    s.repetitions = merge<int>("--repetitions", "repetitions", flags.repetitions, config, kDefaultGridRepetitions);
    require(s.repetitions >= 1, "--repetitions must be at least 1");
    s.counts = merge<std::vector<int>>("--counts", "sparsity_counts", flags.counts, config, kDefaultSparsityCounts);
    return s;
}

}  // namespace popfrac::cli
