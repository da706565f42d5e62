#pragma once

#include <filesystem>
#include <memory>
#include <span>

#include "popfrac/backend.hpp"

namespace popfrac::detail {

std::shared_ptr<const SentenceClassifier> fit_lexical(const BackendConfig& config,
                                                      std::span<const TrainingSentence> labeled);
std::shared_ptr<const SentenceClassifier> load_lexical(const std::filesystem::path& dir);

std::shared_ptr<const SentenceClassifier> fit_embedding(const BackendConfig& config,
                                                        std::span<const TrainingSentence> labeled,
                                                        std::uint64_t seed);
std::shared_ptr<const SentenceClassifier> load_embedding(const BackendConfig& config,
                                                         const std::filesystem::path& dir);

}  // namespace popfrac::detail
