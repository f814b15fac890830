#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "ldd/config.hpp"
#include "ldd/corpus.hpp"
#include "ldd/training.hpp"

namespace ldd {

/// Effective configuration of a CLI run. JSON sections:
///   data      corpus counts, frames, seed, defects and generator magnitudes
///   model     preset name and backbone shape
///   attention attention resolution, patch size, dims, aggregation
///   train     optimiser settings, mode, m, n, K
struct RunConfig {
  std::string preset = "desk";
  corpus::CorpusConfig data;
  ModelConfig model = desk_preset();
  harness::TrainConfig train;

  /// Model configuration with the train section's m, n and K applied.
  ModelConfig effective_model() const { return train.apply(model); }
  /// Validates every section and their cross-constraints.
  void validate() const;
};

/// Parses a run configuration over the defaults. Unknown sections or keys and
/// mistyped values raise ValidationError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
/// Fully populated configuration, suitable for echoing next to outputs.
nlohmann::json run_config_to_json(const RunConfig& config);

nlohmann::json model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const harness::TrainConfig& config);
/// Keys present in `j` override `base`.
harness::TrainConfig train_config_from_json(const nlohmann::json& j,
                                            harness::TrainConfig base = {});

}  // namespace ldd
