#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ldd/corpus.hpp"
#include "ldd/detector.hpp"
#include "ldd/metrics.hpp"

namespace ldd::harness {

struct TrainConfig {
  double learning_rate = 0.0003;
  double momentum = 0.9;
  int batch_size = 1;
  int epochs = 70;
  std::uint64_t seed = 1;
  Mode mode = Mode::SpatialTemporal;
  int maps = 4;     // m
  int frames = 3;   // n
  int heads = 12;   // K

  /// Throws ValidationError unless lr > 0, momentum ∈ [0,1), batch ≥ 1,
  /// epochs ≥ 0, m ≥ 1, n ≥ 1, K ≥ 1.
  void validate() const;
  /// Copies m, n and K into a model configuration.
  ModelConfig apply(ModelConfig config) const;
};

struct Example {
  std::string id;
  ModelInput input;
  int label = 0;
  datagen::DefectKind defect = datagen::DefectKind::None;
  std::uint64_t seed = 0;
};

using Dataset = std::vector<Example>;

/// Loads a split of a corpus at the model's resolutions, using the first
/// 1 + n frames of every stored window.
Dataset load_split(const corpus::CorpusManifest& manifest, const std::filesystem::path& root,
                   const std::string& split, const ModelConfig& config);

/// Builds a dataset from in-memory samples.
Dataset dataset_from_samples(const std::vector<datagen::SyntheticSample>& samples,
                             const ModelConfig& config);

struct Metrics {
  double acc = 0.0;
  double auc = 0.0;
  double loss = 0.0;  // mean cross-entropy
  std::vector<metrics::RocPoint> roc;
  std::vector<double> scores;  // per-sample fake probability
  std::vector<int> labels;
};

/// ACC at the argmax logit, exact AUC and the ROC of the fake probability.
Metrics evaluate(const DetectorModel& model, const Dataset& data, Mode mode);

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;  // mean training loss over the epoch
  double acc = 0.0;   // evaluation split, NaN without one
  double auc = 0.0;
};

struct TrainState {
  DetectorModel model;
  DetectorModel velocity;
  int epoch = 0;  // completed epochs
};

/// Fresh state: model initialised from the config seed, zero velocity.
TrainState initial_state(const ModelConfig& model_config, const TrainConfig& cfg);

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_dir;  // epoch_NNN.ckpt + last.ckpt
  const Dataset* eval_data = nullptr;
  std::function<void(const EpochRecord&)> on_epoch;
};

/// One SGD-with-momentum step on a batch: v = μv + g, p −= lr·v, with g the
/// batch-mean gradient. Parameters the mode does not use are left alone.
/// Returns the batch-mean loss.
double sgd_step(TrainState& state, const Dataset& data, std::span<const std::size_t> batch,
                const TrainConfig& cfg);

/// Trains from `state` until cfg.epochs epochs are complete. A non-finite loss
/// restores the last finite state, saves it and throws NumericalError.
std::vector<EpochRecord> train(TrainState& state, const Dataset& data, const TrainConfig& cfg,
                               const TrainOptions& options = {});

std::string history_csv(const std::vector<EpochRecord>& history);

}  // namespace ldd::harness
