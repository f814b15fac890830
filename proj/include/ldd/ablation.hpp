#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "ldd/training.hpp"

namespace ldd::harness {

enum class Sweep { Modes, Maps, Frames };

std::string to_string(Sweep sweep);
Sweep sweep_from_string(const std::string& s);

/// One trained variant, evaluated once per seed.
struct AblationRow {
  std::string variant;  // "spatial-temporal", "m=3", "n=4", ...
  Mode mode = Mode::SpatialTemporal;
  int maps = 0;
  int frames = 0;
  std::vector<std::uint64_t> seeds;
  std::vector<double> acc;
  std::vector<double> auc;
  double median_acc = 0.0;
  double median_auc = 0.0;
  double seconds = 0.0;
};

struct AblationReport {
  Sweep sweep = Sweep::Modes;
  std::vector<AblationRow> rows;

  std::string to_json() const;
  /// Aligned columns: variant, median ACC, median AUC, per-seed AUC.
  std::string to_table() const;
};

/// The variants a sweep trains: the four modes, m = 1..5 or n = 2..5.
std::vector<TrainConfig> sweep_variants(const TrainConfig& base, Sweep sweep);

/// Train and test datasets for a model configuration (n decides how many
/// frames each example carries).
using DataSource = std::function<std::pair<Dataset, Dataset>(const ModelConfig&)>;

/// Trains every variant with every seed from the same base configuration and
/// reports the test metrics. `progress` receives one line per finished run.
AblationReport ablation_run(const ModelConfig& model, const TrainConfig& base, Sweep sweep,
                            const std::vector<std::uint64_t>& seeds, const DataSource& data,
                            const std::function<void(const std::string&)>& progress = {});

double median(std::vector<double> values);

}  // namespace ldd::harness
