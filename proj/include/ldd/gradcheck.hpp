#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ldd/detector.hpp"

namespace ldd::harness {

/// A learnable array, its analytic gradient, and its name for reporting.
struct ParameterSlice {
  std::string name;
  Tensor* value = nullptr;
  const Tensor* gradient = nullptr;
};

struct ParameterError {
  std::string name;
  std::size_t worst_index = 0;
  double max_rel_error = 0.0;
  double analytic = 0.0;
  double numeric = 0.0;
};

struct GradcheckReport {
  std::vector<ParameterError> parameters;
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  std::size_t checked = 0;

  /// Largest error over parameters accepted by `filter`.
  double max_error_where(const std::function<bool(const std::string&)>& filter) const;
};

/// |analytic − numeric| / max(|analytic|, |numeric|, floor). The floor keeps
/// gradients that are zero up to round-off from producing spurious ratios.
double relative_error(double analytic, double numeric, double floor = 1e-8);

/// Central differences (L(θ+ε) − L(θ−ε)) / 2ε for every entry of every slice,
/// compared against the slice's analytic gradient. Values are restored.
GradcheckReport finite_difference_gradcheck(std::span<const ParameterSlice> slices,
                                            const std::function<double()>& loss, double eps);

struct DetectorGradcheckOptions {
  double eps = 1e-4;
  /// Minimum ReLU pre-activation distance from zero; inputs are nudged with
  /// fresh noise until it holds so no difference straddles a kink.
  double relu_margin = 1e-3;
  int max_nudges = 200;
  /// Test hook: multiply the analytic gradient of this parameter by 1.5.
  std::string corrupt_parameter;
};

/// Cross-entropy gradient check of every parameter the mode uses, on a
/// random input drawn from `seed`.
GradcheckReport gradcheck_detector(DetectorModel& model, Mode mode, int label, std::uint64_t seed,
                                   const DetectorGradcheckOptions& options = {});

/// Random window at the model's resolutions (values in [0,1]).
ModelInput random_model_input(const ModelConfig& config, Rng& rng);

}  // namespace ldd::harness
