#include "ldd/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ldd/errors.hpp"

namespace ldd::harness {

double GradcheckReport::max_error_where(
    const std::function<bool(const std::string&)>& filter) const {
  double worst = 0.0;
  for (const auto& p : parameters)
    if (filter(p.name)) worst = std::max(worst, p.max_rel_error);
  return worst;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradcheckReport finite_difference_gradcheck(std::span<const ParameterSlice> slices,
                                            const std::function<double()>& loss, double eps) {
  GradcheckReport report;
  for (const auto& slice : slices) {
    if (!slice.value || !slice.gradient || slice.value->size() != slice.gradient->size()) {
      throw ValidationError("gradient for '" + slice.name + "' does not match its parameter");
    }
    ParameterError err;
    err.name = slice.name;
    for (std::size_t i = 0; i < slice.value->size(); ++i) {
      double& v = slice.value->values[i];
      const double saved = v;
      v = saved + eps;
      const double up = loss();
      v = saved - eps;
      const double down = loss();
      v = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = slice.gradient->values[i];
      const double rel = relative_error(analytic, numeric);
      if (!std::isfinite(rel)) throw NumericalError("non-finite gradient in '" + slice.name + "'");
      if (rel >= err.max_rel_error) {
        err.max_rel_error = rel;
        err.worst_index = i;
        err.analytic = analytic;
        err.numeric = numeric;
      }
      ++report.checked;
    }
    if (err.max_rel_error >= report.max_rel_error) {
      report.max_rel_error = err.max_rel_error;
      report.worst_parameter = err.name;
      report.worst_index = err.worst_index;
    }
    report.parameters.push_back(std::move(err));
  }
  return report;
}

ModelInput random_model_input(const ModelConfig& config, Rng& rng) {
  const int b = config.backbone.input_size;
  const int a = config.attention.input_size;
  const int c = config.backbone.input_channels;
  auto fill = [&rng](ImageTensor img) {
    for (double& v : img.data) v = rng.uniform();
    return img;
  };
  ModelInput in;
  in.frame = fill(ImageTensor(b, b, c));
  in.attention_frame = fill(ImageTensor(a, a, c));
  for (int k = 0; k < config.attention.frames; ++k) in.next_frames.push_back(fill(ImageTensor(a, a, c)));
  return in;
}

GradcheckReport gradcheck_detector(DetectorModel& model, Mode mode, int label, std::uint64_t seed,
                                   const DetectorGradcheckOptions& options) {
  Rng rng(seed);
  ModelInput input = random_model_input(model.config, rng);
  int nudges = 0;
  while (relu_margin(model, input, mode) < options.relu_margin) {
    if (++nudges > options.max_nudges) {
      throw NumericalError("could not move ReLU pre-activations away from zero");
    }
    input = random_model_input(model.config, rng);
  }

  DetectorModel grad = model.zeros_like();
  accumulate_gradient(model, input, label, mode, grad);
  auto params = model.named_parameters();
  auto grads = grad.named_parameters();
  std::vector<ParameterSlice> slices;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!parameter_in_mode(params[i].first, mode)) continue;
    if (params[i].first == options.corrupt_parameter) {
      for (double& g : grads[i].second->values) g *= 1.5;
    }
    slices.push_back({params[i].first, params[i].second, grads[i].second});
  }
  const auto loss = [&] { return cross_entropy(full_forward(model, input, mode).logits, label); };
  return finite_difference_gradcheck(slices, loss, options.eps);
}

}  // namespace ldd::harness
