#include "ldd/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ldd/errors.hpp"
#include "ldd/layers.hpp"
#include "ldd/temporal.hpp"

namespace ldd {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::BackboneOnly: return "backbone-only";
    case Mode::Spatial: return "spatial";
    case Mode::Temporal: return "temporal";
    case Mode::SpatialTemporal: return "spatial-temporal";
  }
  return "unknown";
}

Mode mode_from_string(const std::string& s) {
  if (s == "backbone-only") return Mode::BackboneOnly;
  if (s == "spatial") return Mode::Spatial;
  if (s == "temporal") return Mode::Temporal;
  if (s == "spatial-temporal") return Mode::SpatialTemporal;
  throw ValidationError("unknown mode '" + s +
                        "' (expected backbone-only, spatial, temporal or spatial-temporal)");
}

bool uses_spatial(Mode mode) { return mode == Mode::Spatial || mode == Mode::SpatialTemporal; }
bool uses_temporal(Mode mode) { return mode == Mode::Temporal || mode == Mode::SpatialTemporal; }

DetectorModel DetectorModel::create(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const auto& a = config.attention;
  Rng rng(seed);
  DetectorModel m;
  m.config = config;
  m.front = patchwork::make_front_end(a.patch_dim(config.backbone.input_channels), a.embed_dim,
                                      (1 + a.frames) * a.patches(), rng);
  m.spatial = attention::make_head_bank(a.heads, a.maps, a.embed_dim, a.latent_dim,
                                        a.combiner_bias, rng);
  m.temporal = attention::make_head_bank(a.heads, a.maps, a.embed_dim, a.latent_dim,
                                         a.combiner_bias, rng);
  m.backbone = backbone::make_backbone(config.backbone, rng);
  return m;
}

DetectorModel DetectorModel::zeros_like() const {
  DetectorModel z;
  z.config = config;
  z.front = patchwork::zeros_like(front);
  z.spatial = attention::zeros_like(spatial);
  z.temporal = attention::zeros_like(temporal);
  z.backbone = backbone::zeros_like(backbone);
  return z;
}

namespace {

template <typename Model, typename Out>
void collect_parameters(Model& m, Out& out) {
  out.emplace_back("front.projection", &m.front.projection);
  out.emplace_back("front.bias", &m.front.bias);
  out.emplace_back("front.position", &m.front.position);
  auto bank = [&out](auto& b, const std::string& prefix) {
    for (std::size_t k = 0; k < b.heads.size(); ++k) {
      out.emplace_back(prefix + ".head" + std::to_string(k) + ".U", &b.heads[k].transform);
      out.emplace_back(prefix + ".head" + std::to_string(k) + ".t", &b.heads[k].templ);
    }
    out.emplace_back(prefix + ".combiner.weights", &b.combiner.weights);
    out.emplace_back(prefix + ".combiner.bias", &b.combiner.bias);
  };
  bank(m.spatial, "spatial");
  bank(m.temporal, "temporal");
  auto norm = [&out](const std::string& prefix, auto& n) {
    if (n.gamma.empty()) return;
    out.emplace_back(prefix + "_gamma", &n.gamma);
    out.emplace_back(prefix + "_beta", &n.beta);
  };
  for (std::size_t i = 0; i < m.backbone.stem.size(); ++i) {
    const std::string p = "stem" + std::to_string(i);
    out.emplace_back(p + ".weight", &m.backbone.stem[i].weight);
    out.emplace_back(p + ".bias", &m.backbone.stem[i].bias);
    norm(p + ".norm", m.backbone.stem[i].norm);
  }
  for (std::size_t i = 0; i < m.backbone.blocks.size(); ++i) {
    auto& b = m.backbone.blocks[i];
    const std::string p = "block" + std::to_string(i + 1);
    out.emplace_back(p + ".dw1", &b.dw1);
    out.emplace_back(p + ".pw1", &b.pw1);
    out.emplace_back(p + ".pw1_bias", &b.pw1_bias);
    norm(p + ".norm1", b.norm1);
    out.emplace_back(p + ".dw2", &b.dw2);
    out.emplace_back(p + ".pw2", &b.pw2);
    out.emplace_back(p + ".pw2_bias", &b.pw2_bias);
    norm(p + ".norm2", b.norm2);
    if (!b.identity_skip()) {
      out.emplace_back(p + ".skip", &b.skip);
      out.emplace_back(p + ".skip_bias", &b.skip_bias);
      norm(p + ".skip_norm", b.skip_norm);
    }
  }
  out.emplace_back("classifier.weight", &m.backbone.classifier.weight);
  out.emplace_back("classifier.bias", &m.backbone.classifier.bias);
}

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

attention::AttentionMapSet unit_maps(int m, int rows, int cols) {
  attention::AttentionMapSet s;
  s.maps.assign(m, Grid(rows, cols, 1.0));
  return s;
}

}  // namespace

std::vector<std::pair<std::string, Tensor*>> DetectorModel::named_parameters() {
  std::vector<std::pair<std::string, Tensor*>> out;
  collect_parameters(*this, out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> DetectorModel::named_parameters() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  collect_parameters(*this, out);
  return out;
}

bool is_attention_parameter(const std::string& name) {
  return starts_with(name, "front.") || starts_with(name, "spatial.") ||
         starts_with(name, "temporal.");
}

bool parameter_in_mode(const std::string& name, Mode mode) {
  if (starts_with(name, "front.")) return uses_spatial(mode) || uses_temporal(mode);
  if (starts_with(name, "spatial.")) return uses_spatial(mode);
  if (starts_with(name, "temporal.")) return uses_temporal(mode);
  return true;
}

ImageTensor centered(ImageTensor image) {
  for (double& v : image.data) v = 2.0 * v - 1.0;
  return image;
}

ModelInput prepare_input(const std::vector<ImageTensor>& window, const ModelConfig& config) {
  if (window.empty()) throw ValidationError("frame window is empty");
  const int b = config.backbone.input_size;
  const int a = config.attention.input_size;
  ModelInput in;
  in.frame = resize_image(window.front(), b, b);
  in.attention_frame = resize_image(window.front(), a, a);
  for (std::size_t k = 1; k < window.size(); ++k) in.next_frames.push_back(resize_image(window[k], a, a));
  return in;
}

double ForwardResult::fake_probability() const {
  return sigmoid(logits[1] - logits[0]);
}

ForwardResult full_forward(const DetectorModel& model, const ModelInput& input, Mode mode,
                           const ForwardOptions& options, ForwardTape* tape) {
  const auto& cfg = model.config;
  const auto& acfg = cfg.attention;
  const int s = acfg.patch_size;
  const int grid = acfg.grid();
  const bool spatial = uses_spatial(mode);
  const bool temporal = uses_temporal(mode);

  if (spatial || temporal) {
    if (input.attention_frame.height != acfg.input_size ||
        input.attention_frame.width != acfg.input_size) {
      throw ValidationError("attention frame must be " + std::to_string(acfg.input_size) + "x" +
                            std::to_string(acfg.input_size));
    }
  }
  if (temporal && static_cast<int>(input.next_frames.size()) != acfg.frames) {
    throw ValidationError(to_string(mode) + " mode needs " + std::to_string(acfg.frames) +
                          " following frames, got " + std::to_string(input.next_frames.size()));
  }

  ForwardResult result;
  FeatureMaps x = backbone::stem_forward(centered(input.frame), cfg.backbone, model.backbone,
                                         tape ? &tape->stem : nullptr);
  if (spatial) {
    patchwork::PatchSequence patches = patchwork::split_into_patches(input.attention_frame, s);
    const auto features = patchwork::add_position(
        patchwork::flatten_and_project(patches, model.front.projection, model.front.bias),
        model.front.position, 0);
    auto maps = attention::bank_forward(model.spatial, features, 1, grid, grid, acfg.aggregation,
                                        tape ? &tape->spatial_bank : nullptr);
    const auto resized = options.force_unit_maps
                             ? unit_maps(maps.count(), x.height, x.width)
                             : attention::resize_maps(maps, x.height, x.width);
    FeatureMaps recal = attention::recalibrate(x, resized);
    if (tape) {
      tape->shallow = std::move(x);
      tape->spatial_patches = std::move(patches);
      tape->spatial_resized = resized;
    }
    x = std::move(recal);
    result.spatial_maps = std::move(maps);
  }

  const int mid = cfg.backbone.mid_hook;
  const int blocks = cfg.backbone.block_count();
  x = backbone::blocks_forward(x, 0, mid, model.backbone, tape ? &tape->low_blocks : nullptr);

  if (temporal) {
    temporal::FrameWindow window{input.attention_frame, input.next_frames};
    patchwork::PatchSequence stacked;
    auto maps = temporal::temporal_forward(window, model.temporal, model.front, s,
                                           acfg.aggregation,
                                           tape ? &tape->temporal_bank : nullptr, &stacked);
    const auto resized = options.force_unit_maps
                             ? unit_maps(maps.count(), x.height, x.width)
                             : attention::resize_maps(maps, x.height, x.width);
    FeatureMaps recal = attention::recalibrate(x, resized);
    if (tape) {
      tape->mid = std::move(x);
      tape->temporal_patches = std::move(stacked);
      tape->temporal_resized = resized;
    }
    x = std::move(recal);
    result.temporal_maps = std::move(maps);
  }

  x = backbone::blocks_forward(x, mid, blocks, model.backbone, tape ? &tape->high_blocks : nullptr);
  result.logits = backbone::classify(x, model.backbone.classifier);
  if (tape) tape->final_features = std::move(x);
  if (!std::isfinite(result.logits[0]) || !std::isfinite(result.logits[1])) {
    throw NumericalError("non-finite logits");
  }
  return result;
}

attention::AttentionMapSet spatial_maps(const DetectorModel& model,
                                        const ImageTensor& attention_frame) {
  const auto& acfg = model.config.attention;
  const auto features = patchwork::add_position(
      patchwork::flatten_and_project(patchwork::split_into_patches(attention_frame, acfg.patch_size),
                                     model.front.projection, model.front.bias),
      model.front.position, 0);
  return attention::bank_forward(model.spatial, features, 1, acfg.grid(), acfg.grid(),
                                 acfg.aggregation);
}

double cross_entropy(const std::array<double, 2>& logits, int label) {
  const double hi = std::max(logits[0], logits[1]);
  const double lse = hi + std::log(std::exp(logits[0] - hi) + std::exp(logits[1] - hi));
  return lse - logits[label];
}

namespace {

void attention_backward(const attention::HeadBank& bank, const attention::BankTape& bank_tape,
                        const attention::AttentionMapSet& grad_resized,
                        const patchwork::PatchSequence& patches, int grid,
                        attention::HeadBank& grad_bank, patchwork::FrontEnd& grad_front) {
  attention::AttentionMapSet grad_maps;
  for (const auto& g : grad_resized.maps)
    grad_maps.maps.push_back(attention::resize_map_backward(g, grid, grid));
  patchwork::VectorSequence grad_features;
  attention::bank_backward(bank, bank_tape, grad_maps, grad_bank, grad_features);
  patchwork::project_backward(patches, grad_features, grad_front.projection, grad_front.bias);
  patchwork::position_backward(grad_features, 0, grad_features.count, 0, grad_front.position);
}

}  // namespace

double accumulate_gradient(const DetectorModel& model, const ModelInput& input, int label,
                           Mode mode, DetectorModel& grad) {
  ForwardTape tape;
  const ForwardResult fwd = full_forward(model, input, mode, {}, &tape);
  const double loss = cross_entropy(fwd.logits, label);

  const double p_fake = fwd.fake_probability();
  const std::array<double, 2> grad_logits{(1.0 - p_fake) - (label == 0 ? 1.0 : 0.0),
                                          p_fake - (label == 1 ? 1.0 : 0.0)};
  const int grid = model.config.attention.grid();

  FeatureMaps g = backbone::classify_backward(tape.final_features, model.backbone.classifier,
                                              grad_logits, grad.backbone.classifier);
  const int mid = model.config.backbone.mid_hook;
  for (int i = static_cast<int>(tape.high_blocks.size()) - 1; i >= 0; --i)
    g = backbone::block_backward(model.backbone.blocks[mid + i], tape.high_blocks[i], g,
                                 grad.backbone.blocks[mid + i]);

  if (uses_temporal(mode)) {
    FeatureMaps g_mid;
    attention::AttentionMapSet g_maps;
    attention::recalibrate_backward(tape.mid, tape.temporal_resized, g, g_mid, g_maps);
    attention_backward(model.temporal, tape.temporal_bank, g_maps, tape.temporal_patches, grid,
                       grad.temporal, grad.front);
    g = std::move(g_mid);
  }

  for (int i = static_cast<int>(tape.low_blocks.size()) - 1; i >= 0; --i)
    g = backbone::block_backward(model.backbone.blocks[i], tape.low_blocks[i], g,
                                 grad.backbone.blocks[i]);

  if (uses_spatial(mode)) {
    FeatureMaps g_shallow;
    attention::AttentionMapSet g_maps;
    attention::recalibrate_backward(tape.shallow, tape.spatial_resized, g, g_shallow, g_maps);
    attention_backward(model.spatial, tape.spatial_bank, g_maps, tape.spatial_patches, grid,
                       grad.spatial, grad.front);
    g = std::move(g_shallow);
  }

  backbone::stem_backward(model.backbone, tape.stem, g, grad.backbone);
  return loss;
}

double relu_margin(const DetectorModel& model, const ModelInput& input, Mode mode) {
  ForwardTape tape;
  full_forward(model, input, mode, {}, &tape);
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& z : tape.stem.pre_relu) margin = std::min(margin, layers::min_abs(z));
  auto scan_blocks = [&margin](const std::vector<backbone::BlockTape>& tapes) {
    for (const auto& t : tapes) {
      margin = std::min(margin, layers::min_abs(t.h3));
      // Exact zeros at a block input come from an upstream ReLU and stay zero
      // under small perturbations.
      for (double v : t.input.data)
        if (v != 0.0) margin = std::min(margin, std::abs(v));
    }
  };
  scan_blocks(tape.low_blocks);
  scan_blocks(tape.high_blocks);
  margin = std::min(margin, layers::min_abs(tape.final_features));
  return margin;
}

}  // namespace ldd
