#include "ldd/backbone.hpp"

#include <cmath>
#include <string>

#include "ldd/errors.hpp"
#include "ldd/layers.hpp"

namespace ldd::backbone {

namespace {

void he_init(Tensor& t, int fan_in, Rng& rng) {
  const double scale = std::sqrt(2.0 / fan_in);
  for (double& v : t.values) v = rng.normal(0.0, scale);
}

Tensor zeros(const Tensor& t) { return t.empty() ? Tensor() : Tensor(t.shape); }

NormParams make_norm(int channels, int group_size) {
  if (group_size == 0) return {};
  return {Tensor({channels}, 1.0), Tensor({channels}), layers::norm_groups(channels, group_size)};
}

NormParams zeros(const NormParams& n) {
  if (n.gamma.empty()) return {};
  return {zeros(n.gamma), zeros(n.beta), n.groups};
}

FeatureMaps normalize(const FeatureMaps& x, const NormParams& n, layers::GroupNormTape* tape) {
  if (n.gamma.empty()) return x;
  return layers::group_norm(x, n.gamma, n.beta, n.groups, tape);
}

FeatureMaps normalize_backward(const layers::GroupNormTape& tape, const NormParams& n,
                               const FeatureMaps& grad_out, NormParams& grad) {
  if (n.gamma.empty()) return grad_out;
  FeatureMaps gx;
  layers::group_norm_backward(tape, n.gamma, grad_out, gx, grad.gamma, grad.beta);
  return gx;
}

void add_into(FeatureMaps& dst, const FeatureMaps& src) {
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

}  // namespace

BackboneParams make_backbone(const BackboneConfig& config, Rng& rng) {
  BackboneParams p;
  int channels = config.input_channels;
  for (int w : config.stem_widths) {
    ConvParams conv{Tensor({w, channels, 3, 3}), Tensor({w}), make_norm(w, config.norm_group_size)};
    he_init(conv.weight, channels * 9, rng);
    p.stem.push_back(std::move(conv));
    channels = w;
  }
  for (int i = 0; i < config.block_count(); ++i) {
    const int out = config.block_widths[i];
    BlockParams b;
    b.stride = config.block_strides[i];
    b.dw1 = Tensor({channels, 3, 3});
    b.pw1 = Tensor({out, channels});
    b.pw1_bias = Tensor({out});
    b.dw2 = Tensor({out, 3, 3});
    b.pw2 = Tensor({out, out});
    b.pw2_bias = Tensor({out});
    b.norm1 = make_norm(out, config.norm_group_size);
    b.norm2 = make_norm(out, config.norm_group_size);
    he_init(b.dw1, 9, rng);
    he_init(b.pw1, channels, rng);
    he_init(b.dw2, 9, rng);
    he_init(b.pw2, out, rng);
    if (out != channels || b.stride != 1) {
      b.skip = Tensor({out, channels});
      b.skip_bias = Tensor({out});
      b.skip_norm = make_norm(out, config.norm_group_size);
      he_init(b.skip, channels, rng);
    }
    p.blocks.push_back(std::move(b));
    channels = out;
  }
  p.classifier.weight = Tensor({2, channels});
  p.classifier.bias = Tensor({2});
  const double scale = 1.0 / std::sqrt(static_cast<double>(channels));
  for (double& v : p.classifier.weight.values) v = rng.normal(0.0, scale);
  return p;
}

BackboneParams zeros_like(const BackboneParams& params) {
  BackboneParams z;
  for (const auto& c : params.stem) z.stem.push_back({zeros(c.weight), zeros(c.bias), zeros(c.norm)});
  for (const auto& b : params.blocks) {
    BlockParams g;
    g.stride = b.stride;
    g.dw1 = zeros(b.dw1);
    g.pw1 = zeros(b.pw1);
    g.pw1_bias = zeros(b.pw1_bias);
    g.norm1 = zeros(b.norm1);
    g.dw2 = zeros(b.dw2);
    g.pw2 = zeros(b.pw2);
    g.pw2_bias = zeros(b.pw2_bias);
    g.norm2 = zeros(b.norm2);
    g.skip = zeros(b.skip);
    g.skip_bias = zeros(b.skip_bias);
    g.skip_norm = zeros(b.skip_norm);
    z.blocks.push_back(std::move(g));
  }
  z.classifier = {zeros(params.classifier.weight), zeros(params.classifier.bias)};
  return z;
}

FeatureMaps stem_forward(const ImageTensor& image, const BackboneConfig& config,
                         const BackboneParams& params, StemTape* tape) {
  if (image.height != config.input_size || image.width != config.input_size ||
      image.channels != config.input_channels) {
    throw ValidationError("backbone expects " + std::to_string(config.input_size) + "x" +
                          std::to_string(config.input_size) + "x" +
                          std::to_string(config.input_channels) + " input, got " +
                          std::to_string(image.height) + "x" + std::to_string(image.width) + "x" +
                          std::to_string(image.channels));
  }
  FeatureMaps x = to_feature_maps(image);
  for (std::size_t i = 0; i < params.stem.size(); ++i) {
    layers::GroupNormTape norm;
    FeatureMaps z = normalize(layers::conv3x3(x, params.stem[i].weight, params.stem[i].bias,
                                              config.stem_strides[i]),
                              params.stem[i].norm, tape ? &norm : nullptr);
    if (tape) {
      tape->inputs.push_back(std::move(x));
      tape->norms.push_back(std::move(norm));
      tape->pre_relu.push_back(z);
      tape->strides.push_back(config.stem_strides[i]);
    }
    x = layers::relu(z);
  }
  return x;
}

FeatureMaps block_forward(const FeatureMaps& x, const BlockParams& b, BlockTape* tape) {
  BlockTape local;
  BlockTape& t = tape ? *tape : local;
  FeatureMaps h1 = layers::relu(x);
  FeatureMaps h2 = layers::depthwise3x3(h1, b.dw1, b.stride);
  FeatureMaps h3 = normalize(layers::pointwise(h2, b.pw1, b.pw1_bias), b.norm1, tape ? &t.n1 : nullptr);
  FeatureMaps h4 = layers::relu(h3);
  FeatureMaps h5 = layers::depthwise3x3(h4, b.dw2, 1);
  FeatureMaps y = normalize(layers::pointwise(h5, b.pw2, b.pw2_bias), b.norm2, tape ? &t.n2 : nullptr);
  if (b.identity_skip()) {
    add_into(y, x);
  } else {
    add_into(y, normalize(layers::pointwise(x, b.skip, b.skip_bias, b.stride), b.skip_norm,
                          tape ? &t.skip_norm : nullptr));
  }
  if (tape) {
    tape->input = x;
    tape->h1 = std::move(h1);
    tape->h2 = std::move(h2);
    tape->h3 = std::move(h3);
    tape->h4 = std::move(h4);
    tape->h5 = std::move(h5);
  }
  return y;
}

FeatureMaps blocks_forward(const FeatureMaps& features, int from_block, int to_block,
                           const BackboneParams& params, std::vector<BlockTape>* tapes) {
  const int count = static_cast<int>(params.blocks.size());
  if (from_block < 0 || from_block > to_block || to_block > count) {
    throw ValidationError("block range (" + std::to_string(from_block) + ", " +
                          std::to_string(to_block) + "] outside 0.." + std::to_string(count));
  }
  FeatureMaps x = features;
  for (int i = from_block; i < to_block; ++i) {
    BlockTape* tape = nullptr;
    if (tapes) tape = &tapes->emplace_back();
    x = block_forward(x, params.blocks[i], tape);
  }
  return x;
}

std::array<double, 2> classify(const FeatureMaps& features, const ClassifierParams& params) {
  if (params.weight.shape.size() != 2 || params.weight.shape[1] != features.channels) {
    throw ValidationError("classifier " + shape_string(params.weight.shape) + " does not accept " +
                          std::to_string(features.channels) + " channels");
  }
  const auto pooled = layers::global_average_pool(layers::relu(features));
  std::array<double, 2> logits{params.bias.values[0], params.bias.values[1]};
  for (int k = 0; k < 2; ++k)
    for (int c = 0; c < features.channels; ++c)
      logits[k] += params.weight.values[k * features.channels + c] * pooled[c];
  return logits;
}

void stem_backward(const BackboneParams& params, const StemTape& tape, const FeatureMaps& grad_out,
                   BackboneParams& grad) {
  FeatureMaps g = grad_out;
  for (int i = static_cast<int>(params.stem.size()) - 1; i >= 0; --i) {
    const FeatureMaps gz = normalize_backward(tape.norms[i], params.stem[i].norm,
                                              layers::relu_backward(tape.pre_relu[i], g),
                                              grad.stem[i].norm);
    const int stride = tape.strides[i];
    FeatureMaps gx;
    layers::conv3x3_backward(tape.inputs[i], params.stem[i].weight, stride, gz,
                             i > 0 ? &gx : nullptr, grad.stem[i].weight, grad.stem[i].bias);
    g = std::move(gx);
  }
}

FeatureMaps block_backward(const BlockParams& b, const BlockTape& tape, const FeatureMaps& grad_out,
                           BlockParams& grad) {
  FeatureMaps g_x;
  if (b.identity_skip()) {
    g_x = grad_out;
  } else {
    const FeatureMaps gs = normalize_backward(tape.skip_norm, b.skip_norm, grad_out, grad.skip_norm);
    layers::pointwise_backward(tape.input, b.skip, b.stride, gs, g_x, grad.skip, grad.skip_bias);
  }
  FeatureMaps g5, g4, g2, g1;
  const FeatureMaps gy = normalize_backward(tape.n2, b.norm2, grad_out, grad.norm2);
  layers::pointwise_backward(tape.h5, b.pw2, 1, gy, g5, grad.pw2, grad.pw2_bias);
  layers::depthwise3x3_backward(tape.h4, b.dw2, 1, g5, g4, grad.dw2);
  const FeatureMaps g3 = normalize_backward(tape.n1, b.norm1, layers::relu_backward(tape.h3, g4), grad.norm1);
  layers::pointwise_backward(tape.h2, b.pw1, 1, g3, g2, grad.pw1, grad.pw1_bias);
  layers::depthwise3x3_backward(tape.h1, b.dw1, b.stride, g2, g1, grad.dw1);
  add_into(g_x, layers::relu_backward(tape.input, g1));
  return g_x;
}

FeatureMaps classify_backward(const FeatureMaps& features, const ClassifierParams& params,
                              const std::array<double, 2>& grad_logits, ClassifierParams& grad) {
  const auto pooled = layers::global_average_pool(layers::relu(features));
  const int channels = features.channels;
  FeatureMaps g(channels, features.height, features.width);
  const double inv_area = 1.0 / static_cast<double>(features.plane_size());
  for (int k = 0; k < 2; ++k) {
    grad.bias.values[k] += grad_logits[k];
    for (int c = 0; c < channels; ++c)
      grad.weight.values[k * channels + c] += grad_logits[k] * pooled[c];
  }
  for (int c = 0; c < channels; ++c) {
    double gp = 0.0;
    for (int k = 0; k < 2; ++k) gp += grad_logits[k] * params.weight.values[k * channels + c];
    for (double& v : g.plane(c)) v = gp * inv_area;
  }
  return layers::relu_backward(features, g);
}

}  // namespace ldd::backbone
