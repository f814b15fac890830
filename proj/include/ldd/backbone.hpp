#pragma once

#include <array>
#include <vector>

#include "ldd/config.hpp"
#include "ldd/layers.hpp"
#include "ldd/tensor.hpp"

namespace ldd::backbone {

/// Per-channel scale (ones) and shift (zeros) after group normalisation.
struct NormParams {
  Tensor gamma;
  Tensor beta;
  int groups = 1;
};

/// conv3×3 → group norm → relu.
struct ConvParams {
  Tensor weight;  // Cout × Cin × 3 × 3
  Tensor bias;    // Cout
  NormParams norm;
};

/// relu → dw3×3(stride) → pw → norm → relu → dw3×3 → pw → norm, plus a skip
/// that is the identity when shape is preserved and a strided 1×1
/// projection followed by a norm otherwise.
struct BlockParams {
  int stride = 1;
  Tensor dw1;  // Cin × 3 × 3
  Tensor pw1;  // Cout × Cin
  Tensor pw1_bias;
  NormParams norm1;
  Tensor dw2;  // Cout × 3 × 3
  Tensor pw2;  // Cout × Cout
  Tensor pw2_bias;
  NormParams norm2;
  Tensor skip;  // Cout × Cin, empty for identity skips
  Tensor skip_bias;
  NormParams skip_norm;

  bool identity_skip() const { return skip.empty(); }
};

struct ClassifierParams {
  Tensor weight;  // 2 × C
  Tensor bias;    // 2
};

struct BackboneParams {
  std::vector<ConvParams> stem;
  std::vector<BlockParams> blocks;
  ClassifierParams classifier;
};

/// He-initialized convolutions, zero biases, unit norm scales.
BackboneParams make_backbone(const BackboneConfig& config, Rng& rng);
BackboneParams zeros_like(const BackboneParams& params);

struct StemTape {
  std::vector<FeatureMaps> inputs;    // input of each conv
  std::vector<layers::GroupNormTape> norms;
  std::vector<FeatureMaps> pre_relu;  // normalised conv outputs
  std::vector<int> strides;
};

struct BlockTape {
  FeatureMaps input;
  FeatureMaps h1;  // relu(input)
  FeatureMaps h2;  // dw1
  layers::GroupNormTape n1;
  FeatureMaps h3;  // norm1(pw1)
  FeatureMaps h4;  // relu(h3)
  FeatureMaps h5;  // dw2
  layers::GroupNormTape n2;
  layers::GroupNormTape skip_norm;
};

/// Shallow feature maps; the image must match the configured resolution.
FeatureMaps stem_forward(const ImageTensor& image, const BackboneConfig& config,
                         const BackboneParams& params, StemTape* tape = nullptr);

/// Applies blocks with 1-based indices from_block+1 .. to_block (an empty
/// span is the identity).
FeatureMaps blocks_forward(const FeatureMaps& features, int from_block, int to_block,
                           const BackboneParams& params, std::vector<BlockTape>* tapes = nullptr);

FeatureMaps block_forward(const FeatureMaps& x, const BlockParams& block, BlockTape* tape = nullptr);

/// relu, global average pool, then an affine map to two logits (real, fake).
std::array<double, 2> classify(const FeatureMaps& features, const ClassifierParams& params);

void stem_backward(const BackboneParams& params, const StemTape& tape, const FeatureMaps& grad_out,
                   BackboneParams& grad);
FeatureMaps block_backward(const BlockParams& block, const BlockTape& tape,
                           const FeatureMaps& grad_out, BlockParams& grad);
FeatureMaps classify_backward(const FeatureMaps& features, const ClassifierParams& params,
                              const std::array<double, 2>& grad_logits, ClassifierParams& grad);

}  // namespace ldd::backbone
