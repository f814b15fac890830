#pragma once

#include <span>
#include <vector>

#include "ldd/patchwork.hpp"
#include "ldd/tensor.hpp"

namespace ldd::attention {

using patchwork::FeatureSequence;
using patchwork::VectorSequence;

/// One latent forgery-property space: transform U (D × D') maps a patch
/// feature into the space, template t (D') is consulted against it.
struct LatentHead {
  Tensor transform;
  Tensor templ;

  int input_dim() const { return transform.shape.at(0); }
  int latent_dim() const { return transform.shape.at(1); }
};

/// Per-patch representations X, N × D'.
using Representation = VectorSequence;

/// Per-patch activation weights, each strictly inside (0,1).
struct ActivationVector {
  std::vector<double> weights;
};

using AttentionGrid = Grid;

/// m final maps sharing one grid shape.
struct AttentionMapSet {
  std::vector<Grid> maps;

  int count() const { return static_cast<int>(maps.size()); }
  int rows() const { return maps.empty() ? 0 : maps.front().rows; }
  int cols() const { return maps.empty() ? 0 : maps.front().cols; }
  bool operator==(const AttentionMapSet&) const = default;
};

/// Linear K → m head mixing followed by a sigmoid.
struct Combiner {
  Tensor weights;  // K × m
  Tensor bias;     // m

  int heads() const { return weights.shape.at(0); }
  int maps() const { return weights.shape.at(1); }
};

struct HeadBank {
  std::vector<LatentHead> heads;
  Combiner combiner;
};

enum class Aggregation { Mean, Max };

/// Heads get U ~ N(0, 1/D), t ~ N(0, 1); combiner weights ~ N(0, 1/K) and a
/// constant combiner bias so that initial maps sit near pass-through.
HeadBank make_head_bank(int heads, int maps, int embed_dim, int latent_dim,
                        double combiner_bias, Rng& rng);
HeadBank zeros_like(const HeadBank& bank);

Representation latent_transform(const FeatureSequence& features, const LatentHead& head);

/// a_i = sigmoid(t·x_i / sqrt(D')).
ActivationVector template_activation(const Representation& x, const Tensor& templ);

AttentionGrid reshape_activations(const ActivationVector& a, int rows, int cols);

AttentionGrid head_forward(const FeatureSequence& features, const LatentHead& head, int rows,
                           int cols);

/// map_j = sigmoid(Σ_k w_kj · grid_k + b_j), element-wise.
AttentionMapSet combine_heads(std::span<const AttentionGrid> grids, const Combiner& combiner);

/// Bilinear resize with half-pixel centers (corner alignment off).
Grid resize_map(const Grid& grid, int height, int width);
/// Adjoint of resize_map: maps a gradient on the resized grid back.
Grid resize_map_backward(const Grid& grad_resized, int rows, int cols);

AttentionMapSet resize_maps(const AttentionMapSet& maps, int height, int width);

/// Map index that multiplies channel c when C channels are split into m
/// contiguous groups of ⌊C/m⌋ (the last group keeps the remainder).
int channel_group(int channel, int channels, int maps);

FeatureMaps recalibrate(const FeatureMaps& features, const AttentionMapSet& resized);

void recalibrate_backward(const FeatureMaps& features, const AttentionMapSet& resized,
                          const FeatureMaps& grad_out, FeatureMaps& grad_features,
                          AttentionMapSet& grad_maps);

/// Mean or max over `slices` consecutive blocks of N activations.
ActivationVector aggregate_slices(const ActivationVector& a, int slices, Aggregation mode);

/// Intermediates of a bank evaluation needed for the backward pass.
struct BankTape {
  FeatureSequence features;
  int slices = 1;
  Aggregation aggregation = Aggregation::Mean;
  std::vector<ActivationVector> activations;  // per head, slices·N
  std::vector<Grid> grids;                    // per head, after aggregation
  AttentionMapSet maps;
};

/// All K heads over a (possibly multi-slice) sequence, aggregated per grid
/// cell and combined into m maps.
AttentionMapSet bank_forward(const HeadBank& bank, const FeatureSequence& features, int slices,
                             int rows, int cols, Aggregation aggregation,
                             BankTape* tape = nullptr);

/// Accumulates parameter gradients into `grad` and writes d(loss)/d(features).
void bank_backward(const HeadBank& bank, const BankTape& tape, const AttentionMapSet& grad_maps,
                   HeadBank& grad, VectorSequence& grad_features);

}  // namespace ldd::attention
