#pragma once

#include <span>
#include <vector>

#include "ldd/tensor.hpp"

namespace ldd::patchwork {

/// Non-overlapping s×s×C tiles in row-major grid order. Each patch is stored
/// flattened in (row, column, channel) order.
struct PatchSequence {
  int patch_size = 0;
  int grid_rows = 0;
  int grid_cols = 0;
  int channels = 0;
  std::vector<double> data;

  int count() const { return grid_rows * grid_cols; }
  int patch_dim() const { return patch_size * patch_size * channels; }
  std::span<const double> patch(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * patch_dim(),
            static_cast<std::size_t>(patch_dim())};
  }
};

/// N vectors of equal length, row-major.
struct VectorSequence {
  int count = 0;
  int dim = 0;
  std::vector<double> data;

  VectorSequence() = default;
  VectorSequence(int n, int d, double fill = 0.0)
      : count(n), dim(d), data(static_cast<std::size_t>(n) * d, fill) {}

  std::span<double> row(int i) { return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)}; }
  std::span<const double> row(int i) const {
    return {data.data() + static_cast<std::size_t>(i) * dim, static_cast<std::size_t>(dim)};
  }
  bool operator==(const VectorSequence&) const = default;
};

/// Projected patches, before position information.
struct EmbeddingSequence : VectorSequence {
  using VectorSequence::VectorSequence;
};

/// Embedding plus position; the attention heads' working set.
struct FeatureSequence : VectorSequence {
  using VectorSequence::VectorSequence;
};

/// Trainable projection from flattened patches to D-dim embeddings, plus the
/// learnable position table. Position slot = slice * grid_size + grid index,
/// so temporal slices get their own rows.
struct FrontEnd {
  Tensor projection;  // patch_dim × D
  Tensor bias;        // D
  Tensor position;    // slots × D

  int input_dim() const { return projection.shape.at(0); }
  int embed_dim() const { return projection.shape.at(1); }
  int slots() const { return position.shape.at(0); }
};

FrontEnd make_front_end(int patch_dim, int embed_dim, int slots, Rng& rng);
FrontEnd zeros_like(const FrontEnd& fe);

PatchSequence split_into_patches(const ImageTensor& image, int s);
ImageTensor reassemble_patches(const PatchSequence& patches);

EmbeddingSequence flatten_and_project(const PatchSequence& patches, const Tensor& weights,
                                      const Tensor& bias);

FeatureSequence add_position(const EmbeddingSequence& embeddings, const Tensor& table,
                             int slice_index);

/// Gradient of flatten_and_project w.r.t. weights and bias, accumulated.
void project_backward(const PatchSequence& patches, const VectorSequence& grad_out,
                      Tensor& grad_weights, Tensor& grad_bias);

/// Scatter-adds rows [first_row, first_row + count) of a feature gradient
/// into the position slots of `slice_index`.
void position_backward(const VectorSequence& grad_features, int first_row, int count,
                       int slice_index, Tensor& grad_table);

}  // namespace ldd::patchwork
