#include "ldd/patchwork.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "ldd/errors.hpp"

namespace ldd::patchwork {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

}  // namespace

FrontEnd make_front_end(int patch_dim, int embed_dim, int slots, Rng& rng) {
  FrontEnd fe;
  fe.projection = Tensor({patch_dim, embed_dim});
  fe.bias = Tensor({embed_dim});
  fe.position = Tensor({slots, embed_dim});
  const double scale = 1.0 / std::sqrt(static_cast<double>(patch_dim));
  for (double& w : fe.projection.values) w = rng.normal(0.0, scale);
  for (double& p : fe.position.values) p = rng.normal(0.0, 0.02);
  return fe;
}

FrontEnd zeros_like(const FrontEnd& fe) {
  return {Tensor(fe.projection.shape), Tensor(fe.bias.shape), Tensor(fe.position.shape)};
}

PatchSequence split_into_patches(const ImageTensor& image, int s) {
  if (s < 1 || image.height % s != 0 || image.width % s != 0) {
    throw ValidationError("patch size " + std::to_string(s) + " must divide image height " +
                          std::to_string(image.height) + " and width " +
                          std::to_string(image.width));
  }
  PatchSequence out;
  out.patch_size = s;
  out.grid_rows = image.height / s;
  out.grid_cols = image.width / s;
  out.channels = image.channels;
  out.data.resize(static_cast<std::size_t>(out.count()) * out.patch_dim());

  const std::size_t row_len = static_cast<std::size_t>(s) * image.channels;
  double* dst = out.data.data();
  for (int gr = 0; gr < out.grid_rows; ++gr) {
    for (int gc = 0; gc < out.grid_cols; ++gc) {
      for (int r = 0; r < s; ++r) {
        const double* src = image.data.data() + image.index(gr * s + r, gc * s, 0);
        std::copy(src, src + row_len, dst);
        dst += row_len;
      }
    }
  }
  return out;
}

ImageTensor reassemble_patches(const PatchSequence& patches) {
  const int s = patches.patch_size;
  if (s < 1 || patches.grid_rows < 1 || patches.grid_cols < 1 || patches.channels < 1 ||
      patches.data.size() != static_cast<std::size_t>(patches.count()) * patches.patch_dim()) {
    throw ValidationError("patch sequence metadata is inconsistent with its data (" +
                          std::to_string(patches.grid_rows) + "x" +
                          std::to_string(patches.grid_cols) + " grid, s=" + std::to_string(s) +
                          ", " + std::to_string(patches.data.size()) + " values)");
  }
  ImageTensor image(patches.grid_rows * s, patches.grid_cols * s, patches.channels);
  const std::size_t row_len = static_cast<std::size_t>(s) * patches.channels;
  const double* src = patches.data.data();
  for (int gr = 0; gr < patches.grid_rows; ++gr) {
    for (int gc = 0; gc < patches.grid_cols; ++gc) {
      for (int r = 0; r < s; ++r) {
        std::copy(src, src + row_len, image.data.data() + image.index(gr * s + r, gc * s, 0));
        src += row_len;
      }
    }
  }
  return image;
}

EmbeddingSequence flatten_and_project(const PatchSequence& patches, const Tensor& weights,
                                      const Tensor& bias) {
  if (weights.shape.size() != 2 || weights.shape[0] != patches.patch_dim() ||
      bias.shape.size() != 1 || bias.shape[0] != weights.shape[1]) {
    throw ValidationError("projection " + shape_string(weights.shape) + " + bias " +
                          shape_string(bias.shape) + " does not accept patches of dim " +
                          std::to_string(patches.patch_dim()));
  }
  const int n = patches.count();
  const int d = weights.shape[1];
  EmbeddingSequence out(n, d);
  ConstRowMap p(patches.data.data(), n, patches.patch_dim());
  ConstRowMap w(weights.data(), weights.shape[0], d);
  RowMap z(out.data.data(), n, d);
  z.noalias() = p * w;
  z.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), d);
  return out;
}

FeatureSequence add_position(const EmbeddingSequence& embeddings, const Tensor& table,
                             int slice_index) {
  if (table.shape.size() != 2 || table.shape[1] != embeddings.dim) {
    throw ValidationError("position table " + shape_string(table.shape) +
                          " does not match embedding dim " + std::to_string(embeddings.dim));
  }
  const long first = static_cast<long>(slice_index) * embeddings.count;
  if (slice_index < 0 || first + embeddings.count > table.shape[0]) {
    throw ValidationError("position slots for slice " + std::to_string(slice_index) + " (" +
                          std::to_string(embeddings.count) + " patches) exceed table of " +
                          std::to_string(table.shape[0]) + " slots");
  }
  FeatureSequence out(embeddings.count, embeddings.dim);
  const double* pos = table.data() + first * embeddings.dim;
  for (std::size_t k = 0; k < out.data.size(); ++k) out.data[k] = embeddings.data[k] + pos[k];
  return out;
}

void project_backward(const PatchSequence& patches, const VectorSequence& grad_out,
                      Tensor& grad_weights, Tensor& grad_bias) {
  const int n = patches.count();
  const int d = grad_out.dim;
  ConstRowMap p(patches.data.data(), n, patches.patch_dim());
  ConstRowMap g(grad_out.data.data(), n, d);
  RowMap gw(grad_weights.data(), patches.patch_dim(), d);
  gw.noalias() += p.transpose() * g;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) grad_bias.values[j] += grad_out.data[static_cast<std::size_t>(i) * d + j];
}

void position_backward(const VectorSequence& grad_features, int first_row, int count,
                       int slice_index, Tensor& grad_table) {
  const int d = grad_features.dim;
  const double* src = grad_features.data.data() + static_cast<std::size_t>(first_row) * d;
  double* dst = grad_table.data() + static_cast<std::size_t>(slice_index) * count * d;
  for (std::size_t k = 0; k < static_cast<std::size_t>(count) * d; ++k) dst[k] += src[k];
}

}  // namespace ldd::patchwork
