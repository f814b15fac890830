#include "ldd/temporal.hpp"

#include <string>

#include "ldd/errors.hpp"

namespace ldd::temporal {

ResidualTensor motion_residual(const ImageTensor& a, const ImageTensor& b) {
  if (!a.same_shape(b)) {
    throw ValidationError("motion residual needs equal shapes, got " + std::to_string(a.height) +
                          "x" + std::to_string(a.width) + "x" + std::to_string(a.channels) +
                          " and " + std::to_string(b.height) + "x" + std::to_string(b.width) +
                          "x" + std::to_string(b.channels));
  }
  ResidualTensor r(a.height, a.width, a.channels);
  for (std::size_t i = 0; i < r.data.size(); ++i) r.data[i] = b.data[i] - a.data[i];
  return r;
}

std::vector<ResidualTensor> window_residuals(const FrameWindow& window) {
  std::vector<ResidualTensor> out;
  out.reserve(window.following.size());
  const ImageTensor* previous = &window.frame;
  for (const auto& next : window.following) {
    out.push_back(motion_residual(*previous, next));
    previous = &next;
  }
  return out;
}

patchwork::PatchSequence stack_window_patches(const FrameWindow& window, int patch_size) {
  patchwork::PatchSequence stacked = patchwork::split_into_patches(window.frame, patch_size);
  const int grid_rows = stacked.grid_rows;
  for (const auto& r : window_residuals(window)) {
    const auto p = patchwork::split_into_patches(r, patch_size);
    stacked.data.insert(stacked.data.end(), p.data.begin(), p.data.end());
    stacked.grid_rows += grid_rows;
  }
  return stacked;
}

patchwork::FeatureSequence build_temporal_sequence(const FrameWindow& window, int patch_size,
                                                   const patchwork::FrontEnd& front,
                                                   patchwork::PatchSequence* stacked) {
  auto patches = stack_window_patches(window, patch_size);
  auto features = patchwork::add_position(
      patchwork::flatten_and_project(patches, front.projection, front.bias), front.position, 0);
  if (stacked) *stacked = std::move(patches);
  return features;
}

attention::ActivationVector aggregate_temporal_activations(const attention::ActivationVector& a,
                                                           int slices,
                                                           attention::Aggregation mode) {
  return attention::aggregate_slices(a, slices, mode);
}

attention::AttentionMapSet temporal_forward(const FrameWindow& window,
                                            const attention::HeadBank& bank,
                                            const patchwork::FrontEnd& front, int patch_size,
                                            attention::Aggregation aggregation,
                                            attention::BankTape* tape,
                                            patchwork::PatchSequence* stacked) {
  if (window.n() < 1) throw ValidationError("temporal window needs at least one following frame");
  if (window.frame.height % patch_size != 0 || window.frame.width % patch_size != 0) {
    throw ValidationError("patch size " + std::to_string(patch_size) + " must divide frame " +
                          std::to_string(window.frame.height) + "x" +
                          std::to_string(window.frame.width));
  }
  const int rows = window.frame.height / patch_size;
  const int cols = window.frame.width / patch_size;
  const auto features = build_temporal_sequence(window, patch_size, front, stacked);
  return attention::bank_forward(bank, features, 1 + window.n(), rows, cols, aggregation, tape);
}

}  // namespace ldd::temporal
