#pragma once

#include <vector>

#include "ldd/attention.hpp"
#include "ldd/patchwork.hpp"
#include "ldd/tensor.hpp"

namespace ldd::temporal {

/// A frame and the n frames that follow it.
struct FrameWindow {
  ImageTensor frame;
  std::vector<ImageTensor> following;

  int n() const { return static_cast<int>(following.size()); }
};

/// Signed per-pixel difference, values in [-1,1].
using ResidualTensor = ImageTensor;

/// b − a.
ResidualTensor motion_residual(const ImageTensor& a, const ImageTensor& b);

/// R_k = F_k − F_{k−1} for k = 1..n, with F_0 the window's frame.
std::vector<ResidualTensor> window_residuals(const FrameWindow& window);

/// Patches of the frame (slice 0) followed by patches of each residual
/// (slices 1..n), stacked into one sequence of (1+n)·N patches.
patchwork::PatchSequence stack_window_patches(const FrameWindow& window, int patch_size);

/// Projects the stacked patches with the shared front-end and adds the
/// position slot slice·N + i to patch i of each slice.
patchwork::FeatureSequence build_temporal_sequence(const FrameWindow& window, int patch_size,
                                                   const patchwork::FrontEnd& front,
                                                   patchwork::PatchSequence* stacked = nullptr);

/// out_i = mean (or max) over slices k of a[k·N + i].
attention::ActivationVector aggregate_temporal_activations(
    const attention::ActivationVector& a, int slices,
    attention::Aggregation mode = attention::Aggregation::Mean);

attention::AttentionMapSet temporal_forward(const FrameWindow& window,
                                            const attention::HeadBank& bank,
                                            const patchwork::FrontEnd& front, int patch_size,
                                            attention::Aggregation aggregation,
                                            attention::BankTape* tape = nullptr,
                                            patchwork::PatchSequence* stacked = nullptr);

}  // namespace ldd::temporal
