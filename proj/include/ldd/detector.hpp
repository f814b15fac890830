#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ldd/attention.hpp"
#include "ldd/backbone.hpp"
#include "ldd/config.hpp"
#include "ldd/patchwork.hpp"

namespace ldd {

enum class Mode { BackboneOnly, Spatial, Temporal, SpatialTemporal };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& s);
bool uses_spatial(Mode mode);
bool uses_temporal(Mode mode);

/// All learnable state. The patch front-end is shared by the spatial and
/// temporal banks; each bank owns its K heads and its combiner.
struct DetectorModel {
  ModelConfig config;
  patchwork::FrontEnd front;
  attention::HeadBank spatial;
  attention::HeadBank temporal;
  backbone::BackboneParams backbone;

  static DetectorModel create(const ModelConfig& config, std::uint64_t seed);
  DetectorModel zeros_like() const;

  /// Stable, ordered parameter names ("front.projection", "spatial.head3.U", ...).
  std::vector<std::pair<std::string, Tensor*>> named_parameters();
  std::vector<std::pair<std::string, const Tensor*>> named_parameters() const;
};

/// True for parameters a given mode trains and uses.
bool parameter_in_mode(const std::string& name, Mode mode);
bool is_attention_parameter(const std::string& name);

/// A frame at backbone resolution, the same frame at attention resolution
/// and n following frames at attention resolution.
struct ModelInput {
  ImageTensor frame;
  ImageTensor attention_frame;
  std::vector<ImageTensor> next_frames;
};

/// Maps [0,1] pixels to [-1,1]; full_forward feeds the backbone this way.
ImageTensor centered(ImageTensor image);

/// Resizes a frame window (frame first) to the model's two resolutions.
ModelInput prepare_input(const std::vector<ImageTensor>& window, const ModelConfig& config);

struct ForwardOptions {
  /// Replace every computed attention map with ones before recalibration.
  bool force_unit_maps = false;
};

struct ForwardResult {
  std::array<double, 2> logits{};
  std::optional<attention::AttentionMapSet> spatial_maps;
  std::optional<attention::AttentionMapSet> temporal_maps;

  double fake_probability() const;
};

/// Intermediates retained for the backward pass.
struct ForwardTape {
  backbone::StemTape stem;
  FeatureMaps shallow;  // stem output before spatial recalibration
  patchwork::PatchSequence spatial_patches;
  attention::BankTape spatial_bank;
  attention::AttentionMapSet spatial_resized;
  std::vector<backbone::BlockTape> low_blocks;
  FeatureMaps mid;  // output of block mid_hook before temporal recalibration
  patchwork::PatchSequence temporal_patches;
  attention::BankTape temporal_bank;
  attention::AttentionMapSet temporal_resized;
  std::vector<backbone::BlockTape> high_blocks;
  FeatureMaps final_features;
};

ForwardResult full_forward(const DetectorModel& model, const ModelInput& input, Mode mode,
                           const ForwardOptions& options = {}, ForwardTape* tape = nullptr);

/// Spatial attention maps for a frame at attention resolution.
attention::AttentionMapSet spatial_maps(const DetectorModel& model,
                                        const ImageTensor& attention_frame);

/// Two-class cross-entropy, label 1 = fake.
double cross_entropy(const std::array<double, 2>& logits, int label);

/// Forward + backward for one labelled sample; parameter gradients are added
/// into `grad`. Returns the loss.
double accumulate_gradient(const DetectorModel& model, const ModelInput& input, int label,
                           Mode mode, DetectorModel& grad);

/// Smallest |pre-activation| at any ReLU of the forward pass; finite
/// differences are only meaningful when this exceeds the perturbation size.
double relu_margin(const DetectorModel& model, const ModelInput& input, Mode mode);

}  // namespace ldd
