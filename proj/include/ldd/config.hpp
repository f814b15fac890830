#pragma once

#include <string>
#include <vector>

#include "ldd/attention.hpp"

namespace ldd {

/// Xception-style backbone: a strided 3×3 stem (the shallow hook sits after
/// it) followed by residual depthwise-separable blocks. `mid_hook` is the
/// 1-based block after which temporal maps recalibrate the features.
struct BackboneConfig {
  int input_size = 128;
  int input_channels = 3;
  std::vector<int> stem_widths{8, 16};
  std::vector<int> stem_strides{2, 2};
  std::vector<int> block_widths{32, 32, 64, 64};
  std::vector<int> block_strides{1, 2, 2, 1};
  int mid_hook = 2;
  int norm_group_size = 0;  // channels per normalisation group, 0 disables

  int block_count() const { return static_cast<int>(block_widths.size()); }
};

struct AttentionConfig {
  int input_size = 64;
  int patch_size = 8;
  int embed_dim = 16;
  int latent_dim = 16;
  int heads = 12;
  int maps = 4;
  int frames = 3;  // n following frames in a temporal window
  attention::Aggregation aggregation = attention::Aggregation::Mean;
  double combiner_bias = 2.0;

  int grid() const { return input_size / patch_size; }
  int patches() const { return grid() * grid(); }
  int patch_dim(int channels) const { return patch_size * patch_size * channels; }
};

struct ModelConfig {
  BackboneConfig backbone;
  AttentionConfig attention;

  /// Throws ValidationError on any inconsistent field.
  void validate() const;

  int shallow_size() const;
  int shallow_channels() const { return backbone.stem_widths.back(); }
  int mid_size() const;
  int mid_channels() const { return backbone.block_widths.at(backbone.mid_hook - 1); }
};

/// 128×128 backbone, 64×64 attention input, 8×8 grid.
ModelConfig desk_preset();
/// 398×398 backbone with 12 blocks, 224×224 attention input, 16×16 patches.
ModelConfig paper_preset();
/// Smallest configuration exercised by the end-to-end gradient check.
ModelConfig micro_preset();

ModelConfig preset_by_name(const std::string& name);

std::string to_string(attention::Aggregation a);
attention::Aggregation aggregation_from_string(const std::string& s);

}  // namespace ldd
