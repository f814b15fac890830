#include "ldd/config.hpp"

#include "ldd/errors.hpp"
#include "ldd/layers.hpp"

namespace ldd {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError("invalid model config: " + what);
}

}  // namespace

void ModelConfig::validate() const {
  const auto& b = backbone;
  const auto& a = attention;
  require(b.input_size >= 1, "backbone input_size must be >= 1");
  require(b.input_channels == 1 || b.input_channels == 3, "input_channels must be 1 or 3");
  require(!b.stem_widths.empty() && b.stem_widths.size() == b.stem_strides.size(),
          "stem_widths and stem_strides must be non-empty and equally long");
  require(!b.block_widths.empty() && b.block_widths.size() == b.block_strides.size(),
          "block_widths and block_strides must be non-empty and equally long");
  for (int w : b.stem_widths) require(w >= 1, "stem widths must be >= 1");
  for (int s : b.stem_strides) require(s >= 1, "stem strides must be >= 1");
  for (int w : b.block_widths) require(w >= 1, "block widths must be >= 1");
  for (int s : b.block_strides) require(s >= 1, "block strides must be >= 1");
  require(b.mid_hook >= 1 && b.mid_hook <= b.block_count(),
          "mid_hook must lie in 1.." + std::to_string(b.block_count()));
  require(a.patch_size >= 1 && a.input_size >= a.patch_size && a.input_size % a.patch_size == 0,
          "attention input_size " + std::to_string(a.input_size) +
              " must be a multiple of patch_size " + std::to_string(a.patch_size));
  require(a.embed_dim >= 1 && a.latent_dim >= 1, "embed_dim and latent_dim must be >= 1");
  require(a.heads >= 1, "heads must be >= 1");
  require(a.maps >= 1, "maps must be >= 1");
  require(a.frames >= 1, "frames must be >= 1");
  require(a.maps <= shallow_channels(),
          std::to_string(a.maps) + " maps exceed " + std::to_string(shallow_channels()) +
              " shallow channels");
  require(a.maps <= mid_channels(), std::to_string(a.maps) + " maps exceed " +
                                        std::to_string(mid_channels()) + " mid-level channels");
}

int ModelConfig::shallow_size() const {
  int size = backbone.input_size;
  for (int s : backbone.stem_strides) size = layers::conv_output_size(size, s);
  return size;
}

int ModelConfig::mid_size() const {
  int size = shallow_size();
  for (int i = 0; i < backbone.mid_hook; ++i)
    size = layers::conv_output_size(size, backbone.block_strides[i]);
  return size;
}

ModelConfig desk_preset() { return ModelConfig{}; }

ModelConfig paper_preset() {
  ModelConfig c;
  c.backbone.input_size = 398;
  c.backbone.stem_widths = {32, 64};
  c.backbone.stem_strides = {2, 1};
  c.backbone.block_widths = {128, 256, 728, 728, 728, 728, 728, 728, 728, 728, 728, 1024};
  c.backbone.block_strides = {2, 2, 2, 1, 1, 1, 1, 1, 1, 1, 1, 2};
  c.backbone.mid_hook = 6;
  c.attention.input_size = 224;
  c.attention.patch_size = 16;
  c.attention.embed_dim = 768;
  c.attention.latent_dim = 768;
  return c;
}

ModelConfig micro_preset() {
  ModelConfig c;
  c.backbone.input_size = 16;
  c.backbone.stem_widths = {4, 4};
  c.backbone.stem_strides = {2, 2};
  c.backbone.block_widths = {4};
  c.backbone.block_strides = {1};
  c.backbone.mid_hook = 1;
  c.attention.input_size = 8;
  c.attention.patch_size = 4;
  c.attention.embed_dim = 4;
  c.attention.latent_dim = 4;
  c.attention.heads = 1;
  c.attention.maps = 1;
  c.attention.frames = 1;
  return c;
}

ModelConfig preset_by_name(const std::string& name) {
  if (name == "desk") return desk_preset();
  if (name == "paper") return paper_preset();
  if (name == "micro") return micro_preset();
  throw ValidationError("unknown model preset '" + name + "' (expected desk, paper or micro)");
}

std::string to_string(attention::Aggregation a) {
  return a == attention::Aggregation::Mean ? "mean" : "max";
}

attention::Aggregation aggregation_from_string(const std::string& s) {
  if (s == "mean") return attention::Aggregation::Mean;
  if (s == "max") return attention::Aggregation::Max;
  throw ValidationError("unknown aggregation '" + s + "' (expected mean or max)");
}

}  // namespace ldd
