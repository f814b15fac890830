#include "ldd/run_config.hpp"

#include <fstream>
#include <set>

#include "ldd/errors.hpp"

namespace ldd {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& section, const std::set<std::string>& known) {
  if (!j.is_object()) throw ValidationError("config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw ValidationError("unknown key '" + key + "' in config section '" + section + "'");
  }
}

template <typename T>
void read(const json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key '" + section + "." + key + "' has the wrong type");
  }
}

void read_data(const json& j, corpus::CorpusConfig& d) {
  reject_unknown(j, "data",
                 {"train_count", "test_count", "frames", "seed", "defects", "image_size", "blur_sigma",
                  "warp_amplitude", "warp_wavelength", "checkerboard_amplitude", "jitter_amplitude",
                  "motion_speed_min", "motion_speed_max"});
  read(j, "data", "train_count", d.train_count);
  read(j, "data", "test_count", d.test_count);
  read(j, "data", "frames", d.frames);
  read(j, "data", "seed", d.seed);
  if (j.contains("defects")) {
    std::vector<std::string> names;
    read(j, "data", "defects", names);
    d.defects.clear();
    for (const auto& n : names) d.defects.push_back(datagen::defect_from_string(n));
  }
  auto& g = d.generator;
  read(j, "data", "image_size", g.image_size);
  read(j, "data", "blur_sigma", g.blur_sigma);
  read(j, "data", "warp_amplitude", g.warp_amplitude);
  read(j, "data", "warp_wavelength", g.warp_wavelength);
  read(j, "data", "checkerboard_amplitude", g.checkerboard_amplitude);
  read(j, "data", "jitter_amplitude", g.jitter_amplitude);
  read(j, "data", "motion_speed_min", g.motion_speed_min);
  read(j, "data", "motion_speed_max", g.motion_speed_max);
}

json data_to_json(const corpus::CorpusConfig& d) {
  json defects = json::array();
  for (auto k : d.defects) defects.push_back(datagen::to_string(k));
  const auto& g = d.generator;
  return {{"train_count", d.train_count},
          {"test_count", d.test_count},
          {"frames", d.frames},
          {"seed", d.seed},
          {"defects", defects},
          {"image_size", g.image_size},
          {"blur_sigma", g.blur_sigma},
          {"warp_amplitude", g.warp_amplitude},
          {"warp_wavelength", g.warp_wavelength},
          {"checkerboard_amplitude", g.checkerboard_amplitude},
          {"jitter_amplitude", g.jitter_amplitude},
          {"motion_speed_min", g.motion_speed_min},
          {"motion_speed_max", g.motion_speed_max}};
}

const std::set<std::string> kBackboneKeys{"input_size",   "input_channels", "stem_widths", "stem_strides",
                                          "block_widths", "block_strides",  "mid_hook",
                                          "norm_group_size"};
const std::set<std::string> kAttentionKeys{"input_size", "patch_size",  "embed_dim",    "latent_dim",
                                           "aggregation", "combiner_bias"};

void read_backbone(const json& j, const std::string& section, BackboneConfig& b) {
  read(j, section, "input_size", b.input_size);
  read(j, section, "input_channels", b.input_channels);
  read(j, section, "stem_widths", b.stem_widths);
  read(j, section, "stem_strides", b.stem_strides);
  read(j, section, "block_widths", b.block_widths);
  read(j, section, "block_strides", b.block_strides);
  read(j, section, "mid_hook", b.mid_hook);
  read(j, section, "norm_group_size", b.norm_group_size);
}

void read_attention(const json& j, const std::string& section, AttentionConfig& a) {
  read(j, section, "input_size", a.input_size);
  read(j, section, "patch_size", a.patch_size);
  read(j, section, "embed_dim", a.embed_dim);
  read(j, section, "latent_dim", a.latent_dim);
  read(j, section, "combiner_bias", a.combiner_bias);
  if (j.contains("aggregation")) {
    std::string s;
    read(j, section, "aggregation", s);
    a.aggregation = aggregation_from_string(s);
  }
}

json backbone_to_json(const BackboneConfig& b) {
  return {{"input_size", b.input_size},     {"input_channels", b.input_channels},
          {"stem_widths", b.stem_widths},   {"stem_strides", b.stem_strides},
          {"block_widths", b.block_widths}, {"block_strides", b.block_strides},
          {"mid_hook", b.mid_hook},         {"norm_group_size", b.norm_group_size}};
}

json attention_to_json(const AttentionConfig& a) {
  return {{"input_size", a.input_size}, {"patch_size", a.patch_size},
          {"embed_dim", a.embed_dim},   {"latent_dim", a.latent_dim},
          {"aggregation", to_string(a.aggregation)}, {"combiner_bias", a.combiner_bias}};
}

}  // namespace

void RunConfig::validate() const {
  data.validate();
  train.validate();
  effective_model().validate();
  if (data.frames < train.frames) {
    throw ValidationError("corpus stores " + std::to_string(data.frames) + " following frames but n = " +
                          std::to_string(train.frames));
  }
}

json model_config_to_json(const ModelConfig& c) {
  json j = {{"backbone", backbone_to_json(c.backbone)}, {"attention", attention_to_json(c.attention)}};
  j["attention"]["heads"] = c.attention.heads;
  j["attention"]["maps"] = c.attention.maps;
  j["attention"]["frames"] = c.attention.frames;
  return j;
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig c;
  reject_unknown(j, "model", {"backbone", "attention"});
  reject_unknown(j.at("backbone"), "backbone", kBackboneKeys);
  read_backbone(j.at("backbone"), "backbone", c.backbone);
  auto keys = kAttentionKeys;
  keys.insert({"heads", "maps", "frames"});
  const json& a = j.at("attention");
  reject_unknown(a, "attention", keys);
  read_attention(a, "attention", c.attention);
  read(a, "attention", "heads", c.attention.heads);
  read(a, "attention", "maps", c.attention.maps);
  read(a, "attention", "frames", c.attention.frames);
  c.validate();
  return c;
}

json train_config_to_json(const harness::TrainConfig& t) {
  return {{"learning_rate", t.learning_rate}, {"momentum", t.momentum}, {"batch_size", t.batch_size},
          {"epochs", t.epochs},               {"seed", t.seed},         {"mode", to_string(t.mode)},
          {"m", t.maps},                      {"n", t.frames},          {"K", t.heads}};
}

harness::TrainConfig train_config_from_json(const json& j, harness::TrainConfig t) {
  reject_unknown(j, "train", {"learning_rate", "momentum", "batch_size", "epochs", "seed", "mode", "m", "n", "K"});
  read(j, "train", "learning_rate", t.learning_rate);
  read(j, "train", "momentum", t.momentum);
  read(j, "train", "batch_size", t.batch_size);
  read(j, "train", "epochs", t.epochs);
  read(j, "train", "seed", t.seed);
  if (j.contains("mode")) {
    std::string s;
    read(j, "train", "mode", s);
    t.mode = mode_from_string(s);
  }
  read(j, "train", "m", t.maps);
  read(j, "train", "n", t.frames);
  read(j, "train", "K", t.heads);
  return t;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig rc;
  reject_unknown(j, "<root>", {"data", "model", "train", "attention"});
  if (j.contains("model")) {
    const json& m = j.at("model");
    auto keys = kBackboneKeys;
    keys.insert("preset");
    reject_unknown(m, "model", keys);
    read(m, "model", "preset", rc.preset);
    rc.model = preset_by_name(rc.preset);
    read_backbone(m, "model", rc.model.backbone);
    rc.train.maps = rc.model.attention.maps;
    rc.train.frames = rc.model.attention.frames;
    rc.train.heads = rc.model.attention.heads;
  }
  if (j.contains("attention")) {
    reject_unknown(j.at("attention"), "attention", kAttentionKeys);
    read_attention(j.at("attention"), "attention", rc.model.attention);
  }
  if (j.contains("train")) rc.train = train_config_from_json(j.at("train"), rc.train);
  if (j.contains("data")) read_data(j.at("data"), rc.data);
  rc.validate();
  return rc;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("cannot parse config " + path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

json run_config_to_json(const RunConfig& rc) {
  json model = backbone_to_json(rc.model.backbone);
  model["preset"] = rc.preset;
  return {{"data", data_to_json(rc.data)},
          {"model", model},
          {"attention", attention_to_json(rc.model.attention)},
          {"train", train_config_to_json(rc.train)}};
}

}  // namespace ldd
