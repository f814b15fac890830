#include "ldd/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "ldd/errors.hpp"
#include "ldd/image_io.hpp"

namespace ldd::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string sample_id(const std::string& split, int index) {
  std::ostringstream os;
  os << split << '_' << std::setw(5) << std::setfill('0') << index;
  return os.str();
}

json generator_json(const datagen::GeneratorConfig& g) {
  return {{"image_size", g.image_size},
          {"blur_sigma", g.blur_sigma},
          {"warp_amplitude", g.warp_amplitude},
          {"warp_wavelength", g.warp_wavelength},
          {"checkerboard_amplitude", g.checkerboard_amplitude},
          {"jitter_amplitude", g.jitter_amplitude},
          {"motion_speed_min", g.motion_speed_min},
          {"motion_speed_max", g.motion_speed_max}};
}

datagen::GeneratorConfig generator_from_json(const json& j) {
  datagen::GeneratorConfig g;
  g.image_size = j.at("image_size").get<int>();
  g.blur_sigma = j.at("blur_sigma").get<double>();
  g.warp_amplitude = j.at("warp_amplitude").get<double>();
  g.warp_wavelength = j.at("warp_wavelength").get<double>();
  g.checkerboard_amplitude = j.at("checkerboard_amplitude").get<double>();
  g.jitter_amplitude = j.at("jitter_amplitude").get<double>();
  g.motion_speed_min = j.at("motion_speed_min").get<double>();
  g.motion_speed_max = j.at("motion_speed_max").get<double>();
  return g;
}

json config_json(const CorpusConfig& c) {
  json defects = json::array();
  for (auto d : c.defects) defects.push_back(datagen::to_string(d));
  return {{"train_count", c.train_count}, {"test_count", c.test_count},
          {"frames", c.frames},           {"seed", c.seed},
          {"defects", defects},           {"generator", generator_json(c.generator)}};
}

CorpusConfig config_from_json(const json& j) {
  CorpusConfig c;
  c.train_count = j.at("train_count").get<int>();
  c.test_count = j.at("test_count").get<int>();
  c.frames = j.at("frames").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.defects.clear();
  for (const auto& d : j.at("defects")) c.defects.push_back(datagen::defect_from_string(d.get<std::string>()));
  c.generator = generator_from_json(j.at("generator"));
  return c;
}

json file_json(const FileRecord& f) { return {{"path", f.path}, {"sha256", f.sha256}}; }
FileRecord file_from_json(const json& j) {
  return {j.at("path").get<std::string>(), j.at("sha256").get<std::string>()};
}

json records_json(const CorpusManifest& m) {
  json samples = json::array();
  for (const auto& s : m.samples) {
    json frames = json::array();
    for (const auto& f : s.frames) frames.push_back(file_json(f));
    samples.push_back({{"id", s.id},
                       {"split", s.split},
                       {"label", s.label == 1 ? "fake" : "real"},
                       {"defect", datagen::to_string(s.defect)},
                       {"seed", s.seed},
                       {"image", file_json(s.image)},
                       {"mask", file_json(s.mask)},
                       {"frames", frames}});
  }
  return samples;
}

FileRecord write_image(const fs::path& root, const std::string& rel, const ImageTensor& img) {
  const auto bytes = io::encode_png(img);
  io::write_file_atomic(root / rel, std::string(bytes.begin(), bytes.end()));
  return {rel, io::sha256_hex(bytes.data(), bytes.size())};
}

}  // namespace

void CorpusConfig::validate() const {
  if (train_count < 2 || train_count % 2 != 0) throw ValidationError("train_count must be even and >= 2");
  if (test_count < 2 || test_count % 2 != 0) throw ValidationError("test_count must be even and >= 2");
  if (frames < 1) throw ValidationError("corpus frames (n) must be >= 1");
  if (defects.empty()) throw ValidationError("defect list is empty");
  for (auto d : defects)
    if (d == datagen::DefectKind::None) throw ValidationError("'none' is not a defect kind");
  if (generator.image_size < 64) throw ValidationError("generator image_size must be >= 64");
  if (!(generator.motion_speed_min >= 0.0) || generator.motion_speed_max < generator.motion_speed_min) {
    throw ValidationError("motion speed range is invalid");
  }
}

std::vector<const SampleRecord*> CorpusManifest::split(const std::string& name) const {
  std::vector<const SampleRecord*> out;
  for (const auto& s : samples)
    if (s.split == name) out.push_back(&s);
  return out;
}

std::uint64_t sample_seed(std::uint64_t master, const std::string& split, int index) {
  const std::uint64_t tag = split == "train" ? 1 : 2;
  return derive_seed(derive_seed(master, tag), static_cast<std::uint64_t>(index));
}

datagen::SyntheticSample generate_record(const CorpusConfig& config, const std::string& split,
                                         int index) {
  const std::uint64_t seed = sample_seed(config.seed, split, index / 2);
  const bool fake = index % 2 == 1;
  const auto kind = fake ? config.defects[(index / 2) % config.defects.size()] : datagen::DefectKind::None;
  auto sample = datagen::gen_sample(seed, kind, config.frames, config.generator);
  sample.seed = seed;
  return sample;
}

CorpusManifest build_corpus(const CorpusConfig& config, const fs::path& root) {
  config.validate();
  CorpusManifest manifest;
  manifest.config = config;
  for (const std::string split : {"train", "test"}) {
    const int count = split == "train" ? config.train_count : config.test_count;
    for (int i = 0; i < count; ++i) {
      const auto sample = generate_record(config, split, i);
      SampleRecord rec;
      rec.id = sample_id(split, i);
      rec.split = split;
      rec.label = sample.fake ? 1 : 0;
      rec.defect = sample.defect;
      rec.seed = sample.seed;
      const std::string base = split + "/" + rec.id;
      rec.image = write_image(root, base + "_img.png", sample.image());
      ImageTensor mask(sample.mask().rows, sample.mask().cols, 1);
      mask.data = sample.mask().values;
      rec.mask = write_image(root, base + "_mask.png", mask);
      for (std::size_t k = 0; k < sample.frames.size(); ++k)
        rec.frames.push_back(write_image(root, base + "_f" + std::to_string(k) + ".png", sample.frames[k]));
      manifest.samples.push_back(std::move(rec));
    }
  }
  manifest.digest = manifest_digest(manifest);
  io::write_file_atomic(root / "manifest.json", manifest_to_json(manifest));
  return manifest;
}

std::string manifest_digest(const CorpusManifest& m) {
  const json body = {{"version", m.version},
                     {"generator_version", m.generator_version},
                     {"config", config_json(m.config)},
                     {"samples", records_json(m)}};
  const std::string text = body.dump();
  return io::sha256_hex(text.data(), text.size());
}

std::string manifest_to_json(const CorpusManifest& m) {
  const json j = {{"version", m.version},
                  {"generator_version", m.generator_version},
                  {"config", config_json(m.config)},
                  {"samples", records_json(m)},
                  {"digest", m.digest}};
  return j.dump(1) + "\n";
}

CorpusManifest manifest_from_json(const std::string& text) {
  CorpusManifest m;
  try {
    const json j = json::parse(text);
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion) {
      throw ValidationError("unsupported manifest version " + std::to_string(m.version));
    }
    m.generator_version = j.at("generator_version").get<std::string>();
    m.config = config_from_json(j.at("config"));
    for (const auto& s : j.at("samples")) {
      SampleRecord r;
      r.id = s.at("id").get<std::string>();
      r.split = s.at("split").get<std::string>();
      r.label = s.at("label").get<std::string>() == "fake" ? 1 : 0;
      r.defect = datagen::defect_from_string(s.at("defect").get<std::string>());
      r.seed = s.at("seed").get<std::uint64_t>();
      r.image = file_from_json(s.at("image"));
      r.mask = file_from_json(s.at("mask"));
      for (const auto& f : s.at("frames")) r.frames.push_back(file_from_json(f));
      m.samples.push_back(std::move(r));
    }
    m.digest = j.at("digest").get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed corpus manifest: ") + e.what());
  }
  return m;
}

CorpusManifest load_corpus(const fs::path& root) {
  const fs::path path = root / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  CorpusManifest m = manifest_from_json(buffer.str());
  if (manifest_digest(m) != m.digest) throw ValidationError("manifest digest mismatch in " + path.string());
  for (const auto& s : m.samples) {
    for (const auto* f : {&s.image, &s.mask})
      if (!fs::exists(root / f->path)) throw IoError("corpus file missing: " + (root / f->path).string());
    for (const auto& f : s.frames)
      if (!fs::exists(root / f.path)) throw IoError("corpus file missing: " + (root / f.path).string());
  }
  return m;
}

bool numeric_less(const std::string& a, const std::string& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
      std::size_t ie = i, je = j;
      while (ie < a.size() && std::isdigit(static_cast<unsigned char>(a[ie]))) ++ie;
      while (je < b.size() && std::isdigit(static_cast<unsigned char>(b[je]))) ++je;
      std::string da = a.substr(i, ie - i), db = b.substr(j, je - j);
      da.erase(0, std::min(da.find_first_not_of('0'), da.size()));
      db.erase(0, std::min(db.find_first_not_of('0'), db.size()));
      if (da.size() != db.size()) return da.size() < db.size();
      if (da != db) return da < db;
      i = ie;
      j = je;
    } else {
      if (a[i] != b[j]) return a[i] < b[j];
      ++i;
      ++j;
    }
  }
  if (a.size() - i != b.size() - j) return a.size() - i < b.size() - j;
  return a < b;
}

FrameFolder load_frame_folder(const fs::path& folder, const ModelConfig& config) {
  if (!fs::is_directory(folder)) throw ValidationError("not a directory: " + folder.string());
  static const std::vector<std::string> exts{".png", ".pgm", ".ppm", ".pnm", ".raw", ".f32"};
  FrameFolder out;
  for (const auto& entry : fs::directory_iterator(folder)) {
    if (!entry.is_regular_file()) continue;
    std::string ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (std::find(exts.begin(), exts.end(), ext) != exts.end()) out.files.push_back(entry.path());
  }
  if (out.files.empty()) throw ValidationError("no image frames in " + folder.string());
  std::sort(out.files.begin(), out.files.end(), [](const fs::path& a, const fs::path& b) {
    return numeric_less(a.filename().string(), b.filename().string());
  });
  int channels = 0;
  for (const auto& file : out.files) {
    ImageTensor img;
    try {
      img = io::load_image(file);
    } catch (const IoError& e) {
      throw IoError("unreadable frame " + file.string() + ": " + e.what());
    }
    if (channels == 0) channels = img.channels;
    if (img.channels != channels) {
      throw ValidationError("frame " + file.string() + " has " + std::to_string(img.channels) +
                            " channels, earlier frames have " + std::to_string(channels));
    }
    const int b = config.backbone.input_size;
    const int a = config.attention.input_size;
    out.backbone_frames.push_back(resize_image(img, b, b));
    out.attention_frames.push_back(resize_image(img, a, a));
  }
  return out;
}

}  // namespace ldd::corpus
