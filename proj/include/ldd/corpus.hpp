#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ldd/config.hpp"
#include "ldd/datagen.hpp"

namespace ldd::corpus {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kGeneratorVersion = "ldd-synth-1";

struct CorpusConfig {
  int train_count = 512;
  int test_count = 128;
  int frames = 3;  // following frames stored per sample
  std::uint64_t seed = 1;
  std::vector<datagen::DefectKind> defects{datagen::DefectKind::Blur, datagen::DefectKind::Recolor,
                                           datagen::DefectKind::Warp,
                                           datagen::DefectKind::Checkerboard,
                                           datagen::DefectKind::Jitter};
  datagen::GeneratorConfig generator;

  /// Throws ValidationError on odd or non-positive counts, n < 1 or an
  /// empty/invalid defect list.
  void validate() const;
};

struct FileRecord {
  std::string path;  // relative to the corpus root
  std::string sha256;
};

struct SampleRecord {
  std::string id;
  std::string split;  // "train" or "test"
  int label = 0;      // 1 = fake
  datagen::DefectKind defect = datagen::DefectKind::None;
  std::uint64_t seed = 0;
  FileRecord image;
  FileRecord mask;
  std::vector<FileRecord> frames;  // f0..fn
};

struct CorpusManifest {
  int version = kManifestVersion;
  std::string generator_version = kGeneratorVersion;
  CorpusConfig config;
  std::vector<SampleRecord> samples;
  std::string digest;

  std::vector<const SampleRecord*> split(const std::string& name) const;
};

/// Per-sample seed of sample `index` in a split.
std::uint64_t sample_seed(std::uint64_t master, const std::string& split, int index);

/// The in-memory sample a record was generated from.
datagen::SyntheticSample generate_record(const CorpusConfig& config, const std::string& split,
                                         int index);

/// Writes every sample of both splits under `root` plus manifest.json and
/// returns the manifest. Each split is exactly half fake; fake samples cycle
/// through the configured defects.
CorpusManifest build_corpus(const CorpusConfig& config, const std::filesystem::path& root);

/// Reads manifest.json and checks that every listed file exists.
CorpusManifest load_corpus(const std::filesystem::path& root);

/// Recomputes the digest over records, hashes and config.
std::string manifest_digest(const CorpusManifest& manifest);

std::string manifest_to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const std::string& text);

/// Frames of a folder in numeric file-name order, at both model resolutions.
struct FrameFolder {
  std::vector<std::filesystem::path> files;
  std::vector<ImageTensor> backbone_frames;
  std::vector<ImageTensor> attention_frames;
};

/// Loads every image in a folder (png, pgm/ppm/pnm, raw/f32). Throws
/// ValidationError for an empty folder or mixed channel counts and IoError
/// for an unreadable file; both name the file.
FrameFolder load_frame_folder(const std::filesystem::path& folder, const ModelConfig& config);

/// "frame2" < "frame10": digit runs compare by value.
bool numeric_less(const std::string& a, const std::string& b);

}  // namespace ldd::corpus
