#include <algorithm>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "ldd/corpus.hpp"
#include "ldd/errors.hpp"
#include "ldd/image_io.hpp"
#include "oracles.hpp"

using namespace ldd;
using namespace ldd::corpus;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ldd_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

CorpusConfig small_config() {
  CorpusConfig c;
  c.train_count = 10;
  c.test_count = 4;
  c.frames = 1;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("corpus generation is balanced, stratified and reproducible") {
  const fs::path a = scratch("corpus_a"), b = scratch("corpus_b");
  const auto ma = build_corpus(small_config(), a);
  const auto mb = build_corpus(small_config(), b);
  CHECK(ma.digest == mb.digest);
  CHECK(ma.digest == manifest_digest(ma));
  REQUIRE(ma.split("train").size() == 10);
  REQUIRE(ma.split("test").size() == 4);
  for (const std::string split : {"train", "test"}) {
    const auto records = ma.split(split);
    const auto fakes = std::count_if(records.begin(), records.end(), [](auto* r) { return r->label == 1; });
    CHECK(fakes * 2 == static_cast<long>(records.size()));
  }
  std::vector<datagen::DefectKind> kinds;
  for (const auto* r : ma.split("train"))
    if (r->label == 1) kinds.push_back(r->defect);
  CHECK(kinds == small_config().defects);
  for (const auto& s : ma.samples) {
    CHECK(s.frames.size() == 2);
    CHECK(io::sha256_file(a / s.image.path) == s.image.sha256);
  }
  CHECK(load_corpus(a).digest == ma.digest);

  CorpusConfig other = small_config();
  other.seed = 4;
  CHECK(build_corpus(other, b).digest != ma.digest);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("pairs share a face seed") {
  const auto config = small_config();
  for (int i = 0; i < 10; i += 2) {
    const auto real = generate_record(config, "train", i);
    const auto fake = generate_record(config, "train", i + 1);
    CHECK(real.seed == fake.seed);
    CHECK_FALSE(real.fake);
    CHECK(fake.fake);
  }
  CHECK(sample_seed(3, "train", 0) != sample_seed(3, "test", 0));
}

TEST_CASE("manifest round-trips and detects tampering") {
  const fs::path root = scratch("corpus_tamper");
  const auto m = build_corpus(small_config(), root);
  CHECK(manifest_digest(manifest_from_json(manifest_to_json(m))) == m.digest);

  std::string text = manifest_to_json(m);
  const auto pos = text.find("\"real\"");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 6, "\"fake\"");
  std::ofstream(root / "manifest.json") << text;
  CHECK_THROWS_AS(load_corpus(root), ValidationError);

  std::ofstream(root / "manifest.json") << manifest_to_json(m);
  fs::remove(root / m.samples.front().image.path);
  CHECK_THROWS_AS(load_corpus(root), IoError);
  CHECK_THROWS_AS(manifest_from_json("{}"), ValidationError);
  fs::remove_all(root);
}

TEST_CASE("corpus configuration is validated") {
  for (int bad : {0, 3}) {
    CorpusConfig c = small_config();
    c.train_count = bad;
    CHECK_THROWS_AS(c.validate(), ValidationError);
  }
  CorpusConfig none = small_config();
  none.defects = {datagen::DefectKind::None};
  CHECK_THROWS_AS(none.validate(), ValidationError);
  CorpusConfig empty = small_config();
  empty.defects.clear();
  CHECK_THROWS_AS(empty.validate(), ValidationError);
}

TEST_CASE("numeric file order") {
  std::vector<std::string> names{"f10.png", "f2.png", "f1.png", "f02b.png", "g1.png"};
  std::sort(names.begin(), names.end(), numeric_less);
  CHECK(names == std::vector<std::string>{"f1.png", "f2.png", "f02b.png", "f10.png", "g1.png"});
}

TEST_CASE("frame folders load in numeric order at both resolutions") {
  const fs::path dir = scratch("frames");
  for (int i : {1, 2, 10}) {
    ImageTensor img(40 + i, 50, 3, i / 20.0);
    io::write_png(dir / ("frame" + std::to_string(i) + ".png"), img);
  }
  std::ofstream(dir / "notes.txt") << "ignored";
  const auto f = load_frame_folder(dir, desk_preset());
  REQUIRE(f.files.size() == 3);
  CHECK(f.files[0].filename() == "frame1.png");
  CHECK(f.files[1].filename() == "frame2.png");
  CHECK(f.files[2].filename() == "frame10.png");
  for (const auto& img : f.backbone_frames) {
    CHECK(img.height == 128);
    CHECK(img.width == 128);
  }
  CHECK(f.attention_frames[2].height == 64);
  CHECK(f.attention_frames[2].at(0, 0, 0) == doctest::Approx(0.5).epsilon(1e-2));
  fs::remove_all(dir);
}

TEST_CASE("frame folder errors name the cause") {
  const fs::path dir = scratch("frames_bad");
  CHECK_THROWS_AS(load_frame_folder(dir, desk_preset()), ValidationError);
  io::write_png(dir / "1.png", ImageTensor(8, 8, 3, 0.5));
  io::write_png(dir / "2.png", ImageTensor(8, 8, 1, 0.5));
  try {
    load_frame_folder(dir, desk_preset());
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("2.png") != std::string::npos);
  }
  fs::remove(dir / "2.png");
  std::ofstream(dir / "3.png") << "not a png";
  try {
    load_frame_folder(dir, desk_preset());
    FAIL("expected rejection");
  } catch (const IoError& e) {
    CHECK(std::string(e.what()).find("3.png") != std::string::npos);
  }
  fs::remove_all(dir);
}
