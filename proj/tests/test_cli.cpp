#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(LDD_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ldd_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("usage errors exit with 1") {
  CHECK(run("") == 1);
  CHECK(run("frobnicate") == 1);
  CHECK(run("train") == 1);
  CHECK(run("ablate --corpus x -o y --sweep lr") == 1);
}

TEST_CASE("validation errors exit with 2") {
  const fs::path dir = scratch("cli_invalid");
  CHECK(run("synth -o " + (dir / "c").string() + " --train-count 3") == 2);
  CHECK(run("train --corpus " + (dir / "missing").string() + " -o " + (dir / "r").string()) == 2);
  CHECK(run("gradcheck --preset tiny") == 2);
  fs::remove_all(dir);
}

TEST_CASE("gradcheck exits with 3 on a corrupted gradient") {
  CHECK(run("gradcheck") == 0);
  CHECK(run("gradcheck --corrupt spatial.head0.U") == 3);
}

TEST_CASE("synth, train, eval, score and inspect end to end") {
  const fs::path dir = scratch("cli_flow");
  const std::string corpus = (dir / "corpus").string();
  const std::string out = (dir / "run").string();
  REQUIRE(run("synth -o " + corpus + " --train-count 4 --test-count 2 -n 1") == 0);
  REQUIRE(run("train --corpus " + corpus + " -o " + out + " --epochs 1 -n 1") == 0);
  CHECK(fs::exists(dir / "run" / "config.json"));
  CHECK(fs::exists(dir / "run" / "history.csv"));
  const std::string ckpt = (dir / "run" / "last.ckpt").string();
  REQUIRE(fs::exists(ckpt));

  const std::string report = (dir / "eval.json").string();
  CHECK(run("eval --checkpoint " + ckpt + " --corpus " + corpus + " -o " + report) == 0);
  std::ifstream in(report);
  const auto j = nlohmann::json::parse(in);
  CHECK(j.contains("auc"));
  CHECK(j.contains("roc"));

  const fs::path frames = dir / "frames";
  fs::create_directories(frames);
  for (int k = 0; k < 2; ++k)
    fs::copy_file(dir / "corpus" / "test" / ("test_00001_f" + std::to_string(k) + ".png"),
                  frames / (std::to_string(k) + ".png"));
  CHECK(run("score --checkpoint " + ckpt + " --frames " + frames.string()) == 0);
  CHECK(run("inspect --checkpoint " + ckpt + " --input " + frames.string() + " -o " + (dir / "maps").string()) == 0);
  CHECK(fs::exists(dir / "maps" / "maps.json"));
  CHECK(fs::exists(dir / "maps" / "spatial_map0.png"));
  CHECK(run("train --corpus " + corpus + " -o " + out + " --epochs 2 -n 1 --resume " + ckpt) == 0);
  fs::remove_all(dir);
}
