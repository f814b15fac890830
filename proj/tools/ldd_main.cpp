#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ldd/ablation.hpp"
#include "ldd/checkpoint.hpp"
#include "ldd/corpus.hpp"
#include "ldd/errors.hpp"
#include "ldd/gradcheck.hpp"
#include "ldd/image_io.hpp"
#include "ldd/run_config.hpp"
#include "ldd/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ldd;

namespace {

constexpr int kUsage = 1;
constexpr int kValidation = 2;
constexpr int kNumerical = 3;

// Command-line values that override config-file keys when given.
struct Overrides {
  std::string config_path;
  std::optional<int> train_count, test_count, data_frames, frames, epochs, batch, maps, heads;
  std::optional<std::uint64_t> seed, data_seed;
  std::optional<double> lr;
  std::optional<std::string> mode;
};

void add_config_option(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_path, "JSON run configuration (default: $LDD_CONFIG)");
}

void add_train_overrides(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--mode", o.mode, "backbone-only, spatial, temporal or spatial-temporal");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--batch", o.batch, "batch size");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--seed", o.seed, "training seed");
  cmd->add_option("-m,--maps", o.maps, "attention maps m");
  cmd->add_option("-n,--frames", o.frames, "following frames n");
  cmd->add_option("-K,--heads", o.heads, "attention heads K");
}

RunConfig resolve_config(const Overrides& o) {
  std::string path = o.config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("LDD_CONFIG")) path = env;
  }
  RunConfig rc = path.empty() ? RunConfig{} : load_run_config(path);
  if (o.train_count) rc.data.train_count = *o.train_count;
  if (o.test_count) rc.data.test_count = *o.test_count;
  if (o.data_seed) rc.data.seed = *o.data_seed;
  if (o.data_frames) {
    rc.data.frames = *o.data_frames;
    rc.train.frames = std::min(rc.train.frames, rc.data.frames);
  }
  if (o.epochs) rc.train.epochs = *o.epochs;
  if (o.batch) rc.train.batch_size = *o.batch;
  if (o.lr) rc.train.learning_rate = *o.lr;
  if (o.seed) rc.train.seed = *o.seed;
  if (o.maps) rc.train.maps = *o.maps;
  if (o.heads) rc.train.heads = *o.heads;
  if (o.mode) rc.train.mode = mode_from_string(*o.mode);
  if (o.frames) {
    rc.train.frames = *o.frames;
    rc.data.frames = std::max(rc.data.frames, *o.frames);
  }
  rc.validate();
  return rc;
}

void echo_config(const fs::path& dir, const json& config) {
  fs::create_directories(dir);
  io::write_file_atomic(dir / "config.json", config.dump(2) + "\n");
}

std::string fixed(double v, int digits = 4) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

json metrics_json(const harness::Metrics& m) {
  json roc = json::array();
  for (const auto& p : m.roc) {
    roc.push_back({{"fpr", p.fpr},
                   {"tpr", p.tpr},
                   {"threshold", std::isfinite(p.threshold) ? json(p.threshold) : json("inf")}});
  }
  return {{"acc", m.acc}, {"auc", m.auc}, {"loss", m.loss}, {"roc", roc}};
}

int cmd_synth(const Overrides& o, const fs::path& out) {
  const RunConfig rc = resolve_config(o);
  const auto manifest = corpus::build_corpus(rc.data, out);
  echo_config(out, run_config_to_json(rc));
  std::cout << "corpus: " << (out / "manifest.json").string() << "\n"
            << "samples: " << manifest.samples.size() << "\n"
            << "digest: " << manifest.digest << "\n";
  return 0;
}

int cmd_train(const Overrides& o, const fs::path& corpus_dir, const fs::path& out,
              const std::string& resume) {
  RunConfig rc = resolve_config(o);
  harness::TrainState state;
  if (!resume.empty()) {
    auto ck = checkpoint::load(resume);
    rc.model = ck.state.model.config;
    state = std::move(ck.state);
    if (!o.mode) rc.train.mode = ck.train.mode;
    rc.train.maps = rc.model.attention.maps;
    rc.train.frames = rc.model.attention.frames;
    rc.train.heads = rc.model.attention.heads;
    rc.validate();
  }
  const ModelConfig mc = rc.effective_model();
  if (resume.empty()) state = harness::initial_state(mc, rc.train);
  const auto manifest = corpus::load_corpus(corpus_dir);
  const auto train_set = harness::load_split(manifest, corpus_dir, "train", mc);
  const auto test_set = harness::load_split(manifest, corpus_dir, "test", mc);

  json echo = run_config_to_json(rc);
  echo["corpus"] = {{"path", corpus_dir.string()}, {"digest", manifest.digest}};
  echo_config(out, echo);

  harness::TrainOptions options;
  options.checkpoint_dir = out;
  options.eval_data = &test_set;
  options.on_epoch = [](const harness::EpochRecord& r) {
    std::cout << "epoch " << r.epoch << "  loss " << fixed(r.loss) << "  acc " << fixed(r.acc) << "  auc "
              << fixed(r.auc) << std::endl;
  };
  std::vector<harness::EpochRecord> history;
  const fs::path history_path = out / "history.csv";
  if (!resume.empty() && fs::exists(history_path)) {
    std::ifstream in(history_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::istringstream row(line);
      harness::EpochRecord r;
      char comma;
      if (row >> r.epoch >> comma >> r.loss >> comma >> r.acc >> comma >> r.auc && r.epoch <= state.epoch) {
        history.push_back(r);
      }
    }
  }
  const auto fresh = harness::train(state, train_set, rc.train, options);
  history.insert(history.end(), fresh.begin(), fresh.end());
  io::write_file_atomic(history_path, harness::history_csv(history));
  std::cout << "checkpoint: " << (out / "last.ckpt").string() << "\n";
  return 0;
}

int cmd_eval(const fs::path& ckpt, const fs::path& corpus_dir, const std::string& split,
             const std::string& out) {
  const auto ck = checkpoint::load(ckpt);
  const auto manifest = corpus::load_corpus(corpus_dir);
  const auto data = harness::load_split(manifest, corpus_dir, split, ck.state.model.config);
  const auto m = harness::evaluate(ck.state.model, data, ck.train.mode);
  std::cout << "split: " << split << " (" << data.size() << " samples)\n"
            << "mode: " << to_string(ck.train.mode) << "\n"
            << "acc: " << fixed(m.acc) << "\n"
            << "auc: " << fixed(m.auc) << "\n"
            << "roc:";
  for (const auto& p : m.roc) std::cout << " (" << fixed(p.fpr, 3) << "," << fixed(p.tpr, 3) << ")";
  std::cout << "\n";
  if (!out.empty()) {
    json report = metrics_json(m);
    report["split"] = split;
    report["checkpoint"] = ckpt.string();
    report["config"] = {{"model", model_config_to_json(ck.state.model.config)},
                        {"train", train_config_to_json(ck.train)}};
    io::write_file_atomic(out, report.dump(2) + "\n");
  }
  return 0;
}

int cmd_score(const fs::path& ckpt, const fs::path& folder) {
  const auto ck = checkpoint::load(ckpt);
  const ModelConfig& mc = ck.state.model.config;
  const auto frames = corpus::load_frame_folder(folder, mc);
  const bool temporal = uses_temporal(ck.train.mode);
  const std::size_t span = temporal ? 1 + static_cast<std::size_t>(mc.attention.frames) : 1;
  if (frames.files.size() < span) {
    throw ValidationError(folder.string() + " holds " + std::to_string(frames.files.size()) +
                          " frames, a window needs " + std::to_string(span));
  }
  double total = 0.0;
  const std::size_t windows = frames.files.size() - span + 1;
  for (std::size_t w = 0; w < windows; ++w) {
    ModelInput input;
    input.frame = frames.backbone_frames[w];
    input.attention_frame = frames.attention_frames[w];
    for (std::size_t k = 1; k < span; ++k) input.next_frames.push_back(frames.attention_frames[w + k]);
    const double p = full_forward(ck.state.model, input, ck.train.mode).fake_probability();
    std::cout << "window " << w << " (" << frames.files[w].filename().string() << "): " << fixed(p) << "\n";
    total += p;
  }
  const double verdict = total / windows;
  std::cout << "fake_probability: " << fixed(verdict) << "\n"
            << "verdict: " << (verdict > 0.5 ? "fake" : "real") << "\n";
  return 0;
}

// Overlay: the frame darkened where the map is low, so emphasised regions stay bright.
ImageTensor overlay(const ImageTensor& image, const Grid& map) {
  const Grid m = attention::resize_map(map, image.height, image.width);
  ImageTensor out = image;
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c) out.at(y, x, c) *= 0.25 + 0.75 * m.at(y, x);
  return out;
}

json export_maps(const attention::AttentionMapSet& maps, const std::string& kind, const ImageTensor& image,
                 const fs::path& out) {
  json list = json::array();
  for (int j = 0; j < maps.count(); ++j) {
    const std::string stem = kind + "_map" + std::to_string(j);
    io::write_map_png(out / (stem + ".png"), maps.maps[j]);
    io::write_png(out / (stem + "_overlay.png"), overlay(image, maps.maps[j]));
    const auto [lo, hi] = std::minmax_element(maps.maps[j].values.begin(), maps.maps[j].values.end());
    list.push_back({{"file", stem + ".png"}, {"overlay", stem + "_overlay.png"}, {"min", *lo}, {"max", *hi}});
  }
  return list;
}

int cmd_inspect(const fs::path& ckpt, const fs::path& input_path, const fs::path& out) {
  const auto ck = checkpoint::load(ckpt);
  const DetectorModel& model = ck.state.model;
  const ModelConfig& mc = model.config;
  std::vector<ImageTensor> originals;
  if (fs::is_directory(input_path)) {
    const auto frames = corpus::load_frame_folder(input_path, mc);
    const std::size_t span = std::min(frames.files.size(), 1 + static_cast<std::size_t>(mc.attention.frames));
    for (std::size_t k = 0; k < span; ++k) originals.push_back(io::load_image(frames.files[k]));
  } else {
    originals.push_back(io::load_image(input_path));
  }
  const ImageTensor& image = originals.front();
  fs::create_directories(out);
  json manifest = {{"input", input_path.string()},
                   {"grid", {mc.attention.grid(), mc.attention.grid()}},
                   {"m", mc.attention.maps},
                   {"pixel_scale", "map value in (0,1) times 255, rounded"}};
  const int a = mc.attention.input_size;
  manifest["spatial"] = export_maps(spatial_maps(model, resize_image(image, a, a)), "spatial", image, out);
  if (originals.size() == 1 + static_cast<std::size_t>(mc.attention.frames)) {
    const ModelInput in = prepare_input(originals, mc);
    const auto r = full_forward(model, in, Mode::Temporal);
    manifest["temporal"] = export_maps(*r.temporal_maps, "temporal", image, out);
  } else {
    manifest["temporal"] = json::array();
  }
  manifest["config"] = {{"model", model_config_to_json(mc)}, {"train", train_config_to_json(ck.train)}};
  io::write_file_atomic(out / "maps.json", manifest.dump(2) + "\n");
  std::cout << "maps: " << (out / "maps.json").string() << "\n";
  return 0;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      seeds.push_back(std::stoull(item));
    } catch (const std::exception&) {
      throw ValidationError("bad seed '" + item + "' in --seeds");
    }
  }
  if (seeds.empty()) throw ValidationError("--seeds is empty");
  return seeds;
}

int cmd_ablate(const Overrides& o, const fs::path& corpus_dir, const std::string& sweep_name,
               const std::string& seed_list, const fs::path& out) {
  const RunConfig rc = resolve_config(o);
  const auto sweep = harness::sweep_from_string(sweep_name);
  const auto seeds = parse_seeds(seed_list);
  const auto manifest = corpus::load_corpus(corpus_dir);
  json echo = run_config_to_json(rc);
  echo["ablation"] = {{"sweep", sweep_name}, {"seeds", seeds}, {"corpus", manifest.digest}};
  echo_config(out, echo);
  const auto report = harness::ablation_run(
      rc.model, rc.train, sweep, seeds,
      [&](const ModelConfig& mc) {
        return std::make_pair(harness::load_split(manifest, corpus_dir, "train", mc),
                              harness::load_split(manifest, corpus_dir, "test", mc));
      },
      [](const std::string& line) { std::cout << line << std::endl; });
  io::write_file_atomic(out / "ablation.json", report.to_json());
  io::write_file_atomic(out / "ablation.txt", report.to_table());
  std::cout << report.to_table();
  return 0;
}

int cmd_gradcheck(const std::string& preset, const std::string& mode_name, std::uint64_t seed,
                  double tolerance, const std::string& corrupt, const std::string& out) {
  ModelConfig mc = preset_by_name(preset);
  const Mode mode = mode_from_string(mode_name);
  DetectorModel model = DetectorModel::create(mc, seed);
  harness::DetectorGradcheckOptions options;
  options.corrupt_parameter = corrupt;
  const auto report = harness::gradcheck_detector(model, mode, 1, seed, options);
  json params = json::array();
  for (const auto& p : report.parameters) {
    std::cout << std::left << std::setw(28) << p.name << " " << std::scientific << std::setprecision(3)
              << p.max_rel_error << "\n";
    params.push_back({{"name", p.name}, {"max_rel_error", p.max_rel_error}});
  }
  const bool pass = report.max_rel_error < tolerance;
  std::cout << "worst: " << report.worst_parameter << " " << std::scientific << report.max_rel_error
            << " (tolerance " << tolerance << ") " << (pass ? "PASS" : "FAIL") << "\n";
  if (!out.empty()) {
    json j = {{"preset", preset},   {"mode", mode_name},        {"seed", seed},
              {"tolerance", tolerance}, {"max_rel_error", report.max_rel_error},
              {"worst", report.worst_parameter}, {"parameters", params}, {"pass", pass},
              {"model", model_config_to_json(mc)}};
    io::write_file_atomic(out, j.dump(2) + "\n");
  }
  return pass ? 0 : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Long-distance attention deepfake detector (desk scale)"};
  app.require_subcommand(1);
  Overrides o;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
  fs::path synth_out;
  add_config_option(synth, o);
  synth->add_option("-o,--out", synth_out, "corpus directory")->required();
  synth->add_option("--train-count", o.train_count, "training samples");
  synth->add_option("--test-count", o.test_count, "test samples");
  synth->add_option("--seed", o.data_seed, "corpus seed");
  synth->add_option("-n,--frames", o.data_frames, "following frames stored per sample");

  auto* train = app.add_subcommand("train", "Train a detector on a corpus");
  fs::path train_corpus, train_out;
  std::string resume;
  add_config_option(train, o);
  train->add_option("--corpus", train_corpus, "corpus directory")->required();
  train->add_option("-o,--out", train_out, "output directory")->required();
  train->add_option("--resume", resume, "checkpoint to continue from");
  add_train_overrides(train, o);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a corpus split");
  fs::path eval_ckpt, eval_corpus;
  std::string eval_split = "test", eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--corpus", eval_corpus, "corpus directory")->required();
  eval->add_option("--split", eval_split, "train or test")->check(CLI::IsMember({"train", "test"}));
  eval->add_option("-o,--out", eval_out, "JSON report path");

  auto* score = app.add_subcommand("score", "Score a folder of face frames");
  fs::path score_ckpt, score_folder;
  score->add_option("--checkpoint", score_ckpt, "checkpoint file")->required();
  score->add_option("--frames", score_folder, "folder of pre-cropped face frames")->required();

  auto* inspect = app.add_subcommand("inspect", "Export attention maps for an image or frame folder");
  fs::path inspect_ckpt, inspect_input, inspect_out;
  inspect->add_option("--checkpoint", inspect_ckpt, "checkpoint file")->required();
  inspect->add_option("--input", inspect_input, "image file or frame folder")->required();
  inspect->add_option("-o,--out", inspect_out, "output directory")->required();

  auto* ablate = app.add_subcommand("ablate", "Run a mode, m or n ablation sweep");
  fs::path ablate_corpus, ablate_out;
  std::string sweep = "mode", seeds = "1,2,3";
  add_config_option(ablate, o);
  ablate->add_option("--corpus", ablate_corpus, "corpus directory")->required();
  ablate->add_option("-o,--out", ablate_out, "output directory")->required();
  ablate->add_option("--sweep", sweep, "mode, m or n")->check(CLI::IsMember({"mode", "m", "n"}));
  ablate->add_option("--seeds", seeds, "comma-separated training seeds");
  add_train_overrides(ablate, o);

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  std::string gc_preset = "micro", gc_mode = "spatial-temporal", corrupt, gc_out;
  std::uint64_t gc_seed = 1;
  double tolerance = 1e-3;
  gradcheck->add_option("--preset", gc_preset, "micro, desk or paper");
  gradcheck->add_option("--mode", gc_mode, "detector mode");
  gradcheck->add_option("--seed", gc_seed, "model and input seed");
  gradcheck->add_option("--tolerance", tolerance, "maximum relative error");
  gradcheck->add_option("--corrupt", corrupt, "test hook: scale this parameter's gradient");
  gradcheck->add_option("-o,--out", gc_out, "JSON report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*synth) return cmd_synth(o, synth_out);
    if (*train) return cmd_train(o, train_corpus, train_out, resume);
    if (*eval) return cmd_eval(eval_ckpt, eval_corpus, eval_split, eval_out);
    if (*score) return cmd_score(score_ckpt, score_folder);
    if (*inspect) return cmd_inspect(inspect_ckpt, inspect_input, inspect_out);
    if (*ablate) return cmd_ablate(o, ablate_corpus, sweep, seeds, ablate_out);
    if (*gradcheck) return cmd_gradcheck(gc_preset, gc_mode, gc_seed, tolerance, corrupt, gc_out);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kNumerical;
  } catch (const ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kValidation;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kValidation;
  }
  return kUsage;
}
