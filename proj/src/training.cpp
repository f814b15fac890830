#include "ldd/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "ldd/checkpoint.hpp"
#include "ldd/errors.hpp"
#include "ldd/image_io.hpp"

namespace ldd::harness {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must lie in [0,1)");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (maps < 1) throw ValidationError("m must be >= 1");
  if (frames < 1) throw ValidationError("n must be >= 1");
  if (heads < 1) throw ValidationError("K must be >= 1");
}

ModelConfig TrainConfig::apply(ModelConfig config) const {
  config.attention.maps = maps;
  config.attention.frames = frames;
  config.attention.heads = heads;
  return config;
}

Dataset load_split(const corpus::CorpusManifest& manifest, const fs::path& root, const std::string& split,
                   const ModelConfig& config) {
  const auto records = manifest.split(split);
  if (records.empty()) throw ValidationError("corpus split '" + split + "' is empty");
  const std::size_t needed = 1 + static_cast<std::size_t>(config.attention.frames);
  Dataset out;
  out.reserve(records.size());
  for (const auto* rec : records) {
    if (rec->frames.size() < needed) {
      throw ValidationError("sample " + rec->id + " stores " + std::to_string(rec->frames.size()) +
                            " frames, the model needs " + std::to_string(needed));
    }
    std::vector<ImageTensor> window;
    for (std::size_t k = 0; k < needed; ++k) window.push_back(io::read_png(root / rec->frames[k].path));
    out.push_back({rec->id, prepare_input(window, config), rec->label, rec->defect, rec->seed});
  }
  return out;
}

Dataset dataset_from_samples(const std::vector<datagen::SyntheticSample>& samples, const ModelConfig& config) {
  const std::size_t needed = 1 + static_cast<std::size_t>(config.attention.frames);
  Dataset out;
  for (const auto& s : samples) {
    if (s.frames.size() < needed) throw ValidationError("sample window shorter than 1 + n frames");
    const std::vector<ImageTensor> window(s.frames.begin(), s.frames.begin() + needed);
    out.push_back({std::to_string(s.seed), prepare_input(window, config), s.fake ? 1 : 0, s.defect, s.seed});
  }
  return out;
}

Metrics evaluate(const DetectorModel& model, const Dataset& data, Mode mode) {
  if (data.empty()) throw ValidationError("cannot evaluate an empty dataset");
  Metrics m;
  std::size_t correct = 0;
  double loss = 0.0;
  for (const auto& ex : data) {
    const auto r = full_forward(model, ex.input, mode);
    m.scores.push_back(r.fake_probability());
    m.labels.push_back(ex.label);
    correct += (r.logits[1] > r.logits[0] ? 1 : 0) == ex.label;
    loss += cross_entropy(r.logits, ex.label);
  }
  m.acc = static_cast<double>(correct) / data.size();
  m.loss = loss / data.size();
  const auto fakes = std::count(m.labels.begin(), m.labels.end(), 1);
  const bool both = fakes > 0 && fakes < static_cast<long>(data.size());
  m.auc = both ? metrics::auc(m.scores, m.labels) : std::numeric_limits<double>::quiet_NaN();
  if (both) m.roc = metrics::roc_curve(m.scores, m.labels);
  return m;
}

TrainState initial_state(const ModelConfig& model_config, const TrainConfig& cfg) {
  cfg.validate();
  TrainState s;
  s.model = DetectorModel::create(cfg.apply(model_config), derive_seed(cfg.seed, 0x1417));
  s.velocity = s.model.zeros_like();
  return s;
}

double sgd_step(TrainState& state, const Dataset& data, std::span<const std::size_t> batch,
                const TrainConfig& cfg) {
  if (batch.empty()) throw ValidationError("empty batch");
  DetectorModel grad = state.model.zeros_like();
  double loss = 0.0;
  for (std::size_t i : batch) loss += accumulate_gradient(state.model, data.at(i).input, data[i].label, cfg.mode, grad);
  const double scale = 1.0 / static_cast<double>(batch.size());
  auto params = state.model.named_parameters();
  auto velocity = state.velocity.named_parameters();
  auto grads = grad.named_parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!parameter_in_mode(params[p].first, cfg.mode)) continue;
    auto& value = params[p].second->values;
    auto& v = velocity[p].second->values;
    const auto& g = grads[p].second->values;
    for (std::size_t i = 0; i < value.size(); ++i) {
      v[i] = cfg.momentum * v[i] + g[i] * scale;
      value[i] -= cfg.learning_rate * v[i];
    }
  }
  return loss * scale;
}

namespace {

fs::path epoch_path(const fs::path& dir, int epoch) {
  std::ostringstream name;
  name << "epoch_" << std::setw(3) << std::setfill('0') << epoch << ".ckpt";
  return dir / name.str();
}

}  // namespace

std::vector<EpochRecord> train(TrainState& state, const Dataset& data, const TrainConfig& cfg,
                               const TrainOptions& options) {
  cfg.validate();
  if (data.empty()) throw ValidationError("training set is empty");
  const auto fakes = std::count_if(data.begin(), data.end(), [](const Example& e) { return e.label == 1; });
  if (fakes == 0 || fakes == static_cast<long>(data.size())) {
    throw ValidationError("training set must contain both real and fake samples");
  }
  std::vector<EpochRecord> history;
  std::vector<std::size_t> order(data.size());
  while (state.epoch < cfg.epochs) {
    const TrainState last_finite = state;
    const int epoch = state.epoch + 1;
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(cfg.seed, 0x5000 + static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng.engine());
    double total = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
        const std::size_t end = std::min(order.size(), start + cfg.batch_size);
        const double loss = sgd_step(state, data, std::span(order).subspan(start, end - start), cfg);
        if (!std::isfinite(loss)) throw NumericalError("non-finite training loss");
        total += loss * static_cast<double>(end - start);
      }
    } catch (const NumericalError& e) {
      state = last_finite;
      if (options.checkpoint_dir) checkpoint::save(*options.checkpoint_dir / "last.ckpt", state, cfg);
      throw NumericalError(std::string(e.what()) + " in epoch " + std::to_string(epoch) +
                           "; restored the state after epoch " + std::to_string(state.epoch));
    }
    state.epoch = epoch;
    EpochRecord rec{epoch, total / static_cast<double>(data.size()), std::numeric_limits<double>::quiet_NaN(),
                    std::numeric_limits<double>::quiet_NaN()};
    if (options.eval_data) {
      const Metrics m = evaluate(state.model, *options.eval_data, cfg.mode);
      rec.acc = m.acc;
      rec.auc = m.auc;
    }
    if (options.checkpoint_dir) {
      checkpoint::save(epoch_path(*options.checkpoint_dir, epoch), state, cfg);
      checkpoint::save(*options.checkpoint_dir / "last.ckpt", state, cfg);
    }
    history.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return history;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os << "epoch,loss,acc,auc\n" << std::setprecision(10);
  for (const auto& r : history) os << r.epoch << ',' << r.loss << ',' << r.acc << ',' << r.auc << '\n';
  return os.str();
}

}  // namespace ldd::harness
