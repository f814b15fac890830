#include "ldd/ablation.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <map>
#include <sstream>

#include "json.hpp"
#include "ldd/errors.hpp"

namespace ldd::harness {

using nlohmann::json;

std::string to_string(Sweep sweep) {
  switch (sweep) {
    case Sweep::Modes: return "mode";
    case Sweep::Maps: return "m";
    case Sweep::Frames: return "n";
  }
  return "?";
}

Sweep sweep_from_string(const std::string& s) {
  if (s == "mode") return Sweep::Modes;
  if (s == "m") return Sweep::Maps;
  if (s == "n") return Sweep::Frames;
  throw ValidationError("unknown sweep '" + s + "' (expected mode, m or n)");
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

std::vector<TrainConfig> sweep_variants(const TrainConfig& base, Sweep sweep) {
  std::vector<TrainConfig> out;
  switch (sweep) {
    case Sweep::Modes:
      for (Mode m : {Mode::BackboneOnly, Mode::Spatial, Mode::Temporal, Mode::SpatialTemporal}) {
        TrainConfig c = base;
        c.mode = m;
        out.push_back(c);
      }
      break;
    case Sweep::Maps:
      for (int m = 1; m <= 5; ++m) {
        TrainConfig c = base;
        c.maps = m;
        out.push_back(c);
      }
      break;
    case Sweep::Frames:
      for (int n = 2; n <= 5; ++n) {
        TrainConfig c = base;
        c.frames = n;
        out.push_back(c);
      }
      break;
  }
  return out;
}

namespace {

std::string variant_name(const TrainConfig& c, Sweep sweep) {
  switch (sweep) {
    case Sweep::Modes: return to_string(c.mode);
    case Sweep::Maps: return "m=" + std::to_string(c.maps);
    case Sweep::Frames: return "n=" + std::to_string(c.frames);
  }
  return "?";
}

}  // namespace

AblationReport ablation_run(const ModelConfig& model, const TrainConfig& base, Sweep sweep,
                            const std::vector<std::uint64_t>& seeds, const DataSource& data,
                            const std::function<void(const std::string&)>& progress) {
  if (seeds.empty()) throw ValidationError("ablation needs at least one seed");
  base.validate();
  AblationReport report;
  report.sweep = sweep;
  std::map<int, std::pair<Dataset, Dataset>> cache;  // keyed by n
  for (const TrainConfig& variant : sweep_variants(base, sweep)) {
    const ModelConfig mc = variant.apply(model);
    mc.validate();
    auto it = cache.find(variant.frames);
    if (it == cache.end()) it = cache.emplace(variant.frames, data(mc)).first;
    const auto& [train_set, test_set] = it->second;

    AblationRow row;
    row.variant = variant_name(variant, sweep);
    row.mode = variant.mode;
    row.maps = variant.maps;
    row.frames = variant.frames;
    const auto start = std::chrono::steady_clock::now();
    for (std::uint64_t seed : seeds) {
      TrainConfig cfg = variant;
      cfg.seed = seed;
      TrainState state = initial_state(mc, cfg);
      train(state, train_set, cfg);
      const Metrics m = evaluate(state.model, test_set, cfg.mode);
      row.seeds.push_back(seed);
      row.acc.push_back(m.acc);
      row.auc.push_back(m.auc);
      if (progress) {
        std::ostringstream os;
        os << row.variant << " seed " << seed << ": acc " << std::fixed << std::setprecision(4) << m.acc
           << " auc " << m.auc;
        progress(os.str());
      }
    }
    row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    row.median_acc = median(row.acc);
    row.median_auc = median(row.auc);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string AblationReport::to_json() const {
  json rows_json = json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"variant", r.variant},
                         {"mode", ldd::to_string(r.mode)},
                         {"m", r.maps},
                         {"n", r.frames},
                         {"seeds", r.seeds},
                         {"acc", r.acc},
                         {"auc", r.auc},
                         {"median_acc", r.median_acc},
                         {"median_auc", r.median_auc},
                         {"seconds", r.seconds}});
  }
  return json{{"sweep", to_string(sweep)}, {"rows", rows_json}}.dump(2) + "\n";
}

std::string AblationReport::to_table() const {
  std::size_t width = std::string("variant").size();
  for (const auto& r : rows) width = std::max(width, r.variant.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(width)) << "variant" << "  " << std::right << std::setw(8)
     << "ACC" << "  " << std::setw(8) << "AUC" << "  per-seed AUC\n";
  os << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    os << std::left << std::setw(static_cast<int>(width)) << r.variant << "  " << std::right << std::setw(8)
       << r.median_acc << "  " << std::setw(8) << r.median_auc << " ";
    for (double a : r.auc) os << ' ' << a;
    os << '\n';
  }
  return os.str();
}

}  // namespace ldd::harness
