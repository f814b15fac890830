#include "ldd/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "ldd/errors.hpp"
#include "ldd/image_io.hpp"
#include "ldd/run_config.hpp"

namespace ldd::checkpoint {

using nlohmann::json;

namespace {

constexpr char kMagic[8] = {'L', 'D', 'D', 'C', 'K', 'P', 'T', '1'};

void append_values(std::string& out, const Tensor& t) {
  const auto* p = reinterpret_cast<const char*>(t.data());
  out.append(p, t.size() * sizeof(double));
}

}  // namespace

void save(const std::filesystem::path& path, const harness::TrainState& state,
          const harness::TrainConfig& train) {
  const auto params = state.model.named_parameters();
  const auto velocity = state.velocity.named_parameters();
  json names = json::array();
  for (const auto& [name, t] : params) names.push_back({{"name", name}, {"shape", t->shape}});
  const json header = {{"model", model_config_to_json(state.model.config)},
                       {"train", train_config_to_json(train)},
                       {"epoch", state.epoch},
                       {"parameters", names}};
  const std::string text = header.dump();
  std::string out(kMagic, sizeof kMagic);
  const std::uint64_t len = text.size();
  out.append(reinterpret_cast<const char*>(&len), sizeof len);
  out += text;
  for (const auto& [name, t] : params) append_values(out, *t);
  for (const auto& [name, t] : velocity) append_values(out, *t);
  io::write_file_atomic(path, out);
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ValidationError(path.string() + " is not a checkpoint");
  }
  std::uint64_t len = 0;
  std::memcpy(&len, bytes.data() + 8, sizeof len);
  if (bytes.size() < 16 + len) throw ValidationError("truncated checkpoint " + path.string());
  json header;
  try {
    header = json::parse(bytes.substr(16, len));
  } catch (const json::exception& e) {
    throw ValidationError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
  Checkpoint ck;
  ck.train = train_config_from_json(header.at("train"));
  const ModelConfig config = model_config_from_json(header.at("model"));
  ck.state.model = DetectorModel::create(config, 0);
  ck.state.velocity = ck.state.model.zeros_like();
  ck.state.epoch = header.at("epoch").get<int>();
  auto params = ck.state.model.named_parameters();
  auto velocity = ck.state.velocity.named_parameters();
  const auto& names = header.at("parameters");
  if (names.size() != params.size()) throw ValidationError("checkpoint parameter list does not match its config");
  std::size_t offset = 16 + len;
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (names[i].at("name").get<std::string>() != params[i].first ||
        names[i].at("shape").get<std::vector<int>>() != params[i].second->shape) {
      throw ValidationError("checkpoint parameter '" + params[i].first + "' does not match its config");
    }
    total += params[i].second->size();
  }
  if (bytes.size() != offset + 2 * total * sizeof(double)) {
    throw ValidationError("checkpoint " + path.string() + " has the wrong payload size");
  }
  for (auto* list : {&params, &velocity})
    for (auto& [name, t] : *list) {
      std::memcpy(t->data(), bytes.data() + offset, t->size() * sizeof(double));
      offset += t->size() * sizeof(double);
    }
  return ck;
}

}  // namespace ldd::checkpoint
