#pragma once

#include <filesystem>

#include "ldd/training.hpp"

namespace ldd::checkpoint {

struct Checkpoint {
  harness::TrainState state;
  harness::TrainConfig train;
};

/// Binary layout: 8-byte magic, u64 header length, JSON header (model and
/// train config, completed epochs, parameter names and shapes), then the raw
/// float64 parameter values followed by the momentum buffers.
void save(const std::filesystem::path& path, const harness::TrainState& state,
          const harness::TrainConfig& train);
Checkpoint load(const std::filesystem::path& path);

}  // namespace ldd::checkpoint
