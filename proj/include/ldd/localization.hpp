#pragma once

#include <optional>

#include "ldd/detector.hpp"

namespace ldd::harness {

struct AttentionDiff {
  Grid diff;                    // image-sized mean |Δmap| over the m spatial maps
  std::optional<double> ratio;  // mean inside mask / mean outside; empty when undefined
};

/// Spatial-map difference between a tampered frame and its original,
/// localised against the tamper mask. The ratio is undefined when the diff
/// is identically zero, when the mask is empty or full, or when the diff
/// outside the mask is zero.
AttentionDiff attention_diff(const DetectorModel& model, const ImageTensor& original,
                             const ImageTensor& tampered, const Grid& mask);

/// The diff alone, each map upsampled to height × width before averaging.
Grid map_difference(const attention::AttentionMapSet& a, const attention::AttentionMapSet& b,
                    int height, int width);

std::optional<double> localization_ratio(const Grid& diff, const Grid& mask);

}  // namespace ldd::harness
