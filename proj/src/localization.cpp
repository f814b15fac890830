#include "ldd/localization.hpp"

#include <cmath>

#include "ldd/errors.hpp"

namespace ldd::harness {

Grid map_difference(const attention::AttentionMapSet& a, const attention::AttentionMapSet& b,
                    int height, int width) {
  if (a.count() != b.count() || a.rows() != b.rows() || a.cols() != b.cols() || a.count() == 0) {
    throw ValidationError("attention map sets differ in shape");
  }
  Grid diff(height, width);
  for (int j = 0; j < a.count(); ++j) {
    const Grid ra = attention::resize_map(a.maps[j], height, width);
    const Grid rb = attention::resize_map(b.maps[j], height, width);
    for (std::size_t i = 0; i < diff.values.size(); ++i) diff.values[i] += std::abs(ra.values[i] - rb.values[i]);
  }
  for (double& v : diff.values) v /= a.count();
  return diff;
}

std::optional<double> localization_ratio(const Grid& diff, const Grid& mask) {
  if (diff.rows != mask.rows || diff.cols != mask.cols) {
    throw ValidationError("diff and mask sizes differ");
  }
  double inside = 0.0, outside = 0.0;
  std::size_t n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < diff.values.size(); ++i) {
    if (mask.values[i] > 0.5) {
      inside += diff.values[i];
      ++n_in;
    } else {
      outside += diff.values[i];
      ++n_out;
    }
  }
  if (n_in == 0 || n_out == 0 || outside == 0.0) return std::nullopt;
  return (inside / n_in) / (outside / n_out);
}

AttentionDiff attention_diff(const DetectorModel& model, const ImageTensor& original,
                             const ImageTensor& tampered, const Grid& mask) {
  if (!original.same_shape(tampered)) throw ValidationError("original and tampered frames differ in shape");
  if (mask.rows != original.height || mask.cols != original.width) {
    throw ValidationError("mask size does not match the frame");
  }
  const int a = model.config.attention.input_size;
  const auto before = spatial_maps(model, resize_image(original, a, a));
  const auto after = spatial_maps(model, resize_image(tampered, a, a));
  AttentionDiff out;
  out.diff = map_difference(before, after, original.height, original.width);
  out.ratio = localization_ratio(out.diff, mask);
  return out;
}

}  // namespace ldd::harness
