#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace ldd {

/// H×W×C image stored row-major with interleaved channels. Pixel values
/// live in [0,1]; motion residuals reuse the layout with values in [-1,1].
struct ImageTensor {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  ImageTensor() = default;
  ImageTensor(int h, int w, int c, double fill = 0.0);

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& at(int y, int x, int c) { return data[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data[index(y, x, c)]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(height) * width; }
  bool same_shape(const ImageTensor& other) const {
    return height == other.height && width == other.width && channels == other.channels;
  }
  bool operator==(const ImageTensor&) const = default;
};

/// Throws ValidationError unless dims are positive, C ∈ {1,3} and every
/// value is finite and inside [lo, hi].
void validate_image(const ImageTensor& image, double lo = 0.0, double hi = 1.0);

/// Backbone activations, C×h×w planar.
struct FeatureMaps {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  FeatureMaps() = default;
  FeatureMaps(int c, int h, int w, double fill = 0.0);

  std::size_t plane_size() const { return static_cast<std::size_t>(height) * width; }
  std::span<double> plane(int c) { return {data.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(int c) const {
    return {data.data() + c * plane_size(), plane_size()};
  }
  double& at(int c, int y, int x) { return data[c * plane_size() + static_cast<std::size_t>(y) * width + x]; }
  double at(int c, int y, int x) const {
    return data[c * plane_size() + static_cast<std::size_t>(y) * width + x];
  }
  bool same_shape(const FeatureMaps& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
  bool operator==(const FeatureMaps&) const = default;
};

FeatureMaps to_feature_maps(const ImageTensor& image);

/// Bilinear resize with half-pixel centers; an exact 2× reduction is a 2×2
/// box average.
ImageTensor resize_image(const ImageTensor& image, int height, int width);

/// rows×cols real map (attention grids, resized maps, diff maps).
struct Grid {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Grid() = default;
  Grid(int r, int c, double fill = 0.0) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, fill) {}
  double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const Grid&) const = default;
};

/// Dense learnable array.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> values;

  Tensor() = default;
  explicit Tensor(std::vector<int> dims, double fill = 0.0);

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  double* data() { return values.data(); }
  const double* data() const { return values.data(); }
  bool operator==(const Tensor&) const = default;
};

std::string shape_string(std::span<const int> shape);

/// Seeded generator; all randomness in the project flows through this.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }
  int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Stateless seed derivation (splitmix64 finalizer over the combined words).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

inline double sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace ldd
