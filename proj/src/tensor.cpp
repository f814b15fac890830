#include "ldd/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>
#include <sstream>

#include "ldd/errors.hpp"

namespace ldd {

ImageTensor::ImageTensor(int h, int w, int c, double fill)
    : height(h), width(w), channels(c),
      data(static_cast<std::size_t>(h) * w * c, fill) {}

void validate_image(const ImageTensor& image, double lo, double hi) {
  if (image.height < 1 || image.width < 1) {
    throw ValidationError("image must be at least 1x1, got " + std::to_string(image.height) +
                          "x" + std::to_string(image.width));
  }
  if (image.channels != 1 && image.channels != 3) {
    throw ValidationError("image channels must be 1 or 3, got " +
                          std::to_string(image.channels));
  }
  if (image.data.size() != image.pixel_count() * image.channels) {
    throw ValidationError("image buffer size does not match its dimensions");
  }
  for (double v : image.data) {
    if (!std::isfinite(v) || v < lo || v > hi) {
      std::ostringstream msg;
      msg << "image value " << v << " outside [" << lo << ", " << hi << "]";
      throw ValidationError(msg.str());
    }
  }
}

FeatureMaps::FeatureMaps(int c, int h, int w, double fill)
    : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

FeatureMaps to_feature_maps(const ImageTensor& image) {
  FeatureMaps out(image.channels, image.height, image.width);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      for (int c = 0; c < image.channels; ++c) out.at(c, y, x) = image.at(y, x, c);
  return out;
}

ImageTensor resize_image(const ImageTensor& image, int height, int width) {
  if (height < 1 || width < 1) throw ValidationError("resize target must be at least 1x1");
  if (height == image.height && width == image.width) return image;
  auto taps = [](int in, int out) {
    std::vector<std::pair<int, double>> t(out);
    const double scale = static_cast<double>(in) / out;
    for (int o = 0; o < out; ++o) {
      const double src = std::clamp((o + 0.5) * scale - 0.5, 0.0, static_cast<double>(in - 1));
      const int lo = static_cast<int>(std::floor(src));
      t[o] = {lo, src - lo};
    }
    return t;
  };
  const auto rt = taps(image.height, height);
  const auto ct = taps(image.width, width);
  ImageTensor out(height, width, image.channels);
  for (int y = 0; y < height; ++y) {
    const int y0 = rt[y].first;
    const int y1 = std::min(y0 + 1, image.height - 1);
    for (int x = 0; x < width; ++x) {
      const int x0 = ct[x].first;
      const int x1 = std::min(x0 + 1, image.width - 1);
      for (int c = 0; c < image.channels; ++c) {
        const double top = std::lerp(image.at(y0, x0, c), image.at(y0, x1, c), ct[x].second);
        const double bottom = std::lerp(image.at(y1, x0, c), image.at(y1, x1, c), ct[x].second);
        out.at(y, x, c) = std::lerp(top, bottom, rt[y].second);
      }
    }
  }
  return out;
}

Tensor::Tensor(std::vector<int> dims, double fill) : shape(std::move(dims)) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  values.assign(n, fill);
}

std::string shape_string(std::span<const int> shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace ldd
