#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ldd/tensor.hpp"

namespace ldd::datagen {

enum class DefectKind { None, Blur, Recolor, Warp, Checkerboard, Jitter };

std::string to_string(DefectKind kind);
DefectKind defect_from_string(const std::string& s);

/// Axis-aligned rectangle or ellipse given by center and half extents, in
/// pixel coordinates where pixel (x, y) has center (x + 0.5, y + 0.5).
struct Region {
  enum class Shape { Rect, Ellipse };
  Shape shape = Shape::Rect;
  double cx = 0, cy = 0;
  double hx = 0, hy = 0;

  bool contains_pixel(int x, int y) const;
  Region shifted(double dx, double dy) const;
  bool inside_image(int height, int width) const;
};

/// Binary H×W mask of a region (1 inside).
Grid region_mask(const Region& region, int height, int width);

struct FaceGeometry {
  Region face;
  Region left_eye;   // iris disc
  Region right_eye;  // iris disc
  Region mouth;      // lips bounding rectangle
  Region cheek;      // a textured skin patch
};

/// Documented ranges of every generator magnitude. All injector strengths
/// are desk defaults rather than measured values.
struct GeneratorConfig {
  int image_size = 128;
  double blur_sigma = 2.0;
  double warp_amplitude = 5.0;   // px
  double warp_wavelength = 12.0; // px
  double checkerboard_amplitude = 0.25;
  double jitter_amplitude = 3.5;  // px, per-frame mouth displacement bound
  double motion_speed_min = 0.1;  // px/frame, smooth face path
  double motion_speed_max = 0.25;
};

struct BaseFace {
  ImageTensor image;
  FaceGeometry geometry;
};

/// Procedural face, 8-bit quantized, deterministic per seed: textured
/// background and skin, two eyes with matching irises, eyebrows and a mouth
/// at randomized positions and colors.
BaseFace gen_base_face(std::uint64_t seed, const GeneratorConfig& config = {});

/// Image or frame window with its label, tamper masks (one per frame) and
/// defect kind. Real samples carry all-zero masks.
struct SyntheticSample {
  std::vector<ImageTensor> frames;
  std::vector<Grid> masks;
  bool fake = false;
  DefectKind defect = DefectKind::None;
  std::uint64_t seed = 0;

  const ImageTensor& image() const { return frames.front(); }
  const Grid& mask() const { return masks.front(); }
};

/// Gaussian blur (σ > 0) applied only inside the region.
SyntheticSample inject_blur(const ImageTensor& image, const Region& region, double sigma);
/// Replaces the eye region's hue with saturated red, keeping its shading.
SyntheticSample inject_recolor(const ImageTensor& image, const Region& eye);
/// Vertical sinusoidal displacement tapered to zero at the region border.
SyntheticSample inject_warp(const ImageTensor& image, const Region& mouth, double amplitude,
                            double wavelength);
/// Additive ±amplitude pattern of 2×2-pixel cells anchored to the image grid.
SyntheticSample inject_checkerboard(const ImageTensor& image, const Region& region,
                                    double amplitude);

/// Displacement (dy) applied by inject_warp at a pixel; zero outside the region.
double warp_displacement(const Region& mouth, double amplitude, double wavelength, int x, int y);

/// 1 + n frames of a face moving along a smooth sub-pixel path. Fake windows
/// show the mouth region pasted back with a fresh random offset in every frame.
SyntheticSample gen_video_window(std::uint64_t seed, int n, bool fake,
                                 const GeneratorConfig& config = {});

/// Corpus sample: a smooth-motion window with `kind` injected into every
/// frame (kind None gives a real window, Jitter a jittered one).
SyntheticSample gen_sample(std::uint64_t seed, DefectKind kind, int n,
                           const GeneratorConfig& config = {});

/// The clean frame 0 a tampered corpus sample was derived from.
ImageTensor original_frame(std::uint64_t seed, const GeneratorConfig& config = {});

/// Region a given spatial defect targets for this face (mouth, eye, cheek).
Region defect_region(const FaceGeometry& geometry, DefectKind kind);

}  // namespace ldd::datagen
