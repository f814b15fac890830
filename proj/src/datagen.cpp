#include "ldd/datagen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "ldd/errors.hpp"
#include "ldd/image_io.hpp"

namespace ldd::datagen {

namespace {

using Rgb = std::array<double, 3>;

double hash_unit(std::uint64_t seed, std::int64_t i, std::int64_t j) {
  const std::uint64_t h = derive_seed(derive_seed(seed, static_cast<std::uint64_t>(i)),
                                      static_cast<std::uint64_t>(j));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

// Value noise in [-1,1] on a lattice of the given cell size, smoothly
// interpolated so that sub-pixel translation moves it continuously.
double value_noise(std::uint64_t seed, double u, double v, double cell) {
  const double fu = u / cell;
  const double fv = v / cell;
  const auto i = static_cast<std::int64_t>(std::floor(fu));
  const auto j = static_cast<std::int64_t>(std::floor(fv));
  const double tu = fu - i;
  const double tv = fv - j;
  const double su = tu * tu * (3 - 2 * tu);
  const double sv = tv * tv * (3 - 2 * tv);
  const double a = std::lerp(hash_unit(seed, i, j), hash_unit(seed, i + 1, j), su);
  const double b = std::lerp(hash_unit(seed, i, j + 1), hash_unit(seed, i + 1, j + 1), su);
  return std::lerp(a, b, sv);
}

// Anti-aliased coverage of an ellipse at a point (1 inside, 0 outside, linear
// ramp across roughly one pixel at the border).
double ellipse_coverage(double u, double v, double cx, double cy, double rx, double ry) {
  const double dx = (u - cx) / rx;
  const double dy = (v - cy) / ry;
  const double dist = (std::sqrt(dx * dx + dy * dy) - 1.0) * std::min(rx, ry);
  return std::clamp(0.5 - dist, 0.0, 1.0);
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
  return {std::lerp(a[0], b[0], t), std::lerp(a[1], b[1], t), std::lerp(a[2], b[2], t)};
}

struct Style {
  double scale = 1.0;
  std::uint64_t noise_seed = 0;
  Rgb background{};
  Rgb skin{};
  Rgb iris{};
  Rgb brow{};
  Rgb lip{};
  double face_cx = 0, face_cy = 0, face_rx = 0, face_ry = 0;
  double eye_y = 0, eye_dx = 0, eye_r = 0, iris_r = 0, pupil_r = 0;
  double brow_dy = 0, brow_hw = 0, brow_hh = 0;
  double mouth_cx = 0, mouth_cy = 0, mouth_hw = 0, mouth_hh = 0, smile = 0;
  double cheek_side = 1.0;
  double vx = 0, vy = 0;
};

Style make_style(std::uint64_t seed, const GeneratorConfig& cfg) {
  Rng rng(derive_seed(seed, 0xFACE));
  Style s;
  s.scale = cfg.image_size / 128.0;
  s.noise_seed = derive_seed(seed, 0x7E47);
  for (double& c : s.background) c = rng.uniform(0.25, 0.75);
  const double r = rng.uniform(0.55, 0.8);
  const double g = r * rng.uniform(0.7, 0.85);
  s.skin = {r, g, g * rng.uniform(0.75, 0.9)};
  static constexpr std::array<Rgb, 4> irises{
      Rgb{0.35, 0.22, 0.12}, Rgb{0.25, 0.40, 0.60}, Rgb{0.30, 0.45, 0.30}, Rgb{0.45, 0.45, 0.50}};
  s.iris = irises[rng.uniform_int(0, 3)];
  for (double& c : s.iris) c = std::clamp(c + rng.uniform(-0.05, 0.05), 0.0, 1.0);
  const double hair = rng.uniform(0.1, 0.3);
  s.brow = {hair, hair * 0.85, hair * 0.7};
  const double lip_dark = rng.uniform(0.75, 0.9);
  s.lip = {s.skin[0] * lip_dark, s.skin[1] * 0.6 * lip_dark, s.skin[2] * 0.65 * lip_dark};

  const double k = s.scale;
  s.face_cx = 64.0 * k + rng.uniform(-4.0, 4.0) * k;
  s.face_cy = 66.0 * k + rng.uniform(-4.0, 4.0) * k;
  s.face_rx = rng.uniform(40.0, 45.0) * k;
  s.face_ry = rng.uniform(50.0, 55.0) * k;
  s.eye_y = s.face_cy - s.face_ry * rng.uniform(0.22, 0.3);
  s.eye_dx = s.face_rx * rng.uniform(0.36, 0.42);
  s.eye_r = rng.uniform(7.0, 8.5) * k;
  s.iris_r = s.eye_r * rng.uniform(0.55, 0.68);
  s.pupil_r = s.iris_r * 0.45;
  s.brow_dy = s.eye_r + rng.uniform(3.0, 5.0) * k;
  s.brow_hw = s.eye_r * rng.uniform(1.1, 1.4);
  s.brow_hh = rng.uniform(1.5, 2.2) * k;
  s.mouth_cx = s.face_cx + rng.uniform(-2.0, 2.0) * k;
  s.mouth_cy = s.face_cy + s.face_ry * rng.uniform(0.42, 0.5);
  s.mouth_hw = rng.uniform(13.0, 18.0) * k;
  s.mouth_hh = rng.uniform(5.0, 6.5) * k;
  s.smile = rng.uniform(-2.0, 2.0) * k;
  s.cheek_side = rng.uniform() < 0.5 ? -1.0 : 1.0;
  const double speed = rng.uniform(cfg.motion_speed_min, cfg.motion_speed_max) * k;
  const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  s.vx = speed * std::cos(angle);
  s.vy = speed * std::sin(angle);
  return s;
}

FaceGeometry geometry_of(const Style& s) {
  using Shape = Region::Shape;
  FaceGeometry g;
  g.face = {Shape::Ellipse, s.face_cx, s.face_cy, s.face_rx, s.face_ry};
  // Image-left eye is the face's right eye.
  g.right_eye = {Shape::Ellipse, s.face_cx - s.eye_dx, s.eye_y, s.iris_r + 0.5, s.iris_r + 0.5};
  g.left_eye = {Shape::Ellipse, s.face_cx + s.eye_dx, s.eye_y, s.iris_r + 0.5, s.iris_r + 0.5};
  const double m = 3.0 * s.scale;
  g.mouth = {Shape::Rect, s.mouth_cx, s.mouth_cy, s.mouth_hw + m, s.mouth_hh + m + std::abs(s.smile)};
  const double ch = 9.0 * s.scale;
  g.cheek = {Shape::Rect, s.face_cx + s.cheek_side * s.face_rx * 0.5,
             s.face_cy + s.face_ry * 0.08, ch, ch};
  return g;
}

// Color at face coordinates (u, v).
Rgb shade(const Style& s, double u, double v) {
  const std::uint64_t ns = s.noise_seed;
  const double k = s.scale;
  const double fine = 1.5 * k;

  const double bg_tex = 0.07 * value_noise(ns ^ 1, u, v, fine) + 0.08 * value_noise(ns ^ 2, u, v, 20 * k);
  Rgb color{};
  for (int c = 0; c < 3; ++c) color[c] = s.background[c] + bg_tex;

  const double face = ellipse_coverage(u, v, s.face_cx, s.face_cy, s.face_rx, s.face_ry);
  if (face > 0.0) {
    const double low = 1.0 + 0.12 * value_noise(ns ^ 3, u, v, 16 * k);
    const double tex = 0.07 * value_noise(ns ^ 4, u, v, fine);
    Rgb skin{};
    for (int c = 0; c < 3; ++c) skin[c] = s.skin[c] * low + tex;
    color = mix(color, skin, face);
  }

  for (double side : {-1.0, 1.0}) {
    const double ex = s.face_cx + side * s.eye_dx;
    const double brow = ellipse_coverage(u, v, ex, s.eye_y - s.brow_dy, s.brow_hw, s.brow_hh);
    if (brow > 0.0) color = mix(color, s.brow, brow);
    const double white = ellipse_coverage(u, v, ex, s.eye_y, s.eye_r * 1.35, s.eye_r);
    if (white > 0.0) {
      const double tex = 0.04 * value_noise(ns ^ 5, u, v, fine);
      color = mix(color, Rgb{0.9 + tex, 0.9 + tex, 0.88 + tex}, white);
    }
    const double iris = ellipse_coverage(u, v, ex, s.eye_y, s.iris_r, s.iris_r);
    if (iris > 0.0) {
      const double tex = 0.06 * value_noise(ns ^ 6, u, v, fine);
      color = mix(color, Rgb{s.iris[0] + tex, s.iris[1] + tex, s.iris[2] + tex}, iris);
    }
    const double pupil = ellipse_coverage(u, v, ex, s.eye_y, s.pupil_r, s.pupil_r);
    if (pupil > 0.0) color = mix(color, Rgb{0.05, 0.04, 0.04}, pupil);
  }

  const double lips = ellipse_coverage(u, v, s.mouth_cx, s.mouth_cy, s.mouth_hw, s.mouth_hh);
  if (lips > 0.0) {
    const double tex = 0.06 * value_noise(ns ^ 7, u, v, fine);
    color = mix(color, Rgb{s.lip[0] + tex, s.lip[1] + tex, s.lip[2] + tex}, lips);
    const double t = (u - s.mouth_cx) / s.mouth_hw;
    const double slit_y = s.mouth_cy + s.smile * t * t;
    const double slit = std::clamp(1.0 - std::abs(v - slit_y) / (1.2 * s.scale), 0.0, 1.0) *
                        std::clamp(1.0 - std::abs(t), 0.0, 1.0) * 2.0;
    color = mix(color, Rgb{0.12, 0.05, 0.05}, 0.6 * std::min(1.0, slit) * lips);
  }
  for (double& c : color) c = std::clamp(c, 0.0, 1.0);
  return color;
}

// Face translated by (dx, dy); pixels inside `pasted` show the face
// translated by a further (px, py), as if cut out and pasted back misaligned.
ImageTensor render(const Style& s, int size, double dx, double dy, const Region& pasted = {},
                   double px = 0.0, double py = 0.0) {
  ImageTensor img(size, size, 3);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const bool moved = pasted.hx > 0.0 && pasted.contains_pixel(x, y);
      const Rgb c = shade(s, x + 0.5 - dx - (moved ? px : 0.0), y + 0.5 - dy - (moved ? py : 0.0));
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[ch];
    }
  return io::quantize_8bit(std::move(img));
}

SyntheticSample single(ImageTensor image, const Region& region, DefectKind kind) {
  SyntheticSample out;
  out.masks.push_back(region_mask(region, image.height, image.width));
  out.frames.push_back(std::move(image));
  out.fake = true;
  out.defect = kind;
  return out;
}

template <typename F>
void for_region_pixels(const Region& region, int height, int width, F&& f) {
  const int x0 = std::max(0, static_cast<int>(std::floor(region.cx - region.hx)) - 1);
  const int x1 = std::min(width - 1, static_cast<int>(std::ceil(region.cx + region.hx)) + 1);
  const int y0 = std::max(0, static_cast<int>(std::floor(region.cy - region.hy)) - 1);
  const int y1 = std::min(height - 1, static_cast<int>(std::ceil(region.cy + region.hy)) + 1);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (region.contains_pixel(x, y)) f(x, y);
}

double sample_bilinear(const ImageTensor& img, double x, double y, int c) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width - 1);
  const int y1 = std::min(y0 + 1, img.height - 1);
  const double top = std::lerp(img.at(y0, x0, c), img.at(y0, x1, c), x - x0);
  const double bottom = std::lerp(img.at(y1, x0, c), img.at(y1, x1, c), x - x0);
  return std::lerp(top, bottom, y - y0);
}

void require_region(const ImageTensor& image, const Region& region) {
  validate_image(image);
  if (!region.inside_image(image.height, image.width)) {
    throw ValidationError("defect region lies outside the image");
  }
}

}  // namespace

std::string to_string(DefectKind kind) {
  switch (kind) {
    case DefectKind::None: return "none";
    case DefectKind::Blur: return "blur";
    case DefectKind::Recolor: return "recolor";
    case DefectKind::Warp: return "warp";
    case DefectKind::Checkerboard: return "checkerboard";
    case DefectKind::Jitter: return "jitter";
  }
  return "none";
}

DefectKind defect_from_string(const std::string& s) {
  for (auto k : {DefectKind::None, DefectKind::Blur, DefectKind::Recolor, DefectKind::Warp,
                 DefectKind::Checkerboard, DefectKind::Jitter})
    if (to_string(k) == s) return k;
  throw ValidationError("unknown defect kind '" + s + "'");
}

bool Region::contains_pixel(int x, int y) const {
  const double dx = (x + 0.5 - cx) / hx;
  const double dy = (y + 0.5 - cy) / hy;
  if (shape == Shape::Rect) return std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
  return dx * dx + dy * dy <= 1.0;
}

Region Region::shifted(double dx, double dy) const {
  Region r = *this;
  r.cx += dx;
  r.cy += dy;
  return r;
}

bool Region::inside_image(int height, int width) const {
  return hx > 0 && hy > 0 && cx - hx >= 0 && cy - hy >= 0 && cx + hx <= width && cy + hy <= height;
}

Grid region_mask(const Region& region, int height, int width) {
  Grid mask(height, width);
  for_region_pixels(region, height, width, [&](int x, int y) { mask.at(y, x) = 1.0; });
  return mask;
}

BaseFace gen_base_face(std::uint64_t seed, const GeneratorConfig& config) {
  const Style s = make_style(seed, config);
  return {render(s, config.image_size, 0, 0), geometry_of(s)};
}

SyntheticSample inject_blur(const ImageTensor& image, const Region& region, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("blur sigma must be > 0");
  require_region(image, region);
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int k = -radius; k <= radius; ++k) total += kernel[k + radius] = std::exp(-k * k / (2 * sigma * sigma));
  for (double& w : kernel) w /= total;

  // Blur a padded crop around the region, then copy back region pixels only.
  const int x0 = std::max(0, static_cast<int>(std::floor(region.cx - region.hx)) - 1 - radius);
  const int x1 = std::min(image.width - 1, static_cast<int>(std::ceil(region.cx + region.hx)) + 1 + radius);
  const int y0 = std::max(0, static_cast<int>(std::floor(region.cy - region.hy)) - 1 - radius);
  const int y1 = std::min(image.height - 1, static_cast<int>(std::ceil(region.cy + region.hy)) + 1 + radius);
  const int cw = x1 - x0 + 1;
  const int chh = y1 - y0 + 1;
  ImageTensor horiz(chh, cw, image.channels);
  for (int y = 0; y < chh; ++y)
    for (int x = 0; x < cw; ++x)
      for (int c = 0; c < image.channels; ++c) {
        double acc = 0.0;
        for (int k = -radius; k <= radius; ++k) {
          const int sx = std::clamp(x0 + x + k, 0, image.width - 1);
          acc += kernel[k + radius] * image.at(y0 + y, sx, c);
        }
        horiz.at(y, x, c) = acc;
      }
  ImageTensor out = image;
  for_region_pixels(region, image.height, image.width, [&](int x, int y) {
    for (int c = 0; c < image.channels; ++c) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k) {
        const int sy = std::clamp(y + k, y0, y1) - y0;
        acc += kernel[k + radius] * horiz.at(sy, x - x0, c);
      }
      out.at(y, x, c) = acc;
    }
  });
  return single(io::quantize_8bit(std::move(out)), region, DefectKind::Blur);
}

SyntheticSample inject_recolor(const ImageTensor& image, const Region& eye) {
  require_region(image, eye);
  if (image.channels != 3) throw ValidationError("recolor needs an RGB image");
  ImageTensor out = image;
  for_region_pixels(eye, image.height, image.width, [&](int x, int y) {
    const double lum = 0.299 * image.at(y, x, 0) + 0.587 * image.at(y, x, 1) + 0.114 * image.at(y, x, 2);
    out.at(y, x, 0) = 0.75 + 0.25 * lum;
    out.at(y, x, 1) = 0.1 * lum;
    out.at(y, x, 2) = 0.1 * lum;
  });
  return single(io::quantize_8bit(std::move(out)), eye, DefectKind::Recolor);
}

double warp_displacement(const Region& mouth, double amplitude, double wavelength, int x, int y) {
  if (!mouth.contains_pixel(x, y)) return 0.0;
  const double u = (x + 0.5 - mouth.cx) / mouth.hx;
  const double v = (y + 0.5 - mouth.cy) / mouth.hy;
  const double taper = (1.0 - u * u) * (1.0 - v * v);
  return amplitude * taper * std::sin(2.0 * std::numbers::pi * (x + 0.5 - mouth.cx) / wavelength + 0.5 * std::numbers::pi);
}

SyntheticSample inject_warp(const ImageTensor& image, const Region& mouth, double amplitude,
                            double wavelength) {
  if (!(amplitude > 0.0)) throw ValidationError("warp amplitude must be > 0");
  if (!(wavelength > 0.0)) throw ValidationError("warp wavelength must be > 0");
  require_region(image, mouth);
  ImageTensor out = image;
  for_region_pixels(mouth, image.height, image.width, [&](int x, int y) {
    const double dy = warp_displacement(mouth, amplitude, wavelength, x, y);
    for (int c = 0; c < image.channels; ++c) out.at(y, x, c) = sample_bilinear(image, x, y + dy, c);
  });
  return single(io::quantize_8bit(std::move(out)), mouth, DefectKind::Warp);
}

SyntheticSample inject_checkerboard(const ImageTensor& image, const Region& region,
                                    double amplitude) {
  if (!(amplitude > 0.0)) throw ValidationError("checkerboard amplitude must be > 0");
  require_region(image, region);
  ImageTensor out = image;
  for_region_pixels(region, image.height, image.width, [&](int x, int y) {
    const double sign = ((x / 2 + y / 2) % 2 == 0) ? 1.0 : -1.0;
    for (int c = 0; c < image.channels; ++c)
      out.at(y, x, c) = std::clamp(image.at(y, x, c) + sign * amplitude, 0.0, 1.0);
  });
  return single(io::quantize_8bit(std::move(out)), region, DefectKind::Checkerboard);
}

Region defect_region(const FaceGeometry& geometry, DefectKind kind) {
  switch (kind) {
    case DefectKind::Blur: return geometry.mouth;
    case DefectKind::Recolor: return geometry.right_eye;
    case DefectKind::Warp: return geometry.mouth;
    case DefectKind::Checkerboard: return geometry.cheek;
    default: throw ValidationError("defect " + to_string(kind) + " has no spatial region");
  }
}

SyntheticSample gen_sample(std::uint64_t seed, DefectKind kind, int n, const GeneratorConfig& config) {
  if (n < 0) throw ValidationError("window length must be >= 0");
  if (kind == DefectKind::Jitter && !(config.jitter_amplitude > 0.0)) {
    throw ValidationError("jitter amplitude must be > 0");
  }
  const Style s = make_style(seed, config);
  const FaceGeometry geometry = geometry_of(s);
  const int size = config.image_size;
  Rng jitter_rng(derive_seed(seed, 0x717));
  SyntheticSample out;
  out.seed = seed;
  out.defect = kind;
  out.fake = kind != DefectKind::None;

  Region spatial_region;
  if (out.fake && kind != DefectKind::Jitter) spatial_region = defect_region(geometry, kind);
  const double jitter_margin = std::max(0.0, config.jitter_amplitude + 1.0 - 3.0 * s.scale);
  const Region jitter_region{Region::Shape::Rect, geometry.mouth.cx, geometry.mouth.cy,
                             geometry.mouth.hx + jitter_margin, geometry.mouth.hy + jitter_margin};

  for (int k = 0; k <= n; ++k) {
    const double dx = s.vx * k;
    const double dy = s.vy * k;
    double mx = 0.0, my = 0.0;
    if (kind == DefectKind::Jitter) {
      const double mag = jitter_rng.uniform(0.75, 1.0) * config.jitter_amplitude;
      const double ang = jitter_rng.uniform(0.0, 2.0 * std::numbers::pi);
      mx = mag * std::cos(ang);
      my = mag * std::sin(ang);
    }
    ImageTensor frame = render(s, size, dx, dy, jitter_region.shifted(dx, dy), mx, my);
    const double rdx = std::round(dx);
    const double rdy = std::round(dy);
    switch (kind) {
      case DefectKind::None:
        out.masks.emplace_back(size, size);
        out.frames.push_back(std::move(frame));
        continue;
      case DefectKind::Jitter: {
        out.masks.push_back(region_mask(jitter_region.shifted(dx, dy), size, size));
        out.frames.push_back(std::move(frame));
        continue;
      }
      default: break;
    }
    const Region r = spatial_region.shifted(rdx, rdy);
    SyntheticSample injected;
    switch (kind) {
      case DefectKind::Blur: injected = inject_blur(frame, r, config.blur_sigma); break;
      case DefectKind::Recolor: injected = inject_recolor(frame, r); break;
      case DefectKind::Warp:
        injected = inject_warp(frame, r, config.warp_amplitude, config.warp_wavelength);
        break;
      case DefectKind::Checkerboard:
        injected = inject_checkerboard(frame, r, config.checkerboard_amplitude);
        break;
      default: break;
    }
    out.frames.push_back(std::move(injected.frames.front()));
    out.masks.push_back(std::move(injected.masks.front()));
  }
  return out;
}

SyntheticSample gen_video_window(std::uint64_t seed, int n, bool fake, const GeneratorConfig& config) {
  if (n < 1) throw ValidationError("a video window needs n >= 1 following frames");
  return gen_sample(seed, fake ? DefectKind::Jitter : DefectKind::None, n, config);
}

ImageTensor original_frame(std::uint64_t seed, const GeneratorConfig& config) {
  return render(make_style(seed, config), config.image_size, 0, 0);
}

}  // namespace ldd::datagen
