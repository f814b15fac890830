#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "ldd/datagen.hpp"
#include "ldd/errors.hpp"
#include "oracles.hpp"

using namespace ldd;
using namespace ldd::datagen;

namespace {

bool disjoint(const Region& a, const Region& b, int size) {
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      if (a.contains_pixel(x, y) && b.contains_pixel(x, y)) return false;
  return true;
}

// Every pixel the mask leaves at zero is bit-identical in both images.
bool identical_outside(const ImageTensor& a, const ImageTensor& b, const Grid& mask) {
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      if (mask.at(y, x) == 0.0)
        for (int c = 0; c < a.channels; ++c)
          if (a.at(y, x, c) != b.at(y, x, c)) return false;
  return true;
}

double mask_sum(const Grid& m) {
  double s = 0.0;
  for (double v : m.values) s += v;
  return s;
}

std::array<double, 3> mean_color(const ImageTensor& img, const Region& r) {
  std::array<double, 3> sum{};
  int n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (r.contains_pixel(x, y)) {
        for (int c = 0; c < 3; ++c) sum[c] += img.at(y, x, c);
        ++n;
      }
  for (double& v : sum) v /= n;
  return sum;
}

// Mean |R| over every residual of a window, inside and outside a mask.
std::pair<double, double> residual_means(const SyntheticSample& s, const Grid& mask) {
  double in = 0.0, out = 0.0;
  long n_in = 0, n_out = 0;
  for (std::size_t k = 1; k < s.frames.size(); ++k)
    for (int y = 0; y < mask.rows; ++y)
      for (int x = 0; x < mask.cols; ++x)
        for (int c = 0; c < 3; ++c) {
          const double r = std::abs(s.frames[k].at(y, x, c) - s.frames[k - 1].at(y, x, c));
          if (mask.at(y, x) > 0.0) {
            in += r;
            ++n_in;
          } else {
            out += r;
            ++n_out;
          }
        }
  return {in / n_in, out / n_out};
}

}  // namespace

TEST_CASE("base faces are deterministic and seed dependent") {
  const auto a = gen_base_face(5);
  CHECK(a.image == gen_base_face(5).image);
  CHECK(oracle::max_abs_diff(a.image.data, gen_base_face(6).image.data) > 0.0);
  CHECK_NOTHROW(validate_image(a.image));
}

TEST_CASE("face geometry audit over 1000 seeds") {
  const int size = GeneratorConfig{}.image_size;
  int failures = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto g = gen_base_face(seed).geometry;
    bool ok = disjoint(g.left_eye, g.right_eye, size);
    ok = ok && g.mouth.cy - g.mouth.hy > std::max(g.left_eye.cy + g.left_eye.hy, g.right_eye.cy + g.right_eye.hy);
    for (const Region* r : {&g.face, &g.left_eye, &g.right_eye, &g.mouth, &g.cheek})
      ok = ok && r->inside_image(size, size);
    if (!ok) ++failures;
  }
  CHECK(failures == 0);
}

TEST_CASE("blur changes only the region and needs a positive sigma") {
  const auto face = gen_base_face(7);
  const auto s = inject_blur(face.image, face.geometry.mouth, 2.0);
  CHECK(s.fake);
  CHECK(s.defect == DefectKind::Blur);
  CHECK(s.mask() == region_mask(face.geometry.mouth, 128, 128));
  CHECK(identical_outside(face.image, s.image(), s.mask()));
  CHECK(s.image() != face.image);
  CHECK_THROWS_AS(inject_blur(face.image, face.geometry.mouth, 0.0), ValidationError);
}

TEST_CASE("blur targets carry texture") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto face = gen_base_face(seed);
    const Region r = defect_region(face.geometry, DefectKind::Blur);
    std::vector<double> values;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x)
        if (r.contains_pixel(x, y)) values.push_back(face.image.at(y, x, 0));
    CHECK(oracle::stddev(values) > 0.0);
  }
}

TEST_CASE("recolor paints one eye and leaves the other untouched") {
  const auto face = gen_base_face(8);
  const auto s = inject_recolor(face.image, face.geometry.right_eye);
  CHECK(s.mask() == region_mask(face.geometry.right_eye, 128, 128));
  CHECK(identical_outside(face.image, s.image(), s.mask()));
  CHECK(mean_color(s.image(), face.geometry.left_eye) == mean_color(face.image, face.geometry.left_eye));
}

TEST_CASE("recolored eyes differ by more than 0.3 over 1000 seeds") {
  double worst = INFINITY;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto face = gen_base_face(seed);
    const auto s = inject_recolor(face.image, face.geometry.right_eye);
    const auto l = mean_color(s.image(), face.geometry.left_eye);
    const auto r = mean_color(s.image(), face.geometry.right_eye);
    worst = std::min(worst, std::hypot(l[0] - r[0], l[1] - r[1], l[2] - r[2]));
  }
  CHECK(worst > 0.3);
}

TEST_CASE("warp is local with a displacement of at least two pixels") {
  const GeneratorConfig config;
  const auto face = gen_base_face(9);
  const Region& mouth = face.geometry.mouth;
  const auto s = inject_warp(face.image, mouth, config.warp_amplitude, config.warp_wavelength);
  CHECK(identical_outside(face.image, s.image(), s.mask()));
  CHECK(s.mask() == region_mask(mouth, 128, 128));
  CHECK_THROWS_AS(inject_warp(face.image, mouth, 0.0, config.warp_wavelength), ValidationError);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto g = gen_base_face(seed).geometry;
    double peak = 0.0;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x < 128; ++x) {
        const double d = warp_displacement(g.mouth, config.warp_amplitude, config.warp_wavelength, x, y);
        if (!g.mouth.contains_pixel(x, y)) CHECK(d == 0.0);
        peak = std::max(peak, std::abs(d));
      }
    CHECK(peak >= 2.0);
  }
}

TEST_CASE("checkerboard alternates every two pixels inside the region only") {
  const auto face = gen_base_face(10);
  const Region& cheek = face.geometry.cheek;
  const auto s = inject_checkerboard(face.image, cheek, GeneratorConfig{}.checkerboard_amplitude);
  CHECK(identical_outside(face.image, s.image(), s.mask()));
  CHECK_THROWS_AS(inject_checkerboard(face.image, cheek, 0.0), ValidationError);

  // Horizontal autocorrelation of the added signal: cells of two pixels with
  // alternating sign give a trough at lag 2 and the peak at lag 4.
  const auto correlation = [&](int lag) {
    double num = 0.0, den = 0.0;
    for (int y = 0; y < 128; ++y)
      for (int x = 0; x + lag < 128; ++x) {
        if (!cheek.contains_pixel(x, y) || !cheek.contains_pixel(x + lag, y)) continue;
        const double a = s.image().at(y, x, 1) - face.image.at(y, x, 1);
        const double b = s.image().at(y, x + lag, 1) - face.image.at(y, x + lag, 1);
        num += a * b;
        den += 0.5 * (a * a + b * b);
      }
    return num / den;
  };
  int best = 1;
  for (int lag = 1; lag <= 6; ++lag)
    if (correlation(lag) > correlation(best)) best = lag;
  CHECK(best == 4);
  CHECK(correlation(2) < -0.5);
  CHECK(correlation(4) > 0.5);
}

TEST_CASE("labels and masks agree for every kind") {
  for (auto kind : {DefectKind::None, DefectKind::Blur, DefectKind::Recolor, DefectKind::Warp,
                    DefectKind::Checkerboard, DefectKind::Jitter}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto s = gen_sample(seed, kind, 3);
      CAPTURE(to_string(kind));
      CHECK(s.frames.size() == 4);
      CHECK(s.masks.size() == 4);
      CHECK(s.fake == (kind != DefectKind::None));
      for (const auto& m : s.masks) CHECK((mask_sum(m) > 0.0) == s.fake);
    }
  }
}

TEST_CASE("spatial defects leave the rest of each frame intact") {
  for (auto kind : {DefectKind::Blur, DefectKind::Recolor, DefectKind::Warp, DefectKind::Checkerboard}) {
    const auto real = gen_sample(11, DefectKind::None, 2);
    const auto fake = gen_sample(11, kind, 2);
    for (std::size_t k = 0; k < real.frames.size(); ++k)
      CHECK(identical_outside(real.frames[k], fake.frames[k], fake.masks[k]));
    CHECK(original_frame(11) == real.image());
  }
}

TEST_CASE("video residuals: smooth for real windows, concentrated for jitter") {
  double real_lo = INFINITY, real_hi = 0.0, fake_lo = INFINITY;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto fake = gen_video_window(seed, 3, true);
    const auto real = gen_video_window(seed, 3, false);
    const Grid& region = fake.masks.front();
    const auto [ri, ro] = residual_means(real, region);
    const auto [fi, fo] = residual_means(fake, region);
    real_lo = std::min(real_lo, ri / ro);
    real_hi = std::max(real_hi, ri / ro);
    fake_lo = std::min(fake_lo, fi / fo);
  }
  CHECK(real_lo >= 0.5);
  CHECK(real_hi <= 2.0);
  CHECK(fake_lo >= 3.0);
}

TEST_CASE("degenerate generator settings are rejected") {
  GeneratorConfig still;
  still.jitter_amplitude = 0.0;
  CHECK_THROWS_AS(gen_video_window(1, 3, true, still), ValidationError);
  CHECK_NOTHROW(gen_video_window(1, 3, false, still));
  CHECK_THROWS_AS(gen_video_window(1, 0, false), ValidationError);
  CHECK_THROWS_AS(defect_from_string("smudge"), ValidationError);
  CHECK_THROWS_AS(defect_region(gen_base_face(1).geometry, DefectKind::Jitter), ValidationError);
}
