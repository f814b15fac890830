#include <cmath>

#include "doctest.h"
#include "ldd/backbone.hpp"
#include "ldd/config.hpp"
#include "ldd/detector.hpp"
#include "ldd/errors.hpp"
#include "ldd/gradcheck.hpp"
#include "oracles.hpp"

using namespace ldd;
using namespace ldd::backbone;

namespace {

BackboneConfig one_block_config() {
  BackboneConfig c;
  c.block_widths = {32};
  c.block_strides = {2};
  c.mid_hook = 1;
  return c;
}

FeatureMaps oracle_stem(const ImageTensor& image, const BackboneConfig& config, const BackboneParams& p) {
  FeatureMaps x = to_feature_maps(image);
  for (std::size_t i = 0; i < p.stem.size(); ++i)
    x = oracle::relu(oracle::conv3x3(x, p.stem[i].weight, p.stem[i].bias, config.stem_strides[i]));
  return x;
}

FeatureMaps oracle_block(const FeatureMaps& x, const BlockParams& b) {
  FeatureMaps h = oracle::depthwise(oracle::relu(x), b.dw1, b.stride);
  h = oracle::relu(oracle::pointwise(h, b.pw1, b.pw1_bias, 1));
  FeatureMaps y = oracle::pointwise(oracle::depthwise(h, b.dw2, 1), b.pw2, b.pw2_bias, 1);
  const FeatureMaps skip = b.identity_skip() ? x : oracle::pointwise(x, b.skip, b.skip_bias, b.stride);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += skip.data[i];
  return y;
}

std::array<double, 2> oracle_classify(const FeatureMaps& f, const ClassifierParams& p) {
  std::array<double, 2> logits{p.bias.values[0], p.bias.values[1]};
  for (int c = 0; c < f.channels; ++c) {
    double mean = 0.0;
    for (double v : f.plane(c)) mean += std::max(v, 0.0);
    mean /= static_cast<double>(f.plane_size());
    for (int k = 0; k < 2; ++k) logits[k] += p.weight.values[k * f.channels + c] * mean;
  }
  return logits;
}

}  // namespace

TEST_CASE("zero image through a zero-bias stem gives zero maps") {
  Rng rng(1);
  const BackboneConfig config;
  const auto params = make_backbone(config, rng);
  const auto f = stem_forward(ImageTensor(128, 128, 3), config, params);
  for (double v : f.data) CHECK(v == 0.0);
}

TEST_CASE("stem is deterministic and reaches 32x32 on the desk config") {
  const BackboneConfig config;
  Rng a(2), b(2);
  const auto pa = make_backbone(config, a);
  const auto pb = make_backbone(config, b);
  const ImageTensor img = oracle::random_image(128, 128, 3, 3);
  const auto fa = stem_forward(img, config, pa);
  CHECK(fa == stem_forward(img, config, pb));
  CHECK(fa.height == 32);
  CHECK(fa.width == 32);
  CHECK(fa.channels == 16);
}

TEST_CASE("stem rejects the wrong resolution") {
  Rng rng(4);
  const BackboneConfig config;
  const auto params = make_backbone(config, rng);
  CHECK_THROWS_AS(stem_forward(ImageTensor(64, 64, 3), config, params), ValidationError);
}

TEST_CASE("empty block span is the identity") {
  Rng rng(5);
  const auto params = make_backbone(BackboneConfig{}, rng);
  const auto f = oracle::random_maps(16, 32, 32, rng);
  CHECK(blocks_forward(f, 2, 2, params) == f);
  CHECK_THROWS_AS(blocks_forward(f, 3, 2, params), ValidationError);
  CHECK_THROWS_AS(blocks_forward(f, 0, 5, params), ValidationError);
}

TEST_CASE("identity skip with a zeroed branch passes the input through") {
  BackboneConfig config;
  config.block_widths = {16};
  config.block_strides = {1};
  config.mid_hook = 1;
  Rng rng(6);
  auto params = make_backbone(config, rng);
  auto& b = params.blocks[0];
  REQUIRE(b.identity_skip());
  for (double& v : b.pw2.values) v = 0.0;
  const auto f = oracle::random_maps(16, 8, 8, rng);
  CHECK(blocks_forward(f, 0, 1, params) == f);
}

TEST_CASE("one-block backbone matches the direct convolution oracle") {
  const auto config = one_block_config();
  Rng rng(7);
  auto params = make_backbone(config, rng);
  for (auto& c : params.stem)
    for (double& v : c.bias.values) v = rng.normal(0.0, 0.1);
  for (double& v : params.blocks[0].pw1_bias.values) v = rng.normal(0.0, 0.1);
  for (double& v : params.blocks[0].skip_bias.values) v = rng.normal(0.0, 0.1);
  const ImageTensor img = oracle::random_image(128, 128, 3, 8);
  const auto stem = stem_forward(img, config, params);
  CHECK(oracle::max_abs_diff(stem.data, oracle_stem(img, config, params).data) < 1e-5);
  const auto out = blocks_forward(stem, 0, 1, params);
  const auto expected = oracle_block(stem, params.blocks[0]);
  CHECK(out.same_shape(expected));
  CHECK(oracle::max_abs_diff(out.data, expected.data) < 1e-5);
}

TEST_CASE("classifier on constant maps is affine in the value") {
  Rng rng(9);
  const auto params = make_backbone(BackboneConfig{}, rng);
  const auto& w = params.classifier.weight.values;
  for (double v : {0.0, 0.5, 2.0}) {
    const auto logits = classify(FeatureMaps(64, 8, 8, v), params.classifier);
    for (int k = 0; k < 2; ++k) {
      double sum = 0.0;
      for (int c = 0; c < 64; ++c) sum += w[k * 64 + c];
      CHECK(logits[k] == doctest::Approx(params.classifier.bias.values[k] + v * sum).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero classifier weights return the bias") {
  Rng rng(10);
  ClassifierParams p{Tensor({2, 5}), Tensor({2})};
  p.bias.values = {0.3, -1.2};
  const auto logits = classify(oracle::random_maps(5, 4, 4, rng), p);
  CHECK(logits[0] == 0.3);
  CHECK(logits[1] == -1.2);
}

TEST_CASE("classifier matches the pool-then-matvec oracle") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = rng.uniform_int(1, 30);
    ClassifierParams p{oracle::random_tensor({2, c}, rng), oracle::random_tensor({2}, rng)};
    const auto f = oracle::random_maps(c, rng.uniform_int(1, 9), rng.uniform_int(1, 9), rng);
    const auto a = classify(f, p);
    const auto b = oracle_classify(f, p);
    CHECK(std::abs(a[0] - b[0]) < 1e-6);
    CHECK(std::abs(a[1] - b[1]) < 1e-6);
  }
  CHECK_THROWS_AS(classify(FeatureMaps(3, 2, 2), {Tensor({2, 4}), Tensor({2})}), ValidationError);
}

TEST_CASE("backbone-only forward is stem, blocks and classifier") {
  const ModelConfig config = desk_preset();
  const auto model = DetectorModel::create(config, 12);
  Rng rng(13);
  const auto input = harness::random_model_input(config, rng);
  const auto result = full_forward(model, input, Mode::BackboneOnly);
  const auto f = blocks_forward(stem_forward(centered(input.frame), config.backbone, model.backbone), 0,
                                config.backbone.block_count(), model.backbone);
  CHECK(result.logits == classify(f, model.backbone.classifier));
  CHECK_FALSE(result.spatial_maps.has_value());
  CHECK_FALSE(result.temporal_maps.has_value());
}

TEST_CASE("unit maps reproduce backbone-only logits bit for bit") {
  const ModelConfig config = desk_preset();
  const auto model = DetectorModel::create(config, 14);
  Rng rng(15);
  const auto input = harness::random_model_input(config, rng);
  const auto base = full_forward(model, input, Mode::BackboneOnly).logits;
  for (Mode mode : {Mode::Spatial, Mode::Temporal, Mode::SpatialTemporal}) {
    CAPTURE(to_string(mode));
    CHECK(full_forward(model, input, mode, {.force_unit_maps = true}).logits == base);
    CHECK(full_forward(model, input, mode).logits != base);
  }
}

TEST_CASE("spatial-temporal desk forward emits logits and both map sets") {
  const ModelConfig config = desk_preset();
  const auto model = DetectorModel::create(config, 16);
  Rng rng(17);
  const auto input = harness::random_model_input(config, rng);
  const auto r = full_forward(model, input, Mode::SpatialTemporal);
  REQUIRE(r.spatial_maps.has_value());
  REQUIRE(r.temporal_maps.has_value());
  for (const auto* maps : {&*r.spatial_maps, &*r.temporal_maps}) {
    CHECK(maps->count() == 4);
    CHECK(maps->rows() == 8);
    CHECK(maps->cols() == 8);
  }
  CHECK(std::isfinite(r.logits[0]));
  CHECK(std::isfinite(r.logits[1]));
  CHECK(full_forward(model, input, Mode::SpatialTemporal).logits == r.logits);
}

TEST_CASE("temporal modes need the following frames") {
  const ModelConfig config = desk_preset();
  const auto model = DetectorModel::create(config, 18);
  Rng rng(19);
  auto input = harness::random_model_input(config, rng);
  input.next_frames.pop_back();
  CHECK_THROWS_AS(full_forward(model, input, Mode::Temporal), ValidationError);
  CHECK_NOTHROW(full_forward(model, input, Mode::Spatial));
}

TEST_CASE("micro end-to-end gradients match finite differences") {
  for (Mode mode : {Mode::BackboneOnly, Mode::Spatial, Mode::Temporal, Mode::SpatialTemporal}) {
    CAPTURE(to_string(mode));
    auto model = DetectorModel::create(micro_preset(), 20);
    const auto report = harness::gradcheck_detector(model, mode, 1, 21);
    CHECK(report.checked > 0);
    CHECK_MESSAGE(report.max_rel_error < 1e-3, report.worst_parameter);
  }
}
