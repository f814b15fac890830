#include <algorithm>
#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "ldd/ablation.hpp"
#include "ldd/checkpoint.hpp"
#include "ldd/errors.hpp"
#include "ldd/gradcheck.hpp"
#include "ldd/image_io.hpp"
#include "ldd/localization.hpp"
#include "ldd/metrics.hpp"
#include "ldd/training.hpp"
#include "oracles.hpp"

using namespace ldd;
using namespace ldd::harness;
namespace fs = std::filesystem;

namespace {

// Tiny balanced dataset for the micro configuration.
Dataset micro_dataset(int count, std::uint64_t seed) {
  const ModelConfig config = micro_preset();
  Rng rng(seed);
  Dataset data;
  for (int i = 0; i < count; ++i) {
    Example e;
    e.id = std::to_string(i);
    e.input = random_model_input(config, rng);
    e.label = i % 2;
    if (e.label == 1)
      for (double& v : e.input.frame.data) v = std::min(1.0, v + 0.3);
    data.push_back(std::move(e));
  }
  return data;
}

TrainConfig micro_train(Mode mode) {
  TrainConfig cfg;
  cfg.mode = mode;
  cfg.maps = 1;
  cfg.frames = 1;
  cfg.heads = 1;
  cfg.batch_size = 4;
  cfg.epochs = 3;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("ldd_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("auc hand examples") {
  CHECK(metrics::auc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
  CHECK(metrics::auc(std::vector<double>{0.5, 0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1, 0}) == 0.5);
  CHECK(metrics::auc(std::vector<double>{0.8, 0.4, 0.6, 0.2}, std::vector<int>{1, 1, 0, 0}) == 0.75);
}

TEST_CASE("auc needs both classes and matching sizes") {
  CHECK_THROWS_AS(metrics::auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), ValidationError);
  CHECK_THROWS_AS(metrics::auc(std::vector<double>{0.1}, std::vector<int>{1, 0}), ValidationError);
}

TEST_CASE("auc equals pair counting with ties") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = rng.uniform_int(2, 60);
    std::vector<double> s(n);
    std::vector<int> l(n);
    for (int i = 0; i < n; ++i) {
      s[i] = rng.uniform_int(0, 9) / 10.0;
      l[i] = i % 2;
    }
    CHECK(std::abs(metrics::auc(s, l) - oracle::auc_pairs(s, l)) < 1e-12);
  }
}

TEST_CASE("inverted scores give the complementary auc") {
  Rng rng(2);
  std::vector<double> s(40), neg(40);
  std::vector<int> l(40);
  for (int i = 0; i < 40; ++i) {
    s[i] = rng.uniform();
    neg[i] = -s[i];
    l[i] = i % 3 == 0;
  }
  CHECK(metrics::auc(neg, l) == doctest::Approx(1.0 - metrics::auc(s, l)).epsilon(1e-12));
}

TEST_CASE("roc of four hand scores") {
  const std::vector<double> s{0.8, 0.4, 0.6, 0.2};
  const std::vector<int> l{1, 1, 0, 0};
  const auto roc = metrics::roc_curve(s, l);
  const std::vector<std::pair<double, double>> expected{{0, 0}, {0, 0.5}, {0.5, 0.5}, {0.5, 1}, {1, 1}};
  REQUIRE(roc.size() == expected.size());
  for (std::size_t i = 0; i < roc.size(); ++i) {
    CHECK(roc[i].fpr == expected[i].first);
    CHECK(roc[i].tpr == expected[i].second);
  }
  CHECK(metrics::best_threshold_accuracy(s, l) == 0.75);
}

TEST_CASE("roc endpoints and monotonicity") {
  Rng rng(3);
  std::vector<double> s(100);
  std::vector<int> l(100);
  for (int i = 0; i < 100; ++i) {
    s[i] = rng.uniform_int(0, 20) / 20.0;
    l[i] = rng.uniform() < 0.3;
  }
  l[0] = 0;
  l[1] = 1;
  const auto roc = metrics::roc_curve(s, l);
  CHECK(roc.front().fpr == 0.0);
  CHECK(roc.front().tpr == 0.0);
  CHECK(roc.back().fpr == 1.0);
  CHECK(roc.back().tpr == 1.0);
  for (std::size_t i = 1; i < roc.size(); ++i) {
    CHECK(roc[i].fpr >= roc[i - 1].fpr);
    CHECK(roc[i].tpr >= roc[i - 1].tpr);
  }
  const double prior = std::count(l.begin(), l.end(), 1) / 100.0;
  CHECK(metrics::best_threshold_accuracy(s, l) >= std::max(prior, 1.0 - prior));
}

TEST_CASE("perfect separation scores one") {
  const std::vector<double> s{0.1, 0.9, 0.2, 0.7};
  const std::vector<int> l{0, 1, 0, 1};
  CHECK(metrics::auc(s, l) == 1.0);
  CHECK(metrics::accuracy(s, l) == 1.0);
}

TEST_CASE("gradcheck is exact for a quadratic loss of a linear model") {
  Tensor w({3}), g({3});
  w.values = {0.5, -1.0, 2.0};
  const std::vector<double> x{1.0, 2.0, -0.5};
  const auto loss = [&] {
    double y = 0.0;
    for (int i = 0; i < 3; ++i) y += w.values[i] * x[i];
    return 0.5 * y * y;
  };
  double y = 0.0;
  for (int i = 0; i < 3; ++i) y += w.values[i] * x[i];
  for (int i = 0; i < 3; ++i) g.values[i] = y * x[i];
  const std::vector<ParameterSlice> slices{{"w", &w, &g}};
  CHECK(finite_difference_gradcheck(slices, loss, 1e-4).max_rel_error < 1e-8);
  CHECK(w.values == std::vector<double>{0.5, -1.0, 2.0});
}

TEST_CASE("gradcheck flags a corrupted gradient") {
  auto model = DetectorModel::create(micro_preset(), 4);
  DetectorGradcheckOptions options;
  options.corrupt_parameter = "spatial.head0.t";
  const auto report = gradcheck_detector(model, Mode::Spatial, 0, 5, options);
  CHECK(report.max_rel_error > 0.1);
  CHECK(report.worst_parameter == "spatial.head0.t");
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const auto data = micro_dataset(4, 6);
  TrainConfig cfg = micro_train(Mode::SpatialTemporal);
  TrainState state = initial_state(micro_preset(), cfg);
  const DetectorModel before = state.model;
  cfg.learning_rate = 0.0;
  const std::vector<std::size_t> batch{0, 1, 2, 3};
  sgd_step(state, data, batch, cfg);
  const auto a = before.named_parameters();
  const auto b = state.model.named_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].second == *b[i].second);
}

TEST_CASE("one momentum-free step moves by -lr times the gradient") {
  const auto data = micro_dataset(4, 7);
  TrainConfig cfg = micro_train(Mode::SpatialTemporal);
  cfg.momentum = 0.0;
  cfg.learning_rate = 0.01;
  TrainState state = initial_state(micro_preset(), cfg);
  const DetectorModel before = state.model;
  DetectorModel grad = before.zeros_like();
  for (const auto& e : data) accumulate_gradient(before, e.input, e.label, cfg.mode, grad);
  const std::vector<std::size_t> batch{0, 1, 2, 3};
  sgd_step(state, data, batch, cfg);
  const auto p0 = before.named_parameters();
  const auto p1 = state.model.named_parameters();
  const auto g = grad.named_parameters();
  double worst = 0.0;
  for (std::size_t i = 0; i < p0.size(); ++i)
    for (std::size_t j = 0; j < p0[i].second->size(); ++j) {
      const double expected = p0[i].second->values[j] - cfg.learning_rate * g[i].second->values[j] / 4.0;
      worst = std::max(worst, std::abs(p1[i].second->values[j] - expected));
    }
  CHECK(worst < 1e-15);
}

TEST_CASE("momentum accumulates the velocity") {
  const auto data = micro_dataset(2, 8);
  TrainConfig cfg = micro_train(Mode::BackboneOnly);
  TrainState state = initial_state(micro_preset(), cfg);
  const std::vector<std::size_t> batch{0, 1};
  const double w0 = state.model.backbone.classifier.bias.values[0];
  sgd_step(state, data, batch, cfg);
  const double v1 = state.velocity.backbone.classifier.bias.values[0];
  const double w1 = state.model.backbone.classifier.bias.values[0];
  CHECK(w1 == doctest::Approx(w0 - cfg.learning_rate * v1).epsilon(1e-14));
  DetectorModel grad = state.model.zeros_like();
  for (const auto& e : data) accumulate_gradient(state.model, e.input, e.label, cfg.mode, grad);
  sgd_step(state, data, batch, cfg);
  const double g = grad.backbone.classifier.bias.values[0] / 2.0;
  CHECK(state.velocity.backbone.classifier.bias.values[0] == doctest::Approx(cfg.momentum * v1 + g).epsilon(1e-12));
}

TEST_CASE("modes leave unused parameters untouched") {
  const auto data = micro_dataset(4, 9);
  const TrainConfig cfg = micro_train(Mode::BackboneOnly);
  TrainState state = initial_state(micro_preset(), cfg);
  const DetectorModel before = state.model;
  const std::vector<std::size_t> batch{0, 1, 2, 3};
  sgd_step(state, data, batch, cfg);
  const auto a = before.named_parameters();
  const auto b = state.model.named_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) {
    CAPTURE(a[i].first);
    CHECK((*a[i].second == *b[i].second) == is_attention_parameter(a[i].first));
  }
}

TEST_CASE("training is deterministic and lowers the loss") {
  const auto data = micro_dataset(16, 10);
  TrainConfig cfg = micro_train(Mode::SpatialTemporal);
  cfg.epochs = 10;
  cfg.learning_rate = 0.01;
  TrainState a = initial_state(micro_preset(), cfg);
  TrainState b = initial_state(micro_preset(), cfg);
  const auto ha = train(a, data, cfg);
  const auto hb = train(b, data, cfg);
  REQUIRE(ha.size() == 10);
  CHECK(ha.back().loss < ha.front().loss);
  for (std::size_t i = 0; i < ha.size(); ++i) CHECK(ha[i].loss == hb[i].loss);
  CHECK(a.model.named_parameters().back().second->values == b.model.named_parameters().back().second->values);
  CHECK(history_csv(ha).rfind("epoch,loss,acc,auc\n", 0) == 0);
}

TEST_CASE("training configuration is validated") {
  TrainConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  for (auto mutate : std::vector<std::function<void(TrainConfig&)>>{
           [](TrainConfig& c) { c.learning_rate = 0.0; }, [](TrainConfig& c) { c.momentum = 1.0; },
           [](TrainConfig& c) { c.batch_size = 0; }, [](TrainConfig& c) { c.maps = 0; },
           [](TrainConfig& c) { c.frames = 0; }, [](TrainConfig& c) { c.heads = 0; }}) {
    TrainConfig bad;
    mutate(bad);
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }
}

TEST_CASE("training refuses a single-class set") {
  auto data = micro_dataset(4, 11);
  for (auto& e : data) e.label = 0;
  TrainState state = initial_state(micro_preset(), micro_train(Mode::Spatial));
  CHECK_THROWS_AS(train(state, data, micro_train(Mode::Spatial)), ValidationError);
}

TEST_CASE("checkpoints round-trip bit for bit and resume identically") {
  const fs::path dir = scratch("ckpt");
  const auto data = micro_dataset(8, 12);
  TrainConfig cfg = micro_train(Mode::SpatialTemporal);
  TrainState full = initial_state(micro_preset(), cfg);
  train(full, data, cfg, {.checkpoint_dir = dir});
  CHECK(fs::exists(dir / "last.ckpt"));
  CHECK(fs::exists(dir / "epoch_001.ckpt"));

  const auto ck = checkpoint::load(dir / "epoch_001.ckpt");
  CHECK(ck.state.epoch == 1);
  CHECK(ck.train.batch_size == cfg.batch_size);
  TrainState resumed = ck.state;
  train(resumed, data, cfg);
  const auto a = full.model.named_parameters();
  const auto b = resumed.model.named_parameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].second == *b[i].second);

  checkpoint::save(dir / "copy.ckpt", full, cfg);
  CHECK(io::sha256_file(dir / "copy.ckpt") == io::sha256_file(dir / "last.ckpt"));
  CHECK_THROWS_AS(checkpoint::load(dir / "missing.ckpt"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("attention diff of an image with itself is zero") {
  const auto model = DetectorModel::create(desk_preset(), 13);
  const auto sample = datagen::gen_sample(14, datagen::DefectKind::Recolor, 0);
  const auto d = attention_diff(model, sample.image(), sample.image(), sample.mask());
  for (double v : d.diff.values) CHECK(v == 0.0);
  CHECK_FALSE(d.ratio.has_value());
}

TEST_CASE("attention diff concentrates on a recoloured eye") {
  const auto model = DetectorModel::create(desk_preset(), 15);
  const auto sample = datagen::gen_sample(16, datagen::DefectKind::Recolor, 0);
  const auto d = attention_diff(model, datagen::original_frame(16), sample.image(), sample.mask());
  CHECK(d.diff.rows == 128);
  REQUIRE(d.ratio.has_value());
  CHECK(*d.ratio > 1.0);
}

TEST_CASE("localization ratio is unchanged by a uniform map offset") {
  Rng rng(17);
  attention::AttentionMapSet a, b, a2, b2;
  for (int j = 0; j < 2; ++j) {
    Grid g(4, 4), h(4, 4);
    for (double& v : g.values) v = rng.uniform(0.0, 0.5);
    h = g;
    h.at(1, 1) += 0.3;
    a.maps.push_back(g);
    b.maps.push_back(h);
    for (double& v : g.values) v += 0.2;
    for (double& v : h.values) v += 0.2;
    a2.maps.push_back(g);
    b2.maps.push_back(h);
  }
  Grid mask(16, 16);
  for (int y = 4; y < 8; ++y)
    for (int x = 4; x < 8; ++x) mask.at(y, x) = 1.0;
  const auto r1 = localization_ratio(map_difference(a, b, 16, 16), mask);
  const auto r2 = localization_ratio(map_difference(a2, b2, 16, 16), mask);
  REQUIRE(r1.has_value());
  REQUIRE(r2.has_value());
  CHECK(*r1 == doctest::Approx(*r2).epsilon(1e-12));
  CHECK_FALSE(localization_ratio(map_difference(a, b, 16, 16), Grid(16, 16)).has_value());
}

TEST_CASE("sweeps enumerate the table rows") {
  const TrainConfig base;
  CHECK(sweep_variants(base, Sweep::Modes).size() == 4);
  const auto maps = sweep_variants(base, Sweep::Maps);
  REQUIRE(maps.size() == 5);
  for (int m = 1; m <= 5; ++m) CHECK(maps[m - 1].maps == m);
  const auto frames = sweep_variants(base, Sweep::Frames);
  REQUIRE(frames.size() == 4);
  for (int n = 2; n <= 5; ++n) CHECK(frames[n - 2].frames == n);
  CHECK(sweep_from_string("m") == Sweep::Maps);
  CHECK_THROWS_AS(sweep_from_string("lr"), ValidationError);
}

TEST_CASE("ablation runs are reproducible") {
  const DataSource source = [](const ModelConfig&) {
    return std::pair{micro_dataset(8, 18), micro_dataset(8, 19)};
  };
  TrainConfig base = micro_train(Mode::SpatialTemporal);
  base.epochs = 1;
  const auto a = ablation_run(micro_preset(), base, Sweep::Modes, {1, 2}, source);
  const auto b = ablation_run(micro_preset(), base, Sweep::Modes, {1, 2}, source);
  REQUIRE(a.rows.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(a.rows[i].auc == b.rows[i].auc);
    CHECK(a.rows[i].acc == b.rows[i].acc);
    CHECK(a.rows[i].auc.size() == 2);
  }
  CHECK(a.to_table().find("backbone-only") != std::string::npos);
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
}
