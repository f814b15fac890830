#include "doctest.h"
#include "ldd/errors.hpp"
#include "ldd/patchwork.hpp"
#include "oracles.hpp"

using namespace ldd;
using namespace ldd::patchwork;

TEST_CASE("split produces a row-major grid of s x s patches") {
  const ImageTensor img = oracle::random_image(224, 224, 3, 1);
  const auto p = split_into_patches(img, 16);
  CHECK(p.count() == 196);
  CHECK(p.grid_rows == 14);
  CHECK(p.grid_cols == 14);
  CHECK(p.patch_dim() == 16 * 16 * 3);
}

TEST_CASE("single patch equals the image") {
  const ImageTensor img = oracle::random_image(16, 16, 1, 2);
  const auto p = split_into_patches(img, 16);
  REQUIRE(p.count() == 1);
  CHECK(std::vector<double>(p.patch(0).begin(), p.patch(0).end()) == img.data);
}

TEST_CASE("non-dividing patch size is rejected with the dimensions") {
  const ImageTensor img(224, 224, 3);
  try {
    split_into_patches(img, 15);
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("15") != std::string::npos);
    CHECK(msg.find("224") != std::string::npos);
  }
}

TEST_CASE("split then reassemble is bit-exact") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ImageTensor img = oracle::random_image(64, 64, 3, seed);
    CHECK(reassemble_patches(split_into_patches(img, 8)) == img);
  }
  const ImageTensor one = oracle::random_image(16, 16, 3, 99);
  CHECK(reassemble_patches(split_into_patches(one, 16)) == one);
}

TEST_CASE("reassemble rejects inconsistent grid metadata") {
  auto p = split_into_patches(oracle::random_image(32, 32, 1, 3), 8);
  p.grid_cols = 5;
  CHECK_THROWS_AS(reassemble_patches(p), ValidationError);
}

TEST_CASE("patch i holds the pixels at grid cell (i div cols, i mod cols)") {
  const ImageTensor img = oracle::random_image(32, 48, 3, 4);
  const auto p = split_into_patches(img, 8);
  for (int i = 0; i < p.count(); ++i) {
    const int gr = i / p.grid_cols, gc = i % p.grid_cols;
    const auto patch = p.patch(i);
    std::size_t k = 0;
    for (int r = 0; r < 8; ++r)
      for (int c = 0; c < 8; ++c)
        for (int ch = 0; ch < 3; ++ch) CHECK(patch[k++] == img.at(gr * 8 + r, gc * 8 + c, ch));
  }
}

TEST_CASE("identity projection with zero bias returns raw pixels") {
  const ImageTensor img = oracle::random_image(4, 4, 1, 5);
  const auto p = split_into_patches(img, 2);
  Tensor w({4, 4});
  for (int i = 0; i < 4; ++i) w.values[i * 4 + i] = 1.0;
  const auto z = flatten_and_project(p, w, Tensor({4}));
  for (int i = 0; i < p.count(); ++i)
    for (int d = 0; d < 4; ++d) CHECK(z.row(i)[d] == p.patch(i)[d]);
}

TEST_CASE("zero projection yields the bias everywhere") {
  const auto p = split_into_patches(oracle::random_image(8, 8, 3, 6), 4);
  Tensor bias({5});
  bias.values = {0.1, -0.2, 0.3, 0.0, 2.5};
  const auto z = flatten_and_project(p, Tensor({48, 5}), bias);
  for (int i = 0; i < z.count; ++i)
    for (int d = 0; d < 5; ++d) CHECK(z.row(i)[d] == bias.values[d]);
}

TEST_CASE("projection matches a per-element dot-product loop") {
  Rng rng(7);
  const auto p = split_into_patches(oracle::random_image(32, 32, 3, 7), 8);
  const Tensor w = oracle::random_tensor({192, 16}, rng);
  const Tensor b = oracle::random_tensor({16}, rng);
  const auto z = flatten_and_project(p, w, b);
  const auto expect = oracle::project(p, w, b);
  CHECK(oracle::max_abs_diff(z.data, expect) < 1e-6);
}

TEST_CASE("projection rejects a mismatched input dimension") {
  const auto p = split_into_patches(oracle::random_image(8, 8, 3, 8), 4);
  CHECK_THROWS_AS(flatten_and_project(p, Tensor({47, 4}), Tensor({4})), ValidationError);
}

TEST_CASE("projection is linear without bias") {
  Rng rng(9);
  const ImageTensor a = oracle::random_image(16, 16, 3, 10);
  const ImageTensor b = oracle::random_image(16, 16, 3, 11);
  ImageTensor mix(16, 16, 3);
  const double alpha = 0.7, beta = -1.3;
  for (std::size_t i = 0; i < mix.data.size(); ++i) mix.data[i] = alpha * a.data[i] + beta * b.data[i];
  const Tensor w = oracle::random_tensor({48, 6}, rng);
  const Tensor zero({6});
  const auto za = flatten_and_project(split_into_patches(a, 4), w, zero);
  const auto zb = flatten_and_project(split_into_patches(b, 4), w, zero);
  const auto zm = flatten_and_project(split_into_patches(mix, 4), w, zero);
  for (std::size_t i = 0; i < zm.data.size(); ++i) CHECK(zm.data[i] == doctest::Approx(alpha * za.data[i] + beta * zb.data[i]).epsilon(1e-9));
}

TEST_CASE("position addition") {
  Rng rng(12);
  EmbeddingSequence z(4, 3);
  for (double& v : z.data) v = rng.normal();

  SUBCASE("zero table is the identity") {
    const auto f = add_position(z, Tensor({4, 3}), 0);
    CHECK(f.data == z.data);
  }
  SUBCASE("element-wise sum per slot") {
    const Tensor table = oracle::random_tensor({8, 3}, rng);
    const auto f0 = add_position(z, table, 0);
    const auto f1 = add_position(z, table, 1);
    for (int i = 0; i < 4; ++i)
      for (int d = 0; d < 3; ++d) {
        CHECK(f0.row(i)[d] == z.row(i)[d] + table.values[i * 3 + d]);
        CHECK(f1.row(i)[d] == z.row(i)[d] + table.values[(4 + i) * 3 + d]);
      }
  }
  SUBCASE("single slot") {
    EmbeddingSequence one(1, 3);
    one.data = {1.0, 2.0, 3.0};
    Tensor table({1, 3});
    table.values = {0.5, -0.5, 0.25};
    CHECK(add_position(one, table, 0).data == std::vector<double>{1.5, 1.5, 3.25});
  }
  SUBCASE("slot out of range is rejected") {
    CHECK_THROWS_AS(add_position(z, Tensor({6, 3}), 1), ValidationError);
  }
}

TEST_CASE("front-end initialisation scales") {
  Rng rng(13);
  const FrontEnd fe = make_front_end(192, 16, 256, rng);
  CHECK(oracle::stddev(fe.position.values) == doctest::Approx(0.02).epsilon(0.1));
  CHECK(oracle::stddev(fe.projection.values) == doctest::Approx(1.0 / std::sqrt(192.0)).epsilon(0.1));
  for (double b : fe.bias.values) CHECK(b == 0.0);
}
