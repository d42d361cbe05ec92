#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "salnet/fusion.hpp"

namespace salnet {
namespace {

using testing::random_tensor;

std::array<Tensor, 4> random_layers(std::mt19937_64& rng) {
  return {random_tensor({224, 224}, rng, 0.0f, 2.0f), random_tensor({224, 224}, rng, 0.0f, 2.0f),
          random_tensor({224, 224}, rng, 0.0f, 2.0f), random_tensor({224, 224}, rng, 0.0f, 2.0f)};
}

TEST(FusionConfig, DefaultsAndValidation) {
  FusionConfig c;
  EXPECT_EQ(c.layer_weights, (std::array<float, 4>{1, 5, 10, 1}));
  EXPECT_EQ(c.blur_size, 11u);
  EXPECT_EQ(c.blur_sigma, 2.0);
  EXPECT_EQ(c.center_bias_floor, 0.25f);
  EXPECT_NO_THROW(c.validate());

  auto rejects = [](auto mutate) {
    FusionConfig bad;
    mutate(bad);
    EXPECT_THROW(bad.validate(), std::invalid_argument);
  };
  rejects([](FusionConfig& b) { b.layer_weights[2] = -1.0f; });
  rejects([](FusionConfig& b) { b.blur_size = 10; });
  rejects([](FusionConfig& b) { b.blur_sigma = 0.0; });
  rejects([](FusionConfig& b) { b.eta = 0.0f; });
  rejects([](FusionConfig& b) { b.center_bias_floor = 0.0f; });
  rejects([](FusionConfig& b) { b.center_bias_floor = 1.5f; });
}

TEST(ChannelProductSum, HandComputedTwoChannelCase) {
  Tensor fw({2, 2, 2}, {1, 2, 3, 4, 1, 1, 1, 1});
  Tensor bw({2, 2, 2}, {1, 1, 1, 1, 0, 1, 2, 3});
  Tensor s = channel_product_sum(fw, bw);
  EXPECT_EQ(s, Tensor({2, 2}, {1 + 0, 2 + 1, 3 + 2, 4 + 3}));
  EXPECT_THROW(channel_product_sum(fw, Tensor({2, 2, 3})), ShapeError);
}

TEST(SublayerSaliency, ZeroBackwardGivesZero) {
  std::mt19937_64 rng(1);
  Tensor s = sublayer_saliency(random_tensor({4, 7, 7}, rng, 0.0f, 1.0f), Tensor({4, 7, 7}), FusionConfig{});
  EXPECT_EQ(s.shape(), (Shape{224, 224}));
  EXPECT_EQ(max_value(s), 0.0f);
  EXPECT_EQ(min_value(s), 0.0f);
}

TEST(SublayerSaliency, InteriorImpulseMassPreserved) {
  // A 1-channel 28x28 map upsampled by 8: an interior impulse spreads over a
  // bilinear tent whose mass is 8*8 times the source value.
  Tensor fw({1, 28, 28}), bw({1, 28, 28});
  fw.at(0, 14, 13) = 1.0f;
  bw.at(0, 14, 13) = 1.0f;
  Tensor s = sublayer_saliency(fw, bw, FusionConfig{});
  EXPECT_NEAR(sum_value(s) / 64.0, 1.0, 1e-4);
  Tensor resized = resize_bilinear(channel_product_sum(fw, bw), 224, 224);
  EXPECT_NEAR(sum_value(resized), sum_value(s), 1e-4);
}

TEST(CenterBias, CenterCornerAndSymmetry) {
  Tensor m = center_bias_map();
  ASSERT_EQ(m.shape(), (Shape{224, 224}));
  for (std::size_t r : {111u, 112u}) {
    for (std::size_t c : {111u, 112u}) EXPECT_EQ(m.at(r, c), 1.0f);
  }
  for (auto [r, c] : {std::pair{0u, 0u}, {0u, 223u}, {223u, 0u}, {223u, 223u}}) EXPECT_NEAR(m.at(r, c), 0.25f, 1e-6);
  EXPECT_NEAR(max_value(m), 1.0f, 0.0f);
  EXPECT_NEAR(min_value(m), 0.25f, 1e-6);
  for (std::size_t r = 0; r < 224; ++r) {
    for (std::size_t c = 0; c < 224; ++c) {
      ASSERT_EQ(m.at(r, c), m.at(c, r));
      ASSERT_EQ(m.at(r, c), m.at(223 - r, c));
      ASSERT_EQ(m.at(r, c), m.at(r, 223 - c));
    }
  }
}

TEST(CenterBias, OddSizeHasExactCenterAndCustomFloor) {
  Tensor m = center_bias_map(5, 0.5f);
  EXPECT_EQ(m.at(2, 2), 1.0f);
  EXPECT_NEAR(m.at(0, 0), 0.5f, 1e-7);
  EXPECT_NEAR(m.at(2, 0), 1.0f - 0.5f * (2.0f / std::sqrt(8.0f)), 1e-6);
}

TEST(TopDown, ZeroMapsGiveZero) {
  std::array<Tensor, 4> z{Tensor({224, 224}), Tensor({224, 224}), Tensor({224, 224}), Tensor({224, 224})};
  SaliencyMap s = top_down(z, FusionConfig{}, BackwardMode::PG);
  EXPECT_EQ(s.stage, Stage::TopDown);
  EXPECT_EQ(max_value(s.values), 0.0f);
}

TEST(TopDown, Conv5WeightAtCenter) {
  std::array<Tensor, 4> maps{Tensor({224, 224}), Tensor({224, 224}), Tensor({224, 224}), Tensor({224, 224})};
  maps[2].at(112, 112) = 0.3f;
  SaliencyMap s = top_down(maps, FusionConfig{}, BackwardMode::PG);
  EXPECT_FLOAT_EQ(s.values.at(112, 112), 3.0f);
}

TEST(TopDown, LinearInWeightsAndDistributesOverCenterBias) {
  std::mt19937_64 rng(2);
  const auto maps = random_layers(rng);
  FusionConfig base;
  FusionConfig doubled = base;
  for (float& w : doubled.layer_weights) w *= 2.0f;
  const SaliencyMap a = top_down(maps, base, BackwardMode::PG);
  const SaliencyMap b = top_down(maps, doubled, BackwardMode::PG);
  for (std::size_t i = 0; i < a.values.size(); ++i) ASSERT_EQ(b.values[i], 2.0f * a.values[i]);

  // Per-term application of M, in double, against post-sum application.
  const Tensor m = center_bias_map();
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    double per_term = 0.0;
    for (std::size_t n = 0; n < 4; ++n) {
      per_term += static_cast<double>(base.layer_weights[n]) * m[i] * maps[n][i];
    }
    ASSERT_NEAR(a.values[i], per_term, 1e-6 * std::max(1.0, per_term));
  }

  FusionConfig flat = base;
  flat.center_bias = false;
  const SaliencyMap f = top_down(maps, flat, BackwardMode::PG);
  EXPECT_NEAR(f.values.at(0, 0) * 0.25f, a.values.at(0, 0), 1e-5f);
}

TEST(Modulate, ZeroIsIdentityOneIsE) {
  std::mt19937_64 rng(3);
  SaliencyMap td{random_tensor({224, 224}, rng, 0.0f, 5.0f), Stage::TopDown, BackwardMode::PG, "none"};
  const SaliencyMap same = modulate(td, Tensor({224, 224}), "none");
  EXPECT_EQ(same.values, td.values);
  EXPECT_EQ(same.stage, Stage::Modulated);
  const SaliencyMap e = modulate(td, Tensor({224, 224}, 1.0f), "mr");
  for (std::size_t i = 0; i < e.values.size(); ++i) ASSERT_FLOAT_EQ(e.values[i], td.values[i] * std::exp(1.0f));
  EXPECT_EQ(e.bottom_up, "mr");
}

TEST(Modulate, MonotoneAndRangeChecked) {
  std::mt19937_64 rng(4);
  SaliencyMap td{random_tensor({224, 224}, rng, 0.0f, 5.0f), Stage::TopDown, BackwardMode::PG, "none"};
  Tensor bu = random_tensor({224, 224}, rng, 0.0f, 0.9f);
  const SaliencyMap a = modulate(td, bu, "x");
  bu.at(50, 60) += 0.1f;
  const SaliencyMap b = modulate(td, bu, "x");
  for (std::size_t i = 0; i < a.values.size(); ++i) ASSERT_GE(b.values[i], a.values[i]);
  EXPECT_GT(b.values.at(50, 60), a.values.at(50, 60));
  for (std::size_t i = 0; i < a.values.size(); ++i) ASSERT_GE(a.values[i], td.values[i]);

  bu.at(0, 0) = 1.01f;
  EXPECT_THROW(modulate(td, bu, "x"), std::invalid_argument);
  bu.at(0, 0) = -0.01f;
  EXPECT_THROW(modulate(td, bu, "x"), std::invalid_argument);
  EXPECT_THROW(modulate(td, Tensor({10, 10}), "x"), ShapeError);
}

TEST(Normalize, MeanPixelIsHalfAndRangeIsOpen) {
  SaliencyMap s{Tensor({3, 1}, {0.0f, 0.5f, 1.0f}), Stage::Modulated, BackwardMode::PG, "none"};
  SaliencyMap n = normalize(s, 10.0f);
  EXPECT_NEAR(n.values[1], 0.5f, 1e-6);
  EXPECT_LT(n.values[0], n.values[1]);
  EXPECT_LT(n.values[1], n.values[2]);

  SaliencyMap extreme{Tensor({2}, {0.0f, 1.0f}), Stage::Modulated, BackwardMode::PG, "none"};
  SaliencyMap e = normalize(extreme, 500.0f);
  for (float v : e.values.data()) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
}

TEST(Normalize, ZeroMapBecomesUniformHalf) {
  SaliencyMap s{Tensor({224, 224}), Stage::Modulated, BackwardMode::PG, "none"};
  SaliencyMap n = normalize(s, 10.0f);
  for (float v : n.values.data()) ASSERT_EQ(v, 0.5f);
}

TEST(Normalize, StrictlyMonotone) {
  std::mt19937_64 rng(5);
  SaliencyMap s{random_tensor({64, 64}, rng, 0.0f, 3.0f), Stage::Modulated, BackwardMode::PG, "none"};
  SaliencyMap n = normalize(s, 10.0f);
  for (std::size_t i = 1; i < s.values.size(); ++i) {
    if (s.values[i] > s.values[i - 1]) ASSERT_GE(n.values[i], n.values[i - 1]);
    if (s.values[i] < s.values[i - 1]) ASSERT_LE(n.values[i], n.values[i - 1]);
  }
  EXPECT_THROW(normalize(s, 0.0f), std::invalid_argument);
}

TEST(FusionChain, NormalizedMapInvariantUnderPositiveRescaling) {
  std::mt19937_64 rng(6);
  const auto maps = random_layers(rng);
  const Tensor bu = random_tensor({224, 224}, rng, 0.0f, 1.0f);
  const FusionConfig config;
  const SaliencyMap ref = normalize(modulate(top_down(maps, config, BackwardMode::PG), bu, "x"), config.eta);
  for (float alpha : {1e-3f, 0.37f, 3.0f, 1e4f}) {
    std::array<Tensor, 4> scaled = maps;
    for (auto& t : scaled) {
      for (float& v : t.data()) v *= alpha;
    }
    const SaliencyMap out = normalize(modulate(top_down(scaled, config, BackwardMode::PG), bu, "x"), config.eta);
    EXPECT_LE(max_abs_difference(out.values, ref.values), 1e-6f) << alpha;
  }
}

TEST(Bps, ZeroWeightsGiveZeroMap) {
  Network net = testing::toy_network(1);
  for (auto& b : net.blocks) {
    for (auto& c : b.convs) c.weights.fill(0.0f), c.bias.fill(0.0f);
  }
  for (auto& f : net.classifier) f.weights.fill(0.0f), f.bias.fill(0.0f);
  std::mt19937_64 rng(1);
  const ActivationCache cache = forward(net, random_tensor(net.input_shape, rng));
  const Tensor m = bps_baseline(net, cache, FusionConfig{});
  EXPECT_EQ(m.shape(), (Shape{8, 8}));
  EXPECT_EQ(max_value(m), 0.0f);
}

TEST(Bps, SensitivityMatchesFiniteDifferencesAndIsNonNegative) {
  const Network net = testing::toy_network(21);
  std::mt19937_64 rng(22);
  const Tensor x = testing::smooth_random_input(net, rng, 1e-3);
  const ActivationCache cache = forward(net, x);
  const Tensor e1 = initial_gradient(cache, 1);
  const Tensor sens = input_sensitivity(net, cache, e1);
  const auto fd = testing::finite_difference_input_gradient(net, x, testing::to_vec(e1), 1e-3);
  testing::Vec expected(64, 0.0);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 64; ++i) expected[i] = std::max(expected[i], std::abs(fd[c * 64 + i]));
  }
  EXPECT_LT(testing::normwise_relative_error(testing::to_vec(sens), expected), 1e-3);

  const Tensor map = bps_baseline(net, cache, FusionConfig{}, 1);
  EXPECT_GE(min_value(map), 0.0f);
  EXPECT_FLOAT_EQ(max_value(map), 1.0f);
}

}  // namespace
}  // namespace salnet
