#include <gtest/gtest.h>

#include <map>
#include <random>

#include "oracles.hpp"
#include "salnet/backward.hpp"

namespace salnet {
namespace {

using testing::random_tensor;

struct ToyCase {
  Network net;
  Tensor input;
  ActivationCache cache;
};

// With fd_eps set, the input is redrawn until central differences of that
// step cannot straddle a ReLU or max-pool kink.
ToyCase make_case(std::uint64_t seed, double fd_eps = 0.0) {
  ToyCase c{testing::toy_network(seed), {}, {}};
  std::mt19937_64 rng(seed * 7919 + 1);
  c.input = fd_eps > 0.0 ? testing::smooth_random_input(c.net, rng, fd_eps) : random_tensor(c.net.input_shape, rng);
  c.cache = forward(c.net, c.input);
  return c;
}

BackwardOptions all_boundaries(BackwardMode mode) {
  BackwardOptions o;
  o.mode = mode;
  o.first_boundary = 0;
  return o;
}

bool has_negative(const Tensor& t) { return min_value(t) < 0.0f; }

TEST(BackwardMode, ParseAndPrint) {
  EXPECT_EQ(parse_backward_mode("pg"), BackwardMode::PG);
  EXPECT_EQ(parse_backward_mode("FG"), BackwardMode::FG);
  EXPECT_EQ(parse_backward_mode("Bp"), BackwardMode::BP);
  EXPECT_THROW(parse_backward_mode("gbp"), std::invalid_argument);
  EXPECT_STREQ(to_string(BackwardMode::PG), "pg");
}

TEST(InitialGradient, IsTheScoreVector) {
  ActivationCache cache;
  cache.scores = Tensor({4}, {0.9f, 0.1f, 0.0f, 0.0f});
  EXPECT_EQ(initial_gradient(cache), cache.scores);
  cache.scores = Tensor({1000}, 1.0f / 1000.0f);
  EXPECT_EQ(initial_gradient(cache), cache.scores);
}

TEST(InitialGradient, OneHotOverride) {
  ActivationCache cache;
  cache.scores = Tensor({5}, 0.2f);
  EXPECT_EQ(initial_gradient(cache, 3), Tensor({5}, {0, 0, 0, 1, 0}));
  EXPECT_THROW(initial_gradient(cache, 5), std::out_of_range);
}

TEST(Backward, ZeroInitialGivesZeroBundleInEveryMode) {
  const ToyCase c = make_case(1);
  for (BackwardMode mode : {BackwardMode::BP, BackwardMode::FG, BackwardMode::PG}) {
    BackwardOptions o = all_boundaries(mode);
    o.to_input = true;
    const BackwardBundle b = backward(c.net, c.cache, Tensor(c.cache.logits.shape()), o);
    ASSERT_EQ(b.boundaries.size(), 2u);
    for (const Tensor& t : b.boundaries) EXPECT_EQ(max_abs_difference(t, Tensor(t.shape())), 0.0f);
    EXPECT_EQ(max_abs_difference(*b.input_gradient, Tensor(c.input.shape())), 0.0f);
  }
}

TEST(Backward, BundleShapesFollowBlockOutputs) {
  const ToyCase c = make_case(2);
  const BackwardBundle b = backward(c.net, c.cache, initial_gradient(c.cache), all_boundaries(BackwardMode::PG));
  EXPECT_EQ(b.at_block(0).shape(), (Shape{3, 4, 4}));
  EXPECT_EQ(b.at_block(1).shape(), (Shape{4, 2, 2}));
  EXPECT_FALSE(b.input_gradient.has_value());

  BackwardOptions deep = all_boundaries(BackwardMode::PG);
  deep.first_boundary = 1;
  const BackwardBundle d = backward(c.net, c.cache, initial_gradient(c.cache), deep);
  EXPECT_EQ(d.boundaries.size(), 1u);
  EXPECT_THROW(d.at_block(0), std::out_of_range);
}

TEST(Backward, BpInputGradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ToyCase c = make_case(seed, 1e-3);
    std::mt19937_64 rng(seed);
    const Tensor upstream = random_tensor(c.cache.logits.shape(), rng);
    BackwardOptions o = all_boundaries(BackwardMode::BP);
    o.to_input = true;
    const BackwardBundle b = backward(c.net, c.cache, upstream, o);
    const auto fd = testing::finite_difference_input_gradient(c.net, c.input, testing::to_vec(upstream), 1e-3);
    EXPECT_LT(testing::normwise_relative_error(testing::to_vec(*b.input_gradient), fd), 1e-3) << "seed " << seed;
  }
}

TEST(Backward, OneHotBpMatchesClassSensitivity) {
  const ToyCase c = make_case(77, 1e-3);
  BackwardOptions o = all_boundaries(BackwardMode::BP);
  o.to_input = true;
  const Tensor e2 = initial_gradient(c.cache, 2);
  const BackwardBundle b = backward(c.net, c.cache, e2, o);
  const auto fd = testing::finite_difference_input_gradient(c.net, c.input, testing::to_vec(e2), 1e-3);
  EXPECT_LT(testing::normwise_relative_error(testing::to_vec(*b.input_gradient), fd), 1e-3);
}

TEST(Backward, FgIsNonNegativeAtEveryRelu) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ToyCase c = make_case(seed);
    BackwardOptions o = all_boundaries(BackwardMode::FG);
    o.to_input = true;
    std::map<std::string, int> seen;
    o.observer = [&](const std::string& tag, const Tensor& g) {
      ++seen[tag];
      EXPECT_FALSE(has_negative(g)) << tag << " seed " << seed;
    };
    const BackwardBundle b = backward(c.net, c.cache, initial_gradient(c.cache), o);
    EXPECT_EQ(seen.size(), 2u);  // conv2_1 and conv1_1 (no hidden fc in the toy net)
    for (const Tensor& t : b.boundaries) EXPECT_FALSE(has_negative(t));
  }
}

TEST(Backward, FgObserverSeesHiddenFcRelu) {
  const Network net = testing::mini_vgg_network(1);
  std::mt19937_64 rng(2);
  const ActivationCache cache = forward(net, random_tensor(net.input_shape, rng));
  BackwardOptions o = all_boundaries(BackwardMode::FG);
  o.to_input = true;
  std::vector<std::string> tags;
  o.observer = [&](const std::string& tag, const Tensor& g) {
    tags.push_back(tag);
    EXPECT_FALSE(has_negative(g)) << tag;
  };
  backward(net, cache, initial_gradient(cache), o);
  ASSERT_EQ(tags.size(), 6u);
  EXPECT_EQ(tags.front(), "fc1/relu");
  EXPECT_EQ(tags.back(), "conv1_1/relu");
}

TEST(Backward, PgBoundariesNonNegativeAndEqualBpAboveFirstClamp) {
  int diverged = 0, negatives_seen = 0;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const ToyCase c = make_case(seed);
    const Tensor g0 = initial_gradient(c.cache);
    const BackwardBundle bp = backward(c.net, c.cache, g0, all_boundaries(BackwardMode::BP));
    const BackwardBundle pg = backward(c.net, c.cache, g0, all_boundaries(BackwardMode::PG));
    for (const Tensor& t : pg.boundaries) EXPECT_FALSE(has_negative(t));
    bool clamped_above = false;
    for (std::size_t b = bp.boundaries.size(); b-- > 0;) {
      const Tensor& raw = bp.at_block(b);
      if (!clamped_above) {
        EXPECT_EQ(pg.at_block(b), clamp_nonnegative(raw)) << "seed " << seed << " block " << b;
      } else if (pg.at_block(b) != clamp_nonnegative(raw)) {
        ++diverged;
      }
      if (has_negative(raw)) {
        clamped_above = true;
        ++negatives_seen;
      }
    }
  }
  EXPECT_GT(negatives_seen, 0);
  EXPECT_GT(diverged, 0);
}

TEST(Backward, PgContinuesFromClampedBoundary) {
  const ToyCase c = make_case(5);
  const BackwardBundle pg = backward(c.net, c.cache, initial_gradient(c.cache), all_boundaries(BackwardMode::PG));
  // Propagate the stored deep boundary by hand through block 1.
  Tensor g = maxpool_backward(pg.at_block(1), c.cache.pool_indices[1]);
  g = relu_backward(g, c.cache.conv_masks[1][0], false);
  g = conv2d_backward_input(g, c.net.blocks[1].convs[0].weights);
  EXPECT_EQ(pg.at_block(0), clamp_nonnegative(g));
}

TEST(Backward, BpCanBeNegative) {
  bool any = false;
  for (std::uint64_t seed = 0; seed < 10 && !any; ++seed) {
    const ToyCase c = make_case(seed);
    const BackwardBundle bp = backward(c.net, c.cache, initial_gradient(c.cache), all_boundaries(BackwardMode::BP));
    for (const Tensor& t : bp.boundaries) any = any || has_negative(t);
  }
  EXPECT_TRUE(any);
}

TEST(Backward, PositiveScalingCommutesWithEveryMode) {
  const ToyCase c = make_case(9);
  const Tensor g0 = initial_gradient(c.cache);
  Tensor g4 = g0;
  for (float& v : g4.data()) v *= 4.0f;
  Tensor g037 = g0;
  for (float& v : g037.data()) v *= 0.37f;
  for (BackwardMode mode : {BackwardMode::BP, BackwardMode::FG, BackwardMode::PG}) {
    const BackwardBundle a = backward(c.net, c.cache, g0, all_boundaries(mode));
    const BackwardBundle b = backward(c.net, c.cache, g4, all_boundaries(mode));
    const BackwardBundle s = backward(c.net, c.cache, g037, all_boundaries(mode));
    for (std::size_t i = 0; i < a.boundaries.size(); ++i) {
      for (std::size_t k = 0; k < a.boundaries[i].size(); ++k) {
        // Scaling by a power of two is exact in binary floating point.
        EXPECT_EQ(b.boundaries[i][k], 4.0f * a.boundaries[i][k]);
        EXPECT_NEAR(s.boundaries[i][k], 0.37f * a.boundaries[i][k], 1e-6f + 1e-5f * std::abs(a.boundaries[i][k]));
      }
    }
  }
}

TEST(Backward, ThroughSoftmaxAppliesJacobian) {
  const ToyCase c = make_case(11);
  const Tensor s = initial_gradient(c.cache);
  BackwardOptions o = all_boundaries(BackwardMode::BP);
  o.through_softmax = true;
  const BackwardBundle with = backward(c.net, c.cache, s, o);

  // p_i (s_i - sum_j p_j s_j), computed independently in double.
  const Tensor& p = c.cache.scores;
  double ps = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) ps += static_cast<double>(p[i]) * s[i];
  Tensor vjp(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) vjp[i] = static_cast<float>(p[i] * (s[i] - ps));
  const BackwardBundle manual = backward(c.net, c.cache, vjp, all_boundaries(BackwardMode::BP));
  for (std::size_t i = 0; i < with.boundaries.size(); ++i) {
    EXPECT_LT(max_abs_difference(with.boundaries[i], manual.boundaries[i]), 1e-6f);
  }
}

TEST(Backward, MismatchedCacheRejected) {
  const ToyCase c = make_case(1);
  const Network other = testing::mini_vgg_network(1);
  EXPECT_THROW(backward(other, c.cache, Tensor({10}), all_boundaries(BackwardMode::PG)), std::invalid_argument);
  EXPECT_THROW(backward(c.net, c.cache, Tensor({4}), all_boundaries(BackwardMode::PG)), ShapeError);
  BackwardOptions bad = all_boundaries(BackwardMode::PG);
  bad.first_boundary = 2;
  EXPECT_THROW(backward(c.net, c.cache, initial_gradient(c.cache), bad), std::invalid_argument);
}

}  // namespace
}  // namespace salnet
