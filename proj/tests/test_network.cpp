#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "deadrelu/network.hpp"
#include "deadrelu/rng.hpp"

using namespace deadrelu;

TEST(Network, ParamCountExamples) {
  EXPECT_EQ(param_count(Architecture{1, 1}), 2u);
  EXPECT_EQ(param_count(Architecture{3, 5, 1}), 26u);
  EXPECT_EQ(param_count(Architecture{1, 1, 1, 1, 1, 1, 1, 1, 1}), 16u);
}

TEST(Network, LayerOffsets) {
  EXPECT_EQ(layer_offsets(Architecture{3, 5, 1}), (std::vector<std::size_t>{0, 20, 26}));
  EXPECT_EQ(layer_offsets(Architecture{1, 2, 2, 1}), (std::vector<std::size_t>{0, 4, 10, 13}));
}

TEST(Network, ArchitectureRejectsDegenerateShapes) {
  EXPECT_THROW(Architecture({3}), std::invalid_argument);
  EXPECT_THROW(Architecture({2, 0, 1}), std::invalid_argument);
}

TEST(Network, AffineApplyRowMajor) {
  // W = [[1, 2], [3, 4]], b = [5, 6]
  const std::vector<double> theta{1, 2, 3, 4, 5, 6};
  const std::vector<double> x{1, -1};
  EXPECT_EQ(affine_apply(theta, 0, 2, 2, x), (std::vector<double>{4, 5}));
  EXPECT_THROW(affine_apply(theta, 1, 2, 2, x), std::out_of_range);
}

TEST(Network, RealizeSmallExamples) {
  // (1,1,1): w1 = 2, b1 = -1, w2 = 3, b2 = 0.5
  const Architecture a{1, 1, 1};
  const std::vector<double> theta{2, -1, 3, 0.5};
  EXPECT_DOUBLE_EQ(realize_scalar(a, theta, std::vector<double>{1.0}), 3.5);
  EXPECT_DOUBLE_EQ(realize_scalar(a, theta, std::vector<double>{0.25}), 0.5);
  EXPECT_DOUBLE_EQ(read_out(ReadOut::clip(), 3.5), 1.0);
  EXPECT_DOUBLE_EQ(read_out(ReadOut::clip(), -2.0), 0.0);
  EXPECT_DOUBLE_EQ(read_out(ReadOut::identity(), -2.0), -2.0);
}

TEST(Network, LastLayerHasNoActivation) {
  const Architecture a{1, 1};
  const std::vector<double> theta{-1.0, -1.0};
  EXPECT_DOUBLE_EQ(realize_scalar(a, theta, std::vector<double>{1.0}), -2.0);
}

TEST(Network, LayerViewMatchesOffsets) {
  const Architecture a{2, 3, 2, 1};
  ParamVector theta(a);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = static_cast<double>(i);
  const auto k = layer_offsets(a);
  for (std::size_t j = 1; j <= a.depth(); ++j) {
    const auto blk = theta.layer(j);
    ASSERT_EQ(blk.size(), k[j] - k[j - 1]);
    EXPECT_EQ(blk.front(), static_cast<double>(k[j - 1]));
  }
}

TEST(Network, PositiveHomogeneityOfHiddenUnits) {
  // Scaling the incoming weights and bias of a hidden unit by s > 0 and its
  // outgoing weights by 1/s leaves the function unchanged.
  Rng rng(11);
  const Architecture a{2, 3, 1};
  ParamVector theta(a);
  for (double& v : theta.values()) v = rng.uniform(-1, 1);
  ParamVector scaled = theta;
  const double s = 4.0;
  for (std::size_t c = 0; c < 2; ++c) scaled[0 * 2 + c] *= s;  // W1 row 0
  scaled[6] *= s;                                              // b1[0]
  scaled[9] /= s;                                              // W2[0][0]
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> x{rng.uniform(-2, 2), rng.uniform(-2, 2)};
    EXPECT_NEAR(realize(theta, x)[0], realize(scaled, x)[0], 1e-12);
  }
}

TEST(Network, ForwardTraceShapes) {
  const Architecture a{2, 4, 3, 1};
  const ParamVector theta(a, std::vector<double>(param_count(a), 0.5));
  const auto tr = forward_trace(a, theta.values(), std::vector<double>{1.0, -1.0});
  EXPECT_EQ(tr.output().size(), 1u);
  EXPECT_THROW(forward_trace(a, theta.values(), std::vector<double>{1.0}), std::invalid_argument);
}

TEST(Network, JsonRoundTrip) {
  const Architecture a{2, 3, 1};
  ParamVector theta(a);
  Rng rng(3);
  for (double& v : theta.values()) v = rng.normal();
  const auto back = param_vector_from_json(architecture_from_json(to_json(a)), to_json(theta));
  EXPECT_EQ(back.arch().dims(), a.dims());
  for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_EQ(back[i], theta[i]);
  EXPECT_THROW(param_vector_from_json(a, nlohmann::json::array({1.0})), std::invalid_argument);
}

TEST(Network, BinaryRoundTripIsBitExact) {
  const std::vector<double> v{0.1, -0.0, 1e-310, -3.5, 1e300};
  std::stringstream ss;
  write_binary(ss, v);
  EXPECT_EQ(ss.str().size(), 8u + 8u * v.size());
  const auto back = read_binary(ss);
  ASSERT_EQ(back.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back[i]), std::bit_cast<std::uint64_t>(v[i]));
  }
}
