#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "deadrelu/data_model.hpp"
#include "deadrelu/inactivity.hpp"
#include "deadrelu/sgd.hpp"

using namespace deadrelu;

TEST(Inactivity, ClassifiesNegativeInteriorBlock) {
  const Architecture a{1, 1, 1, 1};  // blocks: [0,2) [2,4) [4,6)
  const std::vector<double> theta{1, 1, -1, -2, 1, 1};
  const InactivityReport r = classify(a, theta);
  EXPECT_TRUE(r.inactive);
  ASSERT_TRUE(r.witness.has_value());
  EXPECT_EQ(*r.witness, 2u);
  EXPECT_TRUE(is_layer_inactive(a, theta, 2));
  EXPECT_FALSE(is_layer_inactive(a, theta, 1));
}

TEST(Inactivity, FirstAndLastBlocksDoNotCount) {
  const Architecture a{1, 1, 1, 1};
  EXPECT_FALSE(in_inactive_region(a, std::vector<double>{-1, -1, 1, 1, 1, 1}));
  EXPECT_FALSE(in_inactive_region(a, std::vector<double>{1, 1, 1, 1, -1, -1}));
  EXPECT_THROW(is_layer_inactive(a, std::vector<double>(6, -1.0), 3), std::out_of_range);
  EXPECT_THROW(is_layer_inactive(a, std::vector<double>(6, -1.0), 0), std::out_of_range);
}

TEST(Inactivity, ShallowNetworksHaveEmptyRegion) {
  EXPECT_FALSE(in_inactive_region(Architecture{1, 1, 1}, std::vector<double>(4, -1.0)));
  EXPECT_FALSE(in_inactive_region(Architecture{1, 1}, std::vector<double>(2, -1.0)));
}

TEST(Inactivity, NegativityIsStrict) {
  const Architecture a{1, 1, 1, 1};
  EXPECT_FALSE(in_inactive_region(a, std::vector<double>{1, 1, -1, 0.0, 1, 1}));
  EXPECT_FALSE(in_inactive_region(a, std::vector<double>{1, 1, -1, -0.0, 1, 1}));
  EXPECT_TRUE(in_inactive_region(a, std::vector<double>{1, 1, -1, -1e-300, 1, 1}));
}

TEST(Inactivity, RealizationIsConstant) {
  const Architecture a{2, 3, 2, 2, 1};
  Rng rng(6);
  ParamVector theta(a);
  for (double& v : theta.values()) v = rng.uniform(-2, 2);
  const auto k = layer_offsets(a);
  for (std::size_t i = k[2]; i < k[3]; ++i) theta[i] = -rng.uniform(0.01, 1);
  std::vector<std::vector<double>> probes;
  for (int i = 0; i < 50; ++i) probes.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});
  EXPECT_TRUE(assert_constant_realization(a, theta.values(), probes, 3));
  theta[k[3] - 1] = 1.0;
  if (!classify(theta).inactive) {
    EXPECT_THROW(assert_constant_realization(a, theta.values(), probes), std::invalid_argument);
  }
}

TEST(Inactivity, RiskFloorClosedForms) {
  EXPECT_DOUBLE_EQ(risk_floor(make_data_model({"linear-1d", 1})).value, 0.25);
  EXPECT_DOUBLE_EQ(risk_floor(make_data_model({"bernoulli-linear", 1})).value, 0.25);
  EXPECT_DOUBLE_EQ(abs_deviation_from_unit_uniform(0.5), 0.25);
  EXPECT_DOUBLE_EQ(abs_deviation_from_unit_uniform(0.0), 0.5);
  EXPECT_DOUBLE_EQ(abs_deviation_from_unit_uniform(2.0), 1.5);
}

TEST(Inactivity, RiskFloorEmpirical) {
  // Constant target: floor is 0.
  DataModel flat = make_data_model({"coordinate-mean", 2});
  flat.target = [](std::span<const double>) { return 0.3; };
  flat.risk_floor.reset();
  const FloorEstimate f0 = risk_floor(flat, 1000, 1);
  EXPECT_FALSE(f0.exact);
  EXPECT_EQ(f0.value, 0.0);

  // Mean of two uniforms: triangular on [0,1], E|T - 1/2| = 1/6.
  const FloorEstimate f2 = risk_floor(make_data_model({"coordinate-mean", 2}), 200000, 2);
  EXPECT_NEAR(f2.value, 1.0 / 6.0, 3.0 * f2.half_width + 1e-3);
}

TEST(Inactivity, PersistenceAuditDetectsCorruption) {
  TrainConfig cfg;
  cfg.arch = Architecture{1, 1, 1, 1};
  cfg.N = 1;
  cfg.T = 10;
  cfg.init = InitSpec{{Marginal::uniform(-2.0, -1.0)}};
  const DataModel data = make_data_model({"linear-1d", 1});
  TrajectorySet ts = run_all(cfg, data);
  ASSERT_TRUE(classify(ts.iterates[0][0]).inactive);
  EXPECT_TRUE(persistence_audit(ts));
  ts.iterates[0][5][2] = 0.5;
  EXPECT_FALSE(persistence_audit(ts));
}
