#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "deadrelu/bounds.hpp"
#include "deadrelu/sgd.hpp"

using namespace deadrelu;

// Reference values below were computed independently at 50 significant digits.

TEST(Bounds, ExactProbabilityNineOnes) {
  const Architecture a{1, 1, 1, 1, 1, 1, 1, 1, 1};
  const auto q = InitSpec::uniform(2.0).neg_probs(a);
  const Probability p = inactivity_prob_exact(a, q);
  EXPECT_FALSE(p.empty_union);
  EXPECT_NEAR(p.value, 0.822021484375, 1e-15);
  EXPECT_NEAR(all_runs_inactive_prob(p.value, 2), 0.675719320774078369140625, 1e-15);
  EXPECT_NEAR(risk_lower_bound(all_runs_inactive_prob(p.value, 2), 0.25),
              0.16892983019351959228515625, 1e-15);
}

TEST(Bounds, ShallowNetworksHaveEmptyUnion) {
  const Architecture a{1, 1, 1};
  const Probability p = inactivity_prob_exact(a, std::vector<double>(4, 0.5));
  EXPECT_TRUE(p.empty_union);
  EXPECT_EQ(p.value, 0.0);
  EXPECT_TRUE(inactivity_prob_lower_bound(0.5, 1, 2, 1).empty_union);
}

TEST(Bounds, LowerBoundNineOnes) {
  EXPECT_NEAR(inactivity_prob_lower_bound(0.5, 1, 8, 2).value, 0.675719320774078369140625, 1e-15);
}

TEST(Bounds, ExactDominatesLowerBound) {
  const Architecture a{1, 2, 3, 2, 1};
  for (double p : {0.1, 0.5, 0.9}) {
    const Probability e = inactivity_prob_exact(a, std::vector<double>(param_count(a), p));
    EXPECT_GE(e.value, inactivity_prob_lower_bound(p, 3, 4, 1).value);
  }
}

TEST(Bounds, TinyProbabilitiesKeepRelativeAccuracy) {
  // 1 - (1 - 2^-60)^3 ~ 3 * 2^-60
  const Probability p = inactivity_prob_lower_bound(std::ldexp(1.0, -10), 2, 5, 1);
  EXPECT_NEAR(p.value / (3.0 * std::ldexp(1.0, -60)), 1.0, 1e-12);
}

TEST(Bounds, KappaLemmaPinnedCase) {
  const KappaCheck k = kappa_bound_check(23, 386, 2, 0.5, 0.5);
  EXPECT_TRUE(k.hypotheses_hold);
  EXPECT_NEAR(k.depth_threshold, 5.5451774444795624, 1e-12);
  EXPECT_NEAR(k.count_threshold, 388.5775148610906, 1e-9);
  EXPECT_NEAR(k.conclusion_value, 0.59645123371973165, 1e-12);
  EXPECT_TRUE(k.conclusion_holds);
}

TEST(Bounds, KappaLemmaHypothesisFailureIsReported) {
  const KappaCheck k = kappa_bound_check(3, 386, 2, 0.5, 0.5);
  EXPECT_FALSE(k.hypotheses_hold);
  EXPECT_THROW(kappa_bound_check(3, 1, 2, 1.5, 0.5), std::domain_error);
}

TEST(Bounds, ScheduleEntries) {
  const std::vector<std::size_t> widths{1, 2, 3};
  const auto s = make_schedule(widths, 0.5, 0.5);
  EXPECT_EQ(s[0].D, 8u);
  EXPECT_EQ(s[0].N, 2u);
  EXPECT_NEAR(s[0].bound_value, 0.675719320774, 1e-12);
  EXPECT_EQ(s[1].D, 269u);
  EXPECT_EQ(s[1].N, 45u);
  EXPECT_NEAR(s[1].bound_value, 0.508330445, 1e-9);
  EXPECT_EQ(s[2].D, 34072u);
  EXPECT_EQ(s[2].N, 2841u);
  EXPECT_NEAR(s[2].bound_value, 0.500117959, 1e-9);
  for (const auto& e : s) {
    EXPECT_TRUE(e.certified);
    EXPECT_GE(e.bound_value, 0.5);
  }
}

TEST(Bounds, ScheduleDepthsGrowAndCountsAreCertified) {
  const std::vector<std::size_t> widths{1, 2, 3, 4, 5, 6};
  const auto s = make_schedule(widths, 0.5, 0.5);
  for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GT(s[i].D, s[i - 1].D);
  for (const auto& e : s) EXPECT_TRUE(e.certified) << e.W;
}

TEST(Bounds, ScheduleOverflowIsInfeasible) {
  const ScheduleEntry e = make_schedule_entry(40, 0.5, 0.5);
  EXPECT_FALSE(e.feasible);
  EXPECT_FALSE(e.certified);
  EXPECT_TRUE(std::isfinite(e.log_depth_threshold));
}

TEST(Bounds, HighNegativityGivesUncertifiedEntry) {
  const ScheduleEntry e = make_schedule_entry(1, 0.5, 0.99);
  EXPECT_EQ(e.D, 3u);
  EXPECT_EQ(e.N, 0u);
  EXPECT_FALSE(e.certified);
}

TEST(Bounds, ArchitectureFromEntry) {
  const ScheduleEntry e = make_schedule_entry(1, 0.5, 0.5);
  const Architecture a = architecture_from_entry(e, 1);
  EXPECT_EQ(a.dims(), (std::vector<std::size_t>{1, 1, 1, 1, 1, 1, 1, 1, 1}));
  EXPECT_THROW(architecture_from_entry(make_schedule_entry(1, 0.5, 0.99), 1), std::invalid_argument);
}

TEST(Bounds, RiskLowerBoundCapsFloor) {
  EXPECT_DOUBLE_EQ(risk_lower_bound(0.5, 3.0), 0.5);
  EXPECT_THROW(risk_lower_bound(1.5, 0.1), std::domain_error);
}
