#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "deadrelu/experiments.hpp"

using namespace deadrelu;

namespace {

ExperimentConfig quick_experiment(std::size_t replicates) {
  ExperimentConfig cfg = default_experiment();
  cfg.replicates = replicates;
  cfg.train.T = 10;
  cfg.true_risk_samples = 500;
  return cfg;
}

}  // namespace

TEST(DataModels, SamplesStayInRange) {
  Rng rng(1);
  for (const char* name : {"linear-1d", "bernoulli-linear"}) {
    const DataModel d = make_data_model({name, 1});
    EXPECT_TRUE(d.sample_batch(500, rng).within(0, 1, 0, 1)) << name;
  }
  const DataModel cm = make_data_model({"coordinate-mean", 3});
  const Batch b = cm.sample_batch(100, rng);
  EXPECT_TRUE(b.within(0, 1, 0, 1));
  EXPECT_DOUBLE_EQ(b.labels()[0], (b.input(0)[0] + b.input(0)[1] + b.input(0)[2]) / 3.0);
  EXPECT_THROW(make_data_model({"linear-1d", 2}), std::invalid_argument);
  EXPECT_THROW(make_data_model({"no-such-model", 1}), std::invalid_argument);
}

TEST(DataModels, BernoulliLabelsHaveConditionalMeanX) {
  const DataModel d = make_data_model({"bernoulli-linear", 1});
  Rng rng(2);
  const std::size_t bins = 5, n = 100000;
  std::vector<double> ones(bins, 0.0), count(bins, 0.0), xsum(bins, 0.0);
  const Batch b = d.sample_batch(n, rng);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = b.input(i)[0];
    const auto k = std::min(bins - 1, static_cast<std::size_t>(x * bins));
    ones[k] += b.labels()[i];
    xsum[k] += x;
    count[k] += 1.0;
  }
  for (std::size_t k = 0; k < bins; ++k) {
    const double mean_x = xsum[k] / count[k];
    const double se = std::sqrt(mean_x * (1 - mean_x) / count[k]);
    EXPECT_NEAR(ones[k] / count[k], mean_x, 4.0 * se + 0.01) << k;
  }
}

TEST(Experiments, DefaultConfigUsesFirstScheduleEntry) {
  const ExperimentConfig cfg = default_experiment();
  EXPECT_EQ(cfg.train.arch.depth(), 8u);
  EXPECT_EQ(cfg.train.N, 2u);
  EXPECT_EQ(cfg.train.M, 16u);
  EXPECT_EQ(cfg.replicates, 200u);
}

TEST(Experiments, ConfigJsonRoundTrip) {
  ExperimentConfig cfg = quick_experiment(7);
  const ExperimentConfig back = experiment_config_from_json(to_json(cfg));
  EXPECT_EQ(to_json(back), to_json(cfg));
}

TEST(Experiments, ReplicateIsDeterministic) {
  const ExperimentConfig cfg = quick_experiment(1);
  EXPECT_EQ(replicate_once(cfg, 3), replicate_once(cfg, 3));
  EXPECT_NE(replicate_once(cfg, 3).risk, replicate_once(cfg, 4).risk + 1.0);
}

TEST(Experiments, SingleReplicateWarns) {
  const ExperimentReport rep = run_experiment(quick_experiment(1));
  EXPECT_EQ(rep.records.size(), 1u);
  EXPECT_EQ(rep.v_se, 0.0);
  EXPECT_FALSE(rep.warnings.empty());
}

TEST(Experiments, ThreadCountDoesNotChangeResults) {
  ExperimentConfig a = quick_experiment(12);
  ExperimentConfig b = a;
  b.threads = 4;
  EXPECT_EQ(replicates_csv(run_experiment(a)), replicates_csv(run_experiment(b)));
}

TEST(Experiments, CsvRoundTrip) {
  const ExperimentReport rep = run_experiment(quick_experiment(6));
  const auto rows = parse_replicates_csv(replicates_csv(rep));
  ASSERT_EQ(rows.size(), rep.records.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].replicate, rep.records[i].replicate);
    EXPECT_EQ(rows[i].n, rep.records[i].n);
    EXPECT_EQ(rows[i].t, rep.records[i].t);
    EXPECT_EQ(rows[i].in_inactive_region, rep.records[i].in_inactive_region);
    EXPECT_EQ(rows[i].risk, rep.records[i].risk);
    EXPECT_EQ(rows[i].capped_risk, rep.records[i].capped_risk);
  }
  EXPECT_THROW(parse_replicates_csv("bad,header\n"), std::runtime_error);
}

TEST(Experiments, SummaryContents) {
  const ExperimentReport rep = run_experiment(quick_experiment(5));
  const auto j = summary_json(rep);
  EXPECT_EQ(j.at("replicates"), 5);
  EXPECT_NEAR(j.at("analytic").at("prob_all_exact").get<double>(), 0.675719320774078369140625, 1e-15);
  EXPECT_DOUBLE_EQ(j.at("analytic").at("risk_floor").get<double>(), 0.25);
  EXPECT_DOUBLE_EQ(j.at("analytic").at("kappa_bound").get<double>(), 0.125);
  EXPECT_TRUE(j.at("checks").contains("passed"));
}

TEST(Experiments, ManyTrajectoriesMakeTheBoundVanish) {
  ExperimentConfig cfg = quick_experiment(2);
  cfg.schedule_entry.reset();
  cfg.train.N = 1000;
  cfg.train.T = 2;
  const ExperimentReport rep = run_experiment(cfg);
  EXPECT_NEAR(rep.prob_all_exact, std::pow(0.822021484375, 1000), 1e-90);
  EXPECT_GT(rep.prob_all_exact, 0.0);
  EXPECT_FALSE(rep.kappa_applicable);
  EXPECT_TRUE(rep.kappa_pass);
}

TEST(Experiments, WilsonInterval) {
  const Interval i = wilson_interval(50, 100);
  EXPECT_NEAR(i.lo, 0.4038, 1e-4);
  EXPECT_NEAR(i.hi, 0.5962, 1e-4);
  EXPECT_EQ(wilson_interval(0, 0).hi, 1.0);
}

TEST(Experiments, FormatDoubleRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 0.25, 1e-300}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

TEST(McInactivity, NineOnesAgreesWithExactValue) {
  const McInactivity m =
      mc_inactivity(Architecture{1, 1, 1, 1, 1, 1, 1, 1, 1}, InitSpec::uniform(2.0), 20000, 1);
  EXPECT_TRUE(m.within_4_sigma);
  EXPECT_DOUBLE_EQ(m.analytic, 0.822021484375);
}

TEST(McInactivity, WideLayersAreRarelyInactive) {
  const McInactivity m = mc_inactivity(Architecture{1, 10, 10, 1}, InitSpec::uniform(2.0), 1000, 2);
  EXPECT_LT(m.analytic, 1e-30);
  EXPECT_EQ(m.hits, 0u);
  EXPECT_TRUE(m.within_4_sigma);
}

TEST(McInactivity, PositiveSupportNeverInactive) {
  InitSpec init;
  init.marginals = {Marginal::uniform(0.5, 1.0)};
  const McInactivity m = mc_inactivity(Architecture{1, 1, 1, 1}, init, 1000, 3);
  EXPECT_EQ(m.analytic, 0.0);
  EXPECT_EQ(m.hits, 0u);
  EXPECT_TRUE(m.within_4_sigma);
}

TEST(McInactivity, AuditedTrajectoriesPersist) {
  McAuditOptions audit;
  audit.trajectories = 5;
  const McInactivity m = mc_inactivity(Architecture{1, 1, 1, 1}, InitSpec::uniform(2.0), 200, 4, audit);
  EXPECT_EQ(m.audited_trajectories, 5u);
  EXPECT_TRUE(m.persistence_ok);
}
