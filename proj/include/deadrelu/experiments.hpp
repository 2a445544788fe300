// Monte Carlo replication of the full pipeline (initialize N trajectories,
// train, select, measure true risk) and comparison of the expected capped
// true risk against the analytic lower bounds.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <nlohmann/json.hpp>

#include "deadrelu/bounds.hpp"
#include "deadrelu/config.hpp"
#include "deadrelu/data_model.hpp"
#include "deadrelu/inactivity.hpp"
#include "deadrelu/parallel.hpp"
#include "deadrelu/rng.hpp"
#include "deadrelu/sgd.hpp"

namespace deadrelu {

/// Derive (arch, N) from a schedule entry instead of giving them explicitly.
struct ScheduleRef {
  std::size_t width = 1;
  double kappa = 0.5;
  double p = 0.5;
};

struct ExperimentConfig {
  DataModelSpec data;
  TrainConfig train;
  std::optional<ScheduleRef> schedule_entry;
  std::size_t replicates = 200;
  std::size_t true_risk_samples = 10000;
  std::size_t floor_samples = 200000;
  double kappa = 0.5;
  std::size_t threads = 1;

  void validate() const {
    if (replicates < 1) throw std::invalid_argument("need at least one replicate");
    if (true_risk_samples < 1) throw std::invalid_argument("true_risk_samples must be positive");
    if (!(kappa > 0.0 && kappa < 1.0)) throw std::invalid_argument("kappa must lie in (0, 1)");
    train.validate();
  }
};

/// Default experiment: kappa = p = 1/2, W = 1 (so D = 8, N = 2), linear-1d
/// data, M = 16, T = 100, gamma = 0.1, uniform(2) init, c = 2, R = 200.
inline ExperimentConfig default_experiment() {
  ExperimentConfig cfg;
  cfg.schedule_entry = ScheduleRef{1, 0.5, 0.5};
  cfg.kappa = 0.5;
  cfg.train.M = 16;
  cfg.train.T = 100;
  cfg.train.schedule = StepSchedule::constant(0.1);
  cfg.train.init = InitSpec::uniform(2.0);
  cfg.train.cube_c = 2.0;
  cfg.train.readout = ReadOut::clip();
  cfg.replicates = 200;
  const auto e = make_schedule_entry(1, 0.5, 0.5);
  cfg.train.arch = architecture_from_entry(e, 1);
  cfg.train.N = e.N;
  return cfg;
}

/// Resolves a schedule reference into train.arch and train.N.
inline void apply_schedule_entry(ExperimentConfig& cfg) {
  if (!cfg.schedule_entry) return;
  const auto& ref = *cfg.schedule_entry;
  const auto e = make_schedule_entry(ref.width, ref.kappa, ref.p);
  if (!e.certified) {
    throw std::invalid_argument("schedule entry for width " + std::to_string(ref.width) +
                                " is not certified");
  }
  cfg.train.arch = architecture_from_entry(e, cfg.data.dim);
  cfg.train.N = e.N;
  cfg.kappa = ref.kappa;
}

// Experiment config file:
//   {
//     "train": {...training config...},
//     "schedule_entry": {"width": 1, "kappa": 0.5, "p": 0.5},   (optional; sets arch and N)
//     "data": {"name": "linear-1d", "dim": 1},
//     "replicates": 200, "true_risk_samples": 10000, "floor_samples": 200000,
//     "kappa": 0.5
//   }
inline ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  ExperimentConfig cfg = default_experiment();
  if (j.contains("data")) {
    cfg.data.name = j.at("data").value("name", cfg.data.name);
    cfg.data.dim = j.at("data").value("dim", cfg.data.dim);
  }
  if (j.contains("train")) {
    nlohmann::json t = to_json(cfg.train);
    t.update(j.at("train"));
    cfg.train = train_config_from_json(t);
  }
  cfg.schedule_entry.reset();
  if (j.contains("schedule_entry")) {
    const auto& s = j.at("schedule_entry");
    cfg.schedule_entry = ScheduleRef{s.value("width", std::size_t{1}), s.value("kappa", 0.5),
                                     s.value("p", 0.5)};
  } else if (!j.contains("train") || !j.at("train").contains("arch")) {
    cfg.schedule_entry = ScheduleRef{1, 0.5, 0.5};
  }
  cfg.replicates = j.value("replicates", cfg.replicates);
  cfg.true_risk_samples = j.value("true_risk_samples", cfg.true_risk_samples);
  cfg.floor_samples = j.value("floor_samples", cfg.floor_samples);
  cfg.kappa = j.value("kappa", cfg.kappa);
  apply_schedule_entry(cfg);
  cfg.validate();
  return cfg;
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  nlohmann::json j{{"train", to_json(cfg.train)},
                   {"data", {{"name", cfg.data.name}, {"dim", cfg.data.dim}}},
                   {"replicates", cfg.replicates},
                   {"true_risk_samples", cfg.true_risk_samples},
                   {"floor_samples", cfg.floor_samples},
                   {"kappa", cfg.kappa}};
  if (cfg.schedule_entry) {
    j["schedule_entry"] = {{"width", cfg.schedule_entry->width},
                           {"kappa", cfg.schedule_entry->kappa},
                           {"p", cfg.schedule_entry->p}};
  }
  return j;
}

struct ReplicateRecord {
  std::size_t replicate = 0;
  std::size_t n = 1;
  std::size_t t = 0;
  bool fallback = false;
  bool in_inactive_region = false;
  /// Every one of the N initializations was in I_a.
  bool all_inits_inactive = false;
  double validation_risk = 0.0;
  double risk = 0.0;
  bool risk_exact = false;
  double risk_half_width = 0.0;
  double capped_risk = 0.0;

  friend bool operator==(const ReplicateRecord&, const ReplicateRecord&) = default;
};

/// One draw of the pipeline, fully determined by (train.seed, replicate).
/// The validation batch uses stream (replicate, trajectory 0, step 0).
inline ReplicateRecord replicate_once(const ExperimentConfig& cfg, const DataModel& data,
                                      std::size_t replicate) {
  const TrainConfig& tc = cfg.train;
  const TrajectorySet ts = run_all(tc, data, replicate);
  const SeedPath base{tc.seed, replicate, 0, 0};
  Rng vrng = make_rng(base, StreamRole::validation);
  const Batch validation = data.sample_batch(tc.M, vrng);
  const Selection sel = select_best(ts, validation, tc.cube_c, tc.readout);

  Rng rrng = make_rng(base, StreamRole::true_risk);
  const TrueRisk tr = estimate_true_risk(tc.arch, sel.theta.values(), data, tc.readout,
                                         cfg.true_risk_samples, rrng);
  ReplicateRecord rec;
  rec.replicate = replicate;
  rec.n = sel.n;
  rec.t = sel.t;
  rec.fallback = sel.fallback;
  rec.in_inactive_region = classify(sel.theta).inactive;
  rec.all_inits_inactive = std::all_of(ts.iterates.begin(), ts.iterates.end(), [](const auto& tr) {
    return classify(tr.front()).inactive;
  });
  rec.validation_risk = sel.risk;
  rec.risk = tr.value;
  rec.risk_exact = tr.exact;
  rec.risk_half_width = tr.half_width;
  rec.capped_risk = std::min(tr.value, 1.0);
  return rec;
}

inline ReplicateRecord replicate_once(const ExperimentConfig& cfg, std::size_t replicate) {
  return replicate_once(cfg, make_data_model(cfg.data), replicate);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for a binomial proportion.
inline Interval wilson_interval(std::size_t hits, std::size_t n, double z = 1.96) {
  if (n == 0) return {0.0, 1.0};
  const double nn = static_cast<double>(n);
  const double ph = static_cast<double>(hits) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double centre = (ph + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(ph * (1.0 - ph) / nn + z2 / (4.0 * nn * nn)) / denom;
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<ReplicateRecord> records;

  // aggregate
  double v_hat = 0.0;
  double v_sd = 0.0;
  double v_se = 0.0;
  Interval v_ci;
  double selected_inactive_freq = 0.0;
  Interval selected_inactive_ci;
  double all_inactive_freq = 0.0;
  Interval all_inactive_ci;

  // analytic
  double p = 0.0;
  std::size_t W = 0;
  std::size_t D = 0;
  std::size_t N = 0;
  double prob_single_exact = 0.0;
  double prob_all_exact = 0.0;
  double prob_all_lower_bound = 0.0;
  FloorEstimate floor;
  double exact_bound = 0.0;
  double kappa_bound = 0.0;

  // checks
  bool kappa_applicable = false;
  bool kappa_pass = true;
  bool exact_bound_pass = true;
  bool consistency_pass = true;
  bool frequency_pass = true;
  std::vector<std::string> warnings;

  bool passed() const { return kappa_pass && exact_bound_pass && consistency_pass && frequency_pass; }
};

using RecordCallback = std::function<void(const ReplicateRecord&)>;

/// Aggregates R replicates. Pass/fail uses a one-sided 3-sigma allowance:
/// V_hat + 3 se >= bound. The kappa bound is only asserted when the
/// analytic probability lower bound reaches kappa. on_record, if set, sees
/// each record as soon as it completes (serialised, in completion order).
inline ExperimentReport run_experiment(const ExperimentConfig& cfg_in,
                                       const RecordCallback& on_record = {}) {
  ExperimentConfig cfg = cfg_in;
  apply_schedule_entry(cfg);
  cfg.validate();
  const DataModel data = make_data_model(cfg.data);

  ExperimentReport rep;
  rep.config = cfg;
  rep.records.resize(cfg.replicates);
  std::mutex callback_mu;
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    rep.records[r] = replicate_once(cfg, data, r);
    if (on_record) {
      std::lock_guard lock(callback_mu);
      on_record(rep.records[r]);
    }
  });

  const double R = static_cast<double>(cfg.replicates);
  double sum = 0.0;
  std::size_t sel_hits = 0, all_hits = 0;
  for (const auto& rec : rep.records) {
    sum += rec.capped_risk;
    sel_hits += rec.in_inactive_region ? 1 : 0;
    all_hits += rec.all_inits_inactive ? 1 : 0;
  }
  rep.v_hat = sum / R;
  double ss = 0.0;
  for (const auto& rec : rep.records) ss += (rec.capped_risk - rep.v_hat) * (rec.capped_risk - rep.v_hat);
  rep.v_sd = cfg.replicates > 1 ? std::sqrt(ss / (R - 1.0)) : 0.0;
  rep.v_se = rep.v_sd / std::sqrt(R);
  rep.v_ci = {std::max(0.0, rep.v_hat - 1.96 * rep.v_se), std::min(1.0, rep.v_hat + 1.96 * rep.v_se)};
  rep.selected_inactive_freq = static_cast<double>(sel_hits) / R;
  rep.selected_inactive_ci = wilson_interval(sel_hits, cfg.replicates);
  rep.all_inactive_freq = static_cast<double>(all_hits) / R;
  rep.all_inactive_ci = wilson_interval(all_hits, cfg.replicates);

  const Architecture& arch = cfg.train.arch;
  const auto q = cfg.train.init.neg_probs(arch);
  rep.p = *std::min_element(q.begin(), q.end());
  rep.W = arch.max_hidden_width();
  rep.D = arch.depth();
  rep.N = cfg.train.N;
  rep.prob_single_exact = inactivity_prob_exact(arch, q).value;
  rep.prob_all_exact = all_runs_inactive_prob(rep.prob_single_exact, rep.N);
  if (rep.p > 0.0 && rep.p < 1.0 && rep.W >= 1) {
    rep.prob_all_lower_bound =
        inactivity_prob_lower_bound(rep.p, static_cast<double>(rep.W), static_cast<double>(rep.D),
                                    static_cast<double>(rep.N))
            .value;
  }
  rep.floor = risk_floor(data, cfg.floor_samples, SeedPath{cfg.train.seed, 0, 0, 0}.derive(
                                                      StreamRole::floor_estimate));
  rep.exact_bound = risk_lower_bound(rep.prob_all_exact, rep.floor.value);
  rep.kappa_bound = cfg.kappa * std::min(rep.floor.value, 1.0);

  const double upper = rep.v_hat + 3.0 * rep.v_se;
  rep.kappa_applicable = rep.prob_all_lower_bound >= cfg.kappa;
  rep.kappa_pass = !rep.kappa_applicable || upper >= rep.kappa_bound;
  rep.exact_bound_pass = upper >= rep.exact_bound;

  for (const auto& rec : rep.records) {
    if (!rec.in_inactive_region) continue;
    const double slack = rec.risk_half_width + rep.floor.half_width;
    if (rec.risk < rep.floor.value - slack) rep.consistency_pass = false;
  }

  const double sigma = std::sqrt(rep.prob_all_exact * (1.0 - rep.prob_all_exact) / R);
  rep.frequency_pass = std::abs(rep.all_inactive_freq - rep.prob_all_exact) <= 4.0 * sigma;

  if (cfg.replicates < 30) {
    rep.warnings.push_back("fewer than 30 replicates; normal confidence intervals are unreliable");
  }
  if (cfg.replicates == 1) rep.warnings.push_back("single replicate; confidence interval is degenerate");
  if (!rep.kappa_applicable) {
    rep.warnings.push_back("analytic lower bound below kappa; kappa bound not asserted");
  }
  if (!rep.floor.exact) rep.warnings.push_back("risk floor estimated by sampling");
  return rep;
}

// --- reporting -------------------------------------------------------------

/// Shortest decimal string that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  if (res.ec != std::errc()) throw std::runtime_error("number formatting failed");
  return std::string(buf, res.ptr);
}

inline constexpr const char* kReplicateCsvHeader = "replicate,n,t,in_inactive_region,risk,capped_risk";

/// One row per replicate, in replicate order.
inline std::string replicates_csv(const ExperimentReport& rep) {
  std::ostringstream os;
  os << kReplicateCsvHeader << '\n';
  for (const auto& r : rep.records) {
    os << r.replicate << ',' << r.n << ',' << r.t << ',' << (r.in_inactive_region ? 1 : 0) << ','
       << format_double(r.risk) << ',' << format_double(r.capped_risk) << '\n';
  }
  return os.str();
}

struct CsvRow {
  std::size_t replicate = 0;
  std::size_t n = 0;
  std::size_t t = 0;
  bool in_inactive_region = false;
  double risk = 0.0;
  double capped_risk = 0.0;
  friend bool operator==(const CsvRow&, const CsvRow&) = default;
};

inline std::vector<CsvRow> parse_replicates_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != kReplicateCsvHeader) {
    throw std::runtime_error("unexpected replicate CSV header");
  }
  std::vector<CsvRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 6) throw std::runtime_error("malformed replicate CSV row: " + line);
    CsvRow r;
    auto parse = [](const std::string& s, auto& out) {
      const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw std::runtime_error("bad CSV field '" + s + "'");
      }
    };
    int flag = 0;
    parse(f[0], r.replicate);
    parse(f[1], r.n);
    parse(f[2], r.t);
    parse(f[3], flag);
    parse(f[4], r.risk);
    parse(f[5], r.capped_risk);
    r.in_inactive_region = flag != 0;
    rows.push_back(r);
  }
  return rows;
}

/// Long format: series,x,value. Running mean of the capped risk and running
/// all-inactive frequency against the constant analytic curves.
inline std::string curves_csv(const ExperimentReport& rep) {
  std::ostringstream os;
  os << "series,x,value\n";
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < rep.records.size(); ++i) {
    sum += rep.records[i].capped_risk;
    hits += rep.records[i].all_inits_inactive ? 1 : 0;
    const std::size_t x = i + 1;
    const double k = static_cast<double>(x);
    os << "running_v_hat," << x << ',' << format_double(sum / k) << '\n';
    os << "running_all_inactive_freq," << x << ',' << format_double(static_cast<double>(hits) / k)
       << '\n';
    os << "exact_bound," << x << ',' << format_double(rep.exact_bound) << '\n';
    os << "kappa_bound," << x << ',' << format_double(rep.kappa_bound) << '\n';
    os << "prob_all_exact," << x << ',' << format_double(rep.prob_all_exact) << '\n';
  }
  return os.str();
}

inline nlohmann::json summary_json(const ExperimentReport& rep) {
  nlohmann::json j;
  j["config"] = to_json(rep.config);
  j["replicates"] = rep.records.size();
  j["v_hat"] = rep.v_hat;
  j["v_sd"] = rep.v_sd;
  j["v_se"] = rep.v_se;
  j["v_ci95"] = {rep.v_ci.lo, rep.v_ci.hi};
  j["selected_inactive_freq"] = rep.selected_inactive_freq;
  j["selected_inactive_ci95"] = {rep.selected_inactive_ci.lo, rep.selected_inactive_ci.hi};
  j["all_inactive_freq"] = rep.all_inactive_freq;
  j["all_inactive_ci95"] = {rep.all_inactive_ci.lo, rep.all_inactive_ci.hi};
  j["analytic"] = {{"p", rep.p},
                   {"W", rep.W},
                   {"D", rep.D},
                   {"N", rep.N},
                   {"prob_single_exact", rep.prob_single_exact},
                   {"prob_all_exact", rep.prob_all_exact},
                   {"prob_all_lower_bound", rep.prob_all_lower_bound},
                   {"risk_floor", rep.floor.value},
                   {"risk_floor_exact", rep.floor.exact},
                   {"risk_floor_half_width", rep.floor.half_width},
                   {"exact_bound", rep.exact_bound},
                   {"kappa_bound", rep.kappa_bound},
                   {"kappa", rep.config.kappa}};
  j["checks"] = {{"allowance", "v_hat + 3 * se >= bound"},
                 {"kappa_applicable", rep.kappa_applicable},
                 {"kappa_pass", rep.kappa_pass},
                 {"exact_bound_pass", rep.exact_bound_pass},
                 {"consistency_pass", rep.consistency_pass},
                 {"frequency_pass", rep.frequency_pass},
                 {"passed", rep.passed()}};
  j["warnings"] = rep.warnings;
  return j;
}

struct ReportPaths {
  std::filesystem::path replicates_csv;
  std::filesystem::path summary_json;
  std::filesystem::path curves_csv;
};

/// Writes replicates.csv, summary.json and curves.csv into `dir`.
inline ReportPaths emit_report(const ExperimentReport& rep, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  ReportPaths paths{dir / "replicates.csv", dir / "summary.json", dir / "curves.csv"};
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    os << text;
    if (!os) throw std::runtime_error("write failed for " + p.string());
  };
  write(paths.replicates_csv, replicates_csv(rep));
  write(paths.summary_json, summary_json(rep).dump(2) + "\n");
  write(paths.curves_csv, curves_csv(rep));
  return paths;
}

// --- inactivity Monte Carlo --------------------------------------------------

struct McInactivity {
  std::size_t samples = 0;
  std::size_t hits = 0;
  double estimate = 0.0;
  double analytic = 0.0;
  bool empty_union = false;
  /// Binomial standard deviation of the estimate under the analytic value.
  double sigma = 0.0;
  bool within_4_sigma = false;
  /// Trajectory re-audit (optional).
  std::size_t audited_trajectories = 0;
  bool persistence_ok = true;
};

inline nlohmann::json to_json(const McInactivity& m) {
  return {{"samples", m.samples},
          {"hits", m.hits},
          {"estimate", m.estimate},
          {"analytic", m.analytic},
          {"empty_union", m.empty_union},
          {"sigma", m.sigma},
          {"half_width_4sigma", 4.0 * m.sigma},
          {"within_4_sigma", m.within_4_sigma},
          {"statistically_indistinguishable", m.within_4_sigma},
          {"audited_trajectories", m.audited_trajectories},
          {"persistence_ok", m.persistence_ok}};
}

struct McAuditOptions {
  /// Short trainings from up to this many inactive draws.
  std::size_t trajectories = 0;
  std::size_t T = 10;
  std::size_t M = 8;
  double gamma = 0.1;
};

/// Fraction of initial draws in I_a, compared with the exact product formula.
inline McInactivity mc_inactivity(const Architecture& arch, const InitSpec& init,
                                  std::size_t samples, std::uint64_t seed,
                                  const McAuditOptions& audit = {}) {
  if (samples < 1) throw std::invalid_argument("need at least one sample");
  init.validate(arch);
  const auto q = init.neg_probs(arch);
  const Probability exact = inactivity_prob_exact(arch, q);

  McInactivity out;
  out.samples = samples;
  out.analytic = exact.value;
  out.empty_union = exact.empty_union;

  Rng rng(SeedPath{seed, 0, 0, 0}.derive(StreamRole::init));
  std::vector<ParamVector> inactive_inits;
  for (std::size_t s = 0; s < samples; ++s) {
    ParamVector theta = init_params(arch, init, rng);
    if (classify(theta).inactive) {
      ++out.hits;
      if (inactive_inits.size() < audit.trajectories) inactive_inits.push_back(std::move(theta));
    }
  }
  const double n = static_cast<double>(samples);
  out.estimate = static_cast<double>(out.hits) / n;
  out.sigma = std::sqrt(out.analytic * (1.0 - out.analytic) / n);
  out.within_4_sigma = std::abs(out.estimate - out.analytic) <= 4.0 * out.sigma;

  if (!inactive_inits.empty() && arch.output_dim() == 1) {
    TrainConfig tc;
    tc.arch = arch;
    tc.N = 1;
    tc.T = audit.T;
    tc.M = audit.M;
    tc.schedule = StepSchedule::constant(audit.gamma);
    tc.init = init;
    tc.seed = seed;
    const DataModel data = make_data_model({"coordinate-mean", arch.input_dim()});
    std::vector<std::vector<ParamVector>> trajs;
    for (std::size_t i = 0; i < inactive_inits.size(); ++i) {
      std::vector<ParamVector> traj{inactive_inits[i]};
      const SeedPath path{seed, i, 1, 0};
      for (std::size_t t = 1; t <= tc.T; ++t) traj.push_back(sgd_step(tc, data, path, t, traj.back()));
      trajs.push_back(std::move(traj));
    }
    out.audited_trajectories = trajs.size();
    out.persistence_ok = persistence_audit(trajs);
  }
  return out;
}

}  // namespace deadrelu
