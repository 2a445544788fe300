// Multi-start SGD: i.i.d. initializations, the plain gradient recursion
// theta_t = theta_{t-1} - gamma_t G(theta_{t-1}) on a fresh batch per step,
// and selection of the iterate with least validation risk inside the
// initialization cube.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "deadrelu/data_model.hpp"
#include "deadrelu/gradient.hpp"
#include "deadrelu/inactivity.hpp"
#include "deadrelu/network.hpp"
#include "deadrelu/parallel.hpp"
#include "deadrelu/rng.hpp"

namespace deadrelu {

/// One-dimensional law of a single initial coordinate.
struct Marginal {
  enum class Kind { uniform, normal };

  Kind kind = Kind::uniform;
  double a = -1.0;  // uniform: lo,  normal: mean
  double b = 1.0;   // uniform: hi,  normal: standard deviation

  static Marginal uniform(double lo, double hi) {
    if (!(lo < hi)) throw std::invalid_argument("uniform marginal requires lo < hi");
    return {Kind::uniform, lo, hi};
  }
  static Marginal normal(double mean, double sd) {
    if (!(sd > 0.0)) throw std::invalid_argument("normal marginal requires sd > 0");
    return {Kind::normal, mean, sd};
  }

  /// P(coordinate < 0).
  double neg_prob() const {
    if (kind == Kind::uniform) return std::clamp(-a / (b - a), 0.0, 1.0);
    return 0.5 * std::erfc(a / (b * std::numbers::sqrt2));
  }

  double sample(Rng& rng) const {
    if (kind == Kind::uniform) return rng.uniform(a, b);
    return a + b * rng.normal();
  }
};

/// Product law over the P(a) coordinates. A single marginal is broadcast
/// to every coordinate; otherwise there must be exactly P(a) of them.
struct InitSpec {
  std::vector<Marginal> marginals{Marginal::uniform(-2.0, 2.0)};

  static InitSpec uniform(double c) {
    if (!(c > 0.0)) throw std::invalid_argument("uniform initialization requires c > 0");
    return InitSpec{{Marginal::uniform(-c, c)}};
  }

  void validate(const Architecture& arch) const {
    if (marginals.empty()) throw std::invalid_argument("initialization has no marginals");
    if (marginals.size() != 1 && marginals.size() != param_count(arch)) {
      throw std::invalid_argument("initialization needs one marginal or exactly P(a) marginals");
    }
  }

  const Marginal& marginal(std::size_t i) const {
    return marginals.size() == 1 ? marginals.front() : marginals.at(i);
  }

  std::vector<double> neg_probs(const Architecture& arch) const {
    validate(arch);
    std::vector<double> q(param_count(arch));
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = marginal(i).neg_prob();
    return q;
  }
};

inline ParamVector init_params(const Architecture& arch, const InitSpec& spec, Rng& rng) {
  spec.validate(arch);
  ParamVector theta(arch);
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = spec.marginal(i).sample(rng);
  return theta;
}

/// Step sizes gamma_t for t = 1, 2, ...; any sign is allowed.
struct StepSchedule {
  enum class Kind { constant, harmonic, custom };

  Kind kind = Kind::constant;
  double gamma = 0.1;
  std::vector<double> values;

  static StepSchedule constant(double g) { return {Kind::constant, g, {}}; }
  static StepSchedule harmonic(double g0) { return {Kind::harmonic, g0, {}}; }
  static StepSchedule custom(std::vector<double> v) { return {Kind::custom, 0.0, std::move(v)}; }

  double at(std::size_t t) const {
    if (t == 0) throw std::out_of_range("step sizes are indexed from t = 1");
    switch (kind) {
      case Kind::constant:
        return gamma;
      case Kind::harmonic:
        return gamma / static_cast<double>(t);
      case Kind::custom:
        if (t > values.size()) throw std::out_of_range("custom schedule shorter than T");
        return values[t - 1];
    }
    return 0.0;
  }
};

struct TrainConfig {
  Architecture arch{1, 1, 1, 1, 1, 1, 1, 1, 1};
  std::size_t N = 2;  // trajectories
  std::size_t T = 100;  // steps per trajectory
  std::size_t M = 16;  // batch size
  StepSchedule schedule = StepSchedule::constant(0.1);
  InitSpec init = InitSpec::uniform(2.0);
  ReadOut readout = ReadOut::clip();
  double cube_c = 2.0;
  std::uint64_t seed = 20240501;

  void validate() const {
    if (arch.output_dim() != 1) throw std::invalid_argument("training requires a_D = 1");
    if (N < 1) throw std::invalid_argument("N must be at least 1");
    if (M < 1) throw std::invalid_argument("M must be at least 1");
    if (!(cube_c > 0.0)) throw std::invalid_argument("cube half-width must be positive");
    if (schedule.kind == StepSchedule::Kind::custom && schedule.values.size() < T) {
      throw std::invalid_argument("custom schedule shorter than T");
    }
    init.validate(arch);
  }
};

inline SeedPath trajectory_path(const TrainConfig& cfg, std::uint64_t replicate,
                                std::uint64_t n) {
  return SeedPath{cfg.seed, replicate, n, 0};
}

/// Batch used for step t of the trajectory at `path`.
inline Batch training_batch(const TrainConfig& cfg, const DataModel& data, SeedPath path,
                            std::size_t t) {
  path.step = t;
  Rng rng = make_rng(path, StreamRole::training_batch);
  return data.sample_batch(cfg.M, rng);
}

/// theta_{t-1} - gamma_t * G(theta_{t-1}) on the step-t batch.
inline ParamVector sgd_step(const TrainConfig& cfg, const DataModel& data, const SeedPath& path,
                            std::size_t t, const ParamVector& prev) {
  const Batch batch = training_batch(cfg, data, path, t);
  const GradReport g = risk_gradient(prev, batch, cfg.readout);
  const double gamma = cfg.schedule.at(t);
  ParamVector next = prev;
  for (std::size_t i = 0; i < next.size(); ++i) next[i] = prev[i] - gamma * g.gradient[i];
  return next;
}

/// Iterates t = 0..T of one trajectory.
inline std::vector<ParamVector> run_trajectory(const TrainConfig& cfg, const DataModel& data,
                                               const SeedPath& path) {
  cfg.validate();
  if (data.dim != cfg.arch.input_dim()) {
    throw std::invalid_argument("data dimension does not match a_0");
  }
  std::vector<ParamVector> iterates;
  iterates.reserve(cfg.T + 1);
  Rng init_rng = make_rng(path, StreamRole::init);
  iterates.push_back(init_params(cfg.arch, cfg.init, init_rng));
  for (std::size_t t = 1; t <= cfg.T; ++t) {
    iterates.push_back(sgd_step(cfg, data, path, t, iterates.back()));
  }
  return iterates;
}

struct TrajectorySet {
  Architecture arch;
  std::uint64_t master_seed = 0;
  std::uint64_t replicate = 0;
  std::size_t T = 0;
  /// iterates[n-1][t] is theta^{n,t}.
  std::vector<std::vector<ParamVector>> iterates;

  std::size_t N() const { return iterates.size(); }
  SeedPath path(std::size_t n) const { return SeedPath{master_seed, replicate, n, 0}; }
};

inline TrajectorySet run_all(const TrainConfig& cfg, const DataModel& data,
                             std::uint64_t replicate = 0, std::size_t threads = 1) {
  cfg.validate();
  TrajectorySet ts{cfg.arch, cfg.seed, replicate, cfg.T, {}};
  ts.iterates.resize(cfg.N);
  parallel_for(cfg.N, threads, [&](std::size_t i) {
    ts.iterates[i] = run_trajectory(cfg, data, trajectory_path(cfg, replicate, i + 1));
  });
  return ts;
}

inline bool persistence_audit(const TrajectorySet& ts) { return persistence_audit(ts.iterates); }

/// Recomputes every step from its re-derived batch and checks the stored
/// iterate matches bitwise.
inline bool recursion_audit(const TrajectorySet& ts, const TrainConfig& cfg,
                            const DataModel& data) {
  for (std::size_t n = 1; n <= ts.N(); ++n) {
    const auto& traj = ts.iterates[n - 1];
    for (std::size_t t = 1; t < traj.size(); ++t) {
      const ParamVector expect = sgd_step(cfg, data, ts.path(n), t, traj[t - 1]);
      if (!detail::same_bits(expect.values(), traj[t].values())) return false;
    }
  }
  return true;
}

inline bool in_cube(std::span<const double> theta, double c) {
  for (double v : theta) {
    if (!(std::abs(v) <= c)) return false;
  }
  return true;
}

struct Selection {
  std::size_t n = 1;
  std::size_t t = 0;
  ParamVector theta;
  double risk = 0.0;
  /// No iterate lay inside the cube; (1, 0) was returned instead.
  bool fallback = false;
};

/// argmin of validation risk over iterates inside [-c, c]^P; ties go to the
/// smallest n, then the smallest t.
inline Selection select_best(const TrajectorySet& ts, const Batch& validation, double c,
                             const ReadOut& readout) {
  if (validation.empty()) throw std::invalid_argument("validation batch is empty");
  if (ts.iterates.empty() || ts.iterates.front().empty()) {
    throw std::invalid_argument("trajectory set is empty");
  }
  Selection best;
  bool found = false;
  for (std::size_t n = 1; n <= ts.N(); ++n) {
    const auto& traj = ts.iterates[n - 1];
    for (std::size_t t = 0; t < traj.size(); ++t) {
      if (!in_cube(traj[t].values(), c)) continue;
      const double r = empirical_risk(traj[t], validation, readout);
      if (!found || r < best.risk) {
        best = Selection{n, t, traj[t], r, false};
        found = true;
      }
    }
  }
  if (!found) {
    const auto& theta = ts.iterates.front().front();
    best = Selection{1, 0, theta, empirical_risk(theta, validation, readout), true};
  }
  return best;
}

struct TrueRisk {
  double value = 0.0;
  /// Closed-form constant-output value was used.
  bool exact = false;
  std::size_t samples = 0;
  /// 95% normal half-width; 0 when exact.
  double half_width = 0.0;
};

/// E|c(N(X)) - E(X)|. For theta in I_a the network is constant and the
/// model's closed form for a constant prediction is used when available;
/// otherwise a Monte Carlo average over n_samples inputs.
inline TrueRisk estimate_true_risk(const Architecture& arch, std::span<const double> theta,
                                   const DataModel& data, const ReadOut& readout,
                                   std::size_t n_samples, Rng& rng) {
  if (n_samples < 1) throw std::invalid_argument("true risk needs at least one sample");
  if (data.constant_risk && in_inactive_region(arch, theta)) {
    const std::vector<double> zero(arch.input_dim(), 0.0);
    const double b = read_out(readout, realize_scalar(arch, theta, zero));
    return TrueRisk{data.constant_risk(b), true, 0, 0.0};
  }
  std::vector<double> x(data.dim);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t s = 0; s < n_samples; ++s) {
    data.sample_input(rng, x);
    const double e = std::abs(read_out(readout, realize_scalar(arch, theta, x)) - data.target(x));
    sum += e;
    sum_sq += e * e;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  double hw = 0.0;
  if (n_samples > 1) {
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    hw = 1.96 * std::sqrt(var / n);
  }
  return TrueRisk{mean, false, n_samples, hw};
}

inline double true_risk(const ParamVector& theta, const DataModel& data, const ReadOut& readout,
                        std::size_t n_samples, std::uint64_t seed = 0) {
  Rng rng(seed);
  return estimate_true_risk(theta.arch(), theta.values(), data, readout, n_samples, rng).value;
}

// --- persistence -----------------------------------------------------------

/// Writes <stem>.bin (every iterate as a length-prefixed binary64 blob, in
/// order n = 1..N, t = 0..T) and <stem>.json (manifest).
inline void save_trajectories(const TrajectorySet& ts, const std::filesystem::path& stem) {
  auto bin = stem;
  bin += ".bin";
  auto manifest = stem;
  manifest += ".json";
  std::ofstream os(bin, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + bin.string());
  for (const auto& traj : ts.iterates) {
    for (const auto& theta : traj) write_binary(os, theta.values());
  }
  nlohmann::json j{{"arch", to_json(ts.arch)},
                   {"N", ts.N()},
                   {"T", ts.T},
                   {"master_seed", ts.master_seed},
                   {"replicate", ts.replicate},
                   {"params", param_count(ts.arch)},
                   {"data", bin.filename().string()},
                   {"format", "u64le length + f64le values per iterate, n-major then t"}};
  std::ofstream ms(manifest);
  if (!ms) throw std::runtime_error("cannot open " + manifest.string());
  ms << j.dump(2) << '\n';
}

inline TrajectorySet load_trajectories(const std::filesystem::path& stem) {
  auto manifest = stem;
  manifest += ".json";
  std::ifstream ms(manifest);
  if (!ms) throw std::runtime_error("cannot open " + manifest.string());
  const auto j = nlohmann::json::parse(ms);
  TrajectorySet ts;
  ts.arch = architecture_from_json(j.at("arch"));
  ts.master_seed = j.at("master_seed").get<std::uint64_t>();
  ts.replicate = j.at("replicate").get<std::uint64_t>();
  ts.T = j.at("T").get<std::size_t>();
  const auto N = j.at("N").get<std::size_t>();
  std::ifstream is(manifest.parent_path() / j.at("data").get<std::string>(), std::ios::binary);
  if (!is) throw std::runtime_error("cannot open trajectory data");
  ts.iterates.resize(N);
  for (auto& traj : ts.iterates) {
    for (std::size_t t = 0; t <= ts.T; ++t) traj.emplace_back(ts.arch, read_binary(is));
  }
  return ts;
}

}  // namespace deadrelu
