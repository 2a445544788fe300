// Probability that random initializations land in I_a, the resulting
// lower bounds on expected true risk, and construction of (W, D, N)
// schedules for which those bounds stay above a fixed level kappa.
//
// All powers of the form (1 - q)^e and x^N are evaluated through
// log1p/expm1 so that q ~ 1e-300 or e ~ 1e15 keep full relative accuracy.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "deadrelu/network.hpp"

namespace deadrelu {

struct Probability {
  double value = 0.0;
  /// D <= 2: there is no interior layer, I_a is empty.
  bool empty_union = false;
};

namespace detail {

inline void require_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) throw std::domain_error(std::string(what) + " must lie in [0, 1]");
}

inline void require_open_unit(double x, const char* what) {
  if (!(x > 0.0 && x < 1.0)) throw std::domain_error(std::string(what) + " must lie in (0, 1)");
}

/// log(1 - (1 - q)^e) for q in [0, 1], e >= 0.
inline double log_one_minus_pow_complement(double q, double e) {
  if (q >= 1.0) return e > 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  const double log_inner = e * std::log1p(-q);  // log (1-q)^e
  // log(1 - e^x): log1p branch for small e^x, expm1 branch near x = 0.
  if (log_inner < -0.6931471805599453) return std::log1p(-std::exp(log_inner));
  return std::log(-std::expm1(log_inner));
}

}  // namespace detail

/// P(theta in I_a) for independent coordinates with P(theta_i < 0) =
/// neg_probs[i]:  1 - prod_{j=2}^{D-1} (1 - prod_{i in block j} neg_probs[i]).
inline Probability inactivity_prob_exact(const Architecture& arch,
                                         std::span<const double> neg_probs) {
  if (neg_probs.size() != param_count(arch)) {
    throw std::invalid_argument("need one negativity probability per parameter");
  }
  for (double q : neg_probs) detail::require_unit(q, "negativity probability");
  if (arch.depth() < 3) return Probability{0.0, true};

  const auto k = layer_offsets(arch);
  double log_all_active = 0.0;  // log prod_j (1 - s_j)
  for (std::size_t j = 2; j + 1 <= arch.depth(); ++j) {
    double log_s = 0.0;
    for (std::size_t i = k[j - 1]; i < k[j]; ++i) log_s += std::log(neg_probs[i]);
    log_all_active += std::log1p(-std::exp(log_s));
  }
  return Probability{-std::expm1(log_all_active), false};
}

inline double all_runs_inactive_prob(double prob_single, std::size_t N) {
  detail::require_unit(prob_single, "probability");
  if (N < 1) throw std::domain_error("N must be at least 1");
  if (prob_single == 0.0) return 0.0;
  return std::exp(static_cast<double>(N) * std::log(prob_single));
}

/// [1 - (1 - p^{W(W+1)})^{D-2}]^N.
inline Probability inactivity_prob_lower_bound(double p, double W, double D, double N) {
  detail::require_open_unit(p, "p");
  if (!(W >= 1.0)) throw std::domain_error("W must be at least 1");
  if (!(N >= 1.0)) throw std::domain_error("N must be at least 1");
  if (!(D >= 1.0)) throw std::domain_error("D must be at least 1");
  if (D < 3.0) return Probability{0.0, true};
  const double q = std::exp(W * (W + 1.0) * std::log(p));
  return Probability{std::exp(N * detail::log_one_minus_pow_complement(q, D - 2.0)), false};
}

/// prob * min(floor, 1).
inline double risk_lower_bound(double prob_all_inactive, double floor_C) {
  detail::require_unit(prob_all_inactive, "probability");
  if (!(floor_C >= 0.0)) throw std::domain_error("risk floor must be non-negative");
  return prob_all_inactive * std::min(floor_C, 1.0);
}

struct KappaCheck {
  bool hypotheses_hold = false;
  double conclusion_value = 0.0;
  bool conclusion_holds = false;
  double depth_threshold = 0.0;  // |log p| W p^{-W}
  double count_threshold = 0.0;  // |log kappa| (1 - p^W)^{1-D}
};

/// Hypotheses D >= |log p| W p^{-W} and N <= |log kappa| (1 - p^W)^{1-D};
/// conclusion [1 - (1 - p^W)^D]^N >= kappa. Throws std::logic_error if the
/// hypotheses hold and the conclusion does not.
inline KappaCheck kappa_bound_check(double D, double N, double W, double kappa, double p) {
  if (!(D > 0.0) || !(N > 0.0) || !(W > 0.0)) {
    throw std::domain_error("D, N and W must be positive");
  }
  detail::require_open_unit(kappa, "kappa");
  detail::require_open_unit(p, "p");
  const double log_p = std::log(p);
  const double q = std::exp(W * log_p);
  KappaCheck out;
  out.depth_threshold = std::abs(log_p) * W * std::exp(-W * log_p);
  out.count_threshold = std::abs(std::log(kappa)) * std::exp((1.0 - D) * std::log1p(-q));
  out.hypotheses_hold = D >= out.depth_threshold && N <= out.count_threshold;
  const double log_value = N * detail::log_one_minus_pow_complement(q, D);
  out.conclusion_value = std::exp(log_value);
  out.conclusion_holds = log_value >= std::log(kappa);
  if (out.hypotheses_hold && !out.conclusion_holds) {
    throw std::logic_error("kappa bound violated although its hypotheses hold");
  }
  return out;
}

struct ScheduleEntry {
  std::size_t W = 1;
  std::uint64_t D = 0;
  std::uint64_t N = 0;
  double kappa = 0.5;
  double p = 0.5;
  /// log of |log p| W(W+1) p^{-W(W+1)} + 2, finite even when D is not representable.
  double log_depth_threshold = 0.0;
  /// D fits in a double exactly (D <= 2^53).
  bool feasible = false;
  bool certified = false;
  /// [1 - (1 - p^{W(W+1)})^{D-2}]^N, or 0 when infeasible.
  double bound_value = 0.0;
};

/// D = ceil(|log p| W(W+1) p^{-W(W+1)} + 2), N = floor(|log kappa| (1 - p^{W(W+1)})^{3-D}).
/// An entry is certified when it is feasible, N >= 1 and the kappa bound
/// holds for (D - 2, N, W(W+1)).
inline ScheduleEntry make_schedule_entry(std::size_t W, double kappa, double p) {
  if (W < 1) throw std::domain_error("widths must be at least 1");
  detail::require_open_unit(kappa, "kappa");
  detail::require_open_unit(p, "p");
  ScheduleEntry e;
  e.W = W;
  e.kappa = kappa;
  e.p = p;
  const double exponent = static_cast<double>(W) * static_cast<double>(W + 1);
  const double log_p = std::log(p);
  const double log_core = std::log(std::abs(log_p)) + std::log(exponent) - exponent * log_p;
  // log(e^{log_core} + 2)
  e.log_depth_threshold = log_core > 0.0 ? log_core + std::log1p(2.0 * std::exp(-log_core))
                                         : std::log(std::exp(log_core) + 2.0);
  constexpr double max_exact = 9007199254740992.0;  // 2^53
  if (e.log_depth_threshold > std::log(max_exact)) return e;

  // Same expression as kappa_bound_check's depth threshold, so the ceiling
  // always satisfies it.
  const double core = std::abs(log_p) * exponent * std::exp(-exponent * log_p);
  const double depth = std::ceil(core + 2.0);
  if (depth > max_exact) return e;
  e.feasible = true;
  e.D = static_cast<std::uint64_t>(depth);

  const double q = std::exp(exponent * log_p);
  const double count = std::abs(std::log(kappa)) * std::exp((3.0 - depth) * std::log1p(-q));
  if (!(count < 1.8e19)) return e;
  e.N = static_cast<std::uint64_t>(std::floor(count));
  if (e.N < 1) return e;

  const auto check =
      kappa_bound_check(depth - 2.0, static_cast<double>(e.N), exponent, kappa, p);
  e.certified = check.hypotheses_hold && check.conclusion_holds;
  e.bound_value = inactivity_prob_lower_bound(p, static_cast<double>(W), depth,
                                              static_cast<double>(e.N))
                      .value;
  return e;
}

inline std::vector<ScheduleEntry> make_schedule(std::span<const std::size_t> widths, double kappa,
                                                double p) {
  std::vector<ScheduleEntry> out;
  out.reserve(widths.size());
  for (std::size_t w : widths) out.push_back(make_schedule_entry(w, kappa, p));
  return out;
}

/// (d, W, ..., W, 1) with D - 1 hidden layers of width W.
inline Architecture architecture_from_entry(const ScheduleEntry& entry, std::size_t d) {
  if (!entry.certified) throw std::invalid_argument("schedule entry is not certified");
  if (entry.D > (1u << 24)) throw std::length_error("schedule depth too large to instantiate");
  std::vector<std::size_t> dims;
  dims.reserve(entry.D + 1);
  dims.push_back(d);
  for (std::uint64_t j = 1; j < entry.D; ++j) dims.push_back(entry.W);
  dims.push_back(1);
  return Architecture(std::move(dims));
}

}  // namespace deadrelu
