// Inactive parameter regions.
//
// Layer j is inactive when every weight and bias of that layer is strictly
// negative. Its inputs are ReLU outputs (j >= 2), hence non-negative, so
// its pre-activations are negative and its ReLU output is exactly zero for
// every network input. The network is then constant in x, and constant in
// every parameter up to and including layer j as long as that block stays
// negative. I_a is the union of these sets over interior layers 2..D-1.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "deadrelu/data_model.hpp"
#include "deadrelu/network.hpp"
#include "deadrelu/rng.hpp"

namespace deadrelu {

/// Every coordinate of layer j (1 <= j <= D-1) is strictly negative. -0.0 is
/// not negative.
inline bool is_layer_inactive(const Architecture& arch, std::span<const double> theta,
                              std::size_t j) {
  if (j < 1 || j >= arch.depth()) {
    throw std::out_of_range("inactive layers are defined for 0 < j < D");
  }
  if (theta.size() != param_count(arch)) {
    throw std::invalid_argument("parameter vector does not match architecture");
  }
  std::size_t begin = 0;
  for (std::size_t i = 1; i < j; ++i) begin += arch.width(i) * (arch.width(i - 1) + 1);
  const std::size_t end = begin + arch.width(j) * (arch.width(j - 1) + 1);
  for (std::size_t i = begin; i < end; ++i) {
    if (!(theta[i] < 0.0)) return false;
  }
  return true;
}

inline bool is_layer_inactive(const ParamVector& theta, std::size_t j) {
  return is_layer_inactive(theta.arch(), theta.values(), j);
}

struct InactivityReport {
  /// layer_inactive[j] for j = 0..D; only entries 2..D-1 are ever set.
  std::vector<bool> layer_inactive;
  bool inactive = false;
  std::optional<std::size_t> witness;
};

inline nlohmann::json to_json(const InactivityReport& r) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t j = 2; j + 1 < r.layer_inactive.size(); ++j) {
    layers.push_back({{"layer", j}, {"inactive", static_cast<bool>(r.layer_inactive[j])}});
  }
  nlohmann::json out{{"inactive", r.inactive}, {"layers", layers}};
  out["witness"] = r.witness ? nlohmann::json(*r.witness) : nlohmann::json(nullptr);
  return out;
}

inline InactivityReport classify(const Architecture& arch, std::span<const double> theta) {
  InactivityReport rep;
  rep.layer_inactive.assign(arch.depth() + 1, false);
  for (std::size_t j = 2; j + 1 <= arch.depth(); ++j) {
    if (is_layer_inactive(arch, theta, j)) {
      rep.layer_inactive[j] = true;
      rep.inactive = true;
      if (!rep.witness) rep.witness = j;
    }
  }
  return rep;
}

inline InactivityReport classify(const ParamVector& theta) {
  return classify(theta.arch(), theta.values());
}

inline bool in_inactive_region(const Architecture& arch, std::span<const double> theta) {
  return classify(arch, theta).inactive;
}

namespace detail {

inline bool same_bits(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(a[i]) != std::bit_cast<std::uint64_t>(b[i])) return false;
  }
  return true;
}

}  // namespace detail

/// Executable form of the constant-realization property. Checks that the
/// output is bitwise the same for every probe and for x = 0, then replaces
/// every coordinate up to the end of the witness layer (the witness block
/// with fresh negative values, everything before it with arbitrary values)
/// and checks the output is unchanged.
inline bool assert_constant_realization(const Architecture& arch, std::span<const double> theta,
                                        std::span<const std::vector<double>> probes,
                                        std::uint64_t seed = 0, std::size_t perturbations = 4) {
  const InactivityReport rep = classify(arch, theta);
  if (!rep.inactive) {
    throw std::invalid_argument("assert_constant_realization requires a parameter in I_a");
  }
  const std::vector<double> zero(arch.input_dim(), 0.0);
  const std::vector<double> ref = realize(arch, theta, zero);
  for (const auto& x : probes) {
    if (!detail::same_bits(realize(arch, theta, x), ref)) return false;
  }

  const auto k = layer_offsets(arch);
  const std::size_t j = *rep.witness;
  Rng rng(seed);
  std::vector<double> other(theta.begin(), theta.end());
  for (std::size_t round = 0; round < perturbations; ++round) {
    for (std::size_t i = 0; i < k[j - 1]; ++i) other[i] = rng.uniform(-4.0, 4.0);
    for (std::size_t i = k[j - 1]; i < k[j]; ++i) other[i] = -rng.uniform(1e-3, 4.0);
    if (!detail::same_bits(realize(arch, other, zero), ref)) return false;
    for (const auto& x : probes) {
      if (!detail::same_bits(realize(arch, other, x), ref)) return false;
    }
  }
  return true;
}

struct FloorEstimate {
  double value = 0.0;
  bool exact = false;
  std::size_t samples = 0;
  /// 95% normal half-width of the sample mean absolute deviation.
  double half_width = 0.0;
};

/// inf_b E|b - E(X)|, attained at a median of E(X). Uses the model's closed
/// form when it has one, else the empirical median of n_samples draws.
inline FloorEstimate risk_floor(const DataModel& data, std::size_t n_samples = 200000,
                                std::uint64_t seed = 0) {
  if (data.risk_floor) return FloorEstimate{*data.risk_floor, true, 0, 0.0};
  if (n_samples < 2) throw std::invalid_argument("risk_floor needs at least two samples");
  Rng rng(seed);
  std::vector<double> b(n_samples);
  for (double& bi : b) bi = data.sample_target(rng);
  std::vector<double> sorted = b;
  auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(n_samples / 2);
  std::nth_element(sorted.begin(), mid, sorted.end());
  const double median = *mid;
  double sum = 0.0, sum_sq = 0.0;
  for (double bi : b) {
    const double d = std::abs(bi - median);
    sum += d;
    sum_sq += d * d;
  }
  const double n = static_cast<double>(n_samples);
  const double mean = sum / n;
  const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
  return FloorEstimate{mean, false, n_samples, 1.96 * std::sqrt(var / n)};
}

/// Every trajectory that starts in I_{a,j} (2 <= j <= D-1) has all its
/// iterates in I_{a,j}.
inline bool persistence_audit(std::span<const std::vector<ParamVector>> trajectories) {
  for (const auto& traj : trajectories) {
    if (traj.empty()) continue;
    const InactivityReport start = classify(traj.front());
    if (!start.inactive) continue;
    for (std::size_t j = 2; j + 1 < start.layer_inactive.size(); ++j) {
      if (!start.layer_inactive[j]) continue;
      for (const auto& theta : traj) {
        if (!is_layer_inactive(theta, j)) return false;
      }
    }
  }
  return true;
}

}  // namespace deadrelu
