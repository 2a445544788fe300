// Joint laws of (X, Y) used for training and for measuring true risk.
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "deadrelu/gradient.hpp"
#include "deadrelu/rng.hpp"

namespace deadrelu {

/// X uniform on [u, v]^d, target E : [u, v]^d -> [label_lo, label_hi], and
/// labels Y either equal to E(X) or Bernoulli(E(X)). E[Y | X] = E(X) in both
/// cases.
struct DataModel {
  enum class Labels { deterministic, bernoulli };

  std::string name;
  std::size_t dim = 1;
  double u = 0.0;
  double v = 1.0;
  double label_lo = 0.0;
  double label_hi = 1.0;
  Labels labels = Labels::deterministic;
  std::function<double(std::span<const double>)> target;

  /// inf_b E|b - E(X)|, when known in closed form.
  std::optional<double> risk_floor;
  /// b -> E|b - E(X)| for a constant prediction b, when known in closed form.
  std::function<double(double)> constant_risk;

  void validate() const {
    if (dim == 0) throw std::invalid_argument("data model dimension must be positive");
    if (!(u < v)) throw std::invalid_argument("data model input range requires u < v");
    if (!(label_lo < label_hi)) throw std::invalid_argument("data model label range is empty");
    if (!target) throw std::invalid_argument("data model has no target function");
    if (labels == Labels::bernoulli && (label_lo != 0.0 || label_hi != 1.0)) {
      throw std::invalid_argument("bernoulli labels require the label range [0, 1]");
    }
  }

  void sample_input(Rng& rng, std::span<double> x) const {
    for (double& xi : x) xi = rng.uniform(u, v);
  }

  double sample_label(Rng& rng, std::span<const double> x) const {
    const double e = target(x);
    if (labels == Labels::bernoulli) return rng.bernoulli(e) ? 1.0 : 0.0;
    return e;
  }

  Batch sample_batch(std::size_t m, Rng& rng) const {
    std::vector<double> inputs(m * dim);
    std::vector<double> ys(m);
    for (std::size_t j = 0; j < m; ++j) {
      std::span<double> x(inputs.data() + j * dim, dim);
      sample_input(rng, x);
      ys[j] = sample_label(rng, x);
    }
    return Batch(dim, std::move(inputs), std::move(ys));
  }

  /// One draw of the target value E(X).
  double sample_target(Rng& rng) const {
    std::vector<double> x(dim);
    sample_input(rng, x);
    return target(x);
  }
};

/// E|c - U| for U uniform on [0, 1].
inline double abs_deviation_from_unit_uniform(double c) {
  if (c >= 0.0 && c <= 1.0) return 0.5 * (c * c + (1.0 - c) * (1.0 - c));
  return std::abs(c - 0.5);
}

struct DataModelSpec {
  std::string name = "linear-1d";
  std::size_t dim = 1;
};

/// Built-in models:
///   linear-1d        d = 1, E(x) = x, Y = E(X)
///   coordinate-mean  E(x) = mean of the coordinates, Y = E(X)
///   bernoulli-linear d = 1, E(x) = x, Y ~ Bernoulli(x)
inline DataModel make_data_model(const DataModelSpec& spec) {
  DataModel dm;
  dm.name = spec.name;
  if (spec.name == "linear-1d" || spec.name == "bernoulli-linear") {
    if (spec.dim != 1) throw std::invalid_argument(spec.name + " is one-dimensional");
    dm.dim = 1;
    dm.target = [](std::span<const double> x) { return x[0]; };
    dm.labels = spec.name == "linear-1d" ? DataModel::Labels::deterministic
                                         : DataModel::Labels::bernoulli;
    dm.risk_floor = 0.25;
    dm.constant_risk = abs_deviation_from_unit_uniform;
  } else if (spec.name == "coordinate-mean") {
    if (spec.dim == 0) throw std::invalid_argument("coordinate-mean needs dim >= 1");
    dm.dim = spec.dim;
    dm.target = [](std::span<const double> x) {
      double s = 0.0;
      for (double xi : x) s += xi;
      return s / static_cast<double>(x.size());
    };
    if (spec.dim == 1) {
      dm.risk_floor = 0.25;
      dm.constant_risk = abs_deviation_from_unit_uniform;
    }
  } else {
    throw std::invalid_argument("unknown data model '" + spec.name + "'");
  }
  dm.validate();
  return dm;
}

}  // namespace deadrelu
