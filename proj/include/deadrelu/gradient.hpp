// Empirical squared-error risk of the read-out network and its gradient.
#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "deadrelu/network.hpp"

namespace deadrelu {

/// m samples of dimension d, inputs stored row by row.
class Batch {
 public:
  Batch() = default;

  Batch(std::size_t dim, std::vector<double> inputs, std::vector<double> labels)
      : dim_(dim), inputs_(std::move(inputs)), labels_(std::move(labels)) {
    if (dim_ == 0) throw std::invalid_argument("batch input dimension must be positive");
    if (inputs_.size() != dim_ * labels_.size()) {
      throw std::invalid_argument("batch inputs and labels have inconsistent lengths");
    }
  }

  std::size_t size() const { return labels_.size(); }
  std::size_t dim() const { return dim_; }
  bool empty() const { return labels_.empty(); }
  std::span<const double> input(std::size_t j) const {
    return std::span<const double>(inputs_).subspan(j * dim_, dim_);
  }
  double label(std::size_t j) const { return labels_[j]; }
  std::span<const double> labels() const { return labels_; }

  void push_back(std::span<const double> x, double y) {
    if (x.size() != dim_) throw std::invalid_argument("sample has wrong dimension");
    inputs_.insert(inputs_.end(), x.begin(), x.end());
    labels_.push_back(y);
  }

  /// Checks every input lies in [u, v]^d and every label in [lo, hi].
  bool within(double u, double v, double lo, double hi) const {
    for (double x : inputs_) {
      if (x < u || x > v) return false;
    }
    for (double y : labels_) {
      if (y < lo || y > hi) return false;
    }
    return true;
  }

 private:
  std::size_t dim_ = 1;
  std::vector<double> inputs_;
  std::vector<double> labels_;
};

struct GradReport {
  std::vector<double> gradient;
  double loss = 0.0;
  /// Coordinates whose partial derivative may not exist because a ReLU or
  /// clip argument landed within the kink margin of a breakpoint.
  std::vector<bool> kink_flags;

  bool any_kink() const {
    for (bool b : kink_flags) {
      if (b) return true;
    }
    return false;
  }
};

inline nlohmann::json to_json(const GradReport& g) {
  return {{"loss", g.loss}, {"gradient", g.gradient}, {"kink_flags", g.kink_flags}};
}

namespace detail {

inline void check_risk_inputs(const Architecture& arch, std::span<const double> theta,
                              const Batch& batch) {
  if (arch.output_dim() != 1) throw std::invalid_argument("risk requires output width a_D = 1");
  if (batch.empty()) throw std::invalid_argument("risk requires a nonempty batch");
  if (batch.dim() != arch.input_dim()) {
    throw std::invalid_argument("batch dimension does not match a_0");
  }
  if (theta.size() != param_count(arch)) {
    throw std::invalid_argument("parameter vector does not match architecture");
  }
}

}  // namespace detail

/// (1/m) sum_j |c(N(x_j)) - y_j|^2, summed in ascending index order.
inline double empirical_risk(const Architecture& arch, std::span<const double> theta,
                             const Batch& batch, const ReadOut& readout) {
  detail::check_risk_inputs(arch, theta, batch);
  double sum = 0.0;
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const double r = read_out(readout, realize(arch, theta, batch.input(j))[0]) - batch.label(j);
    sum += r * r;
  }
  return sum / static_cast<double>(batch.size());
}

inline double empirical_risk(const ParamVector& theta, const Batch& batch, const ReadOut& readout) {
  return empirical_risk(theta.arch(), theta.values(), batch, readout);
}

/// Backpropagation through loss, read-out and network. ReLU'(0) = 0 and the
/// clip slope is 0 at its endpoints. A neuron whose pre-activation satisfies
/// |z| <= kink_margin flags its own row and every upstream coordinate; a
/// read-out argument within kink_margin of a clip endpoint flags everything.
/// With the default margin of 0 only exact kinks are flagged.
inline GradReport risk_gradient(const Architecture& arch, std::span<const double> theta,
                                const Batch& batch, const ReadOut& readout,
                                double kink_margin = 0.0) {
  detail::check_risk_inputs(arch, theta, batch);
  const std::size_t depth = arch.depth();
  const auto k = layer_offsets(arch);
  const std::size_t P = k.back();
  const double m = static_cast<double>(batch.size());

  GradReport rep;
  rep.gradient.assign(P, 0.0);
  rep.kink_flags.assign(P, false);

  auto flag_upstream = [&](std::size_t layer, std::size_t row) {
    const std::size_t in = arch.width(layer - 1);
    const std::size_t off = k[layer - 1];
    for (std::size_t c = 0; c < in; ++c) rep.kink_flags[off + row * in + c] = true;
    rep.kink_flags[off + arch.width(layer) * in + row] = true;
    for (std::size_t i = 0; i < off; ++i) rep.kink_flags[i] = true;
  };

  double loss = 0.0;
  std::vector<double> delta, prev;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const auto x = batch.input(s);
    const ForwardTrace tr = forward_trace(arch, theta, x);
    const double out = tr.output()[0];
    const double resid = read_out(readout, out) - batch.label(s);
    loss += resid * resid;

    if (readout.kind == ReadOut::Kind::clip &&
        (std::abs(out - readout.lo) <= kink_margin || std::abs(out - readout.hi) <= kink_margin)) {
      rep.kink_flags.assign(P, true);
    }

    delta.assign(1, 2.0 * resid * read_out_slope(readout, out) / m);
    for (std::size_t layer = depth; layer >= 1; --layer) {
      const std::size_t rows = arch.width(layer);
      const std::size_t cols = arch.width(layer - 1);
      const std::size_t off = k[layer - 1];
      const std::span<const double> in =
          layer == 1 ? x : std::span<const double>(tr.post[layer - 2]);
      double* gw = rep.gradient.data() + off;
      double* gb = gw + rows * cols;
      for (std::size_t r = 0; r < rows; ++r) {
        // Exact zeros contribute nothing; skipping them keeps dead blocks
        // exactly zero even when upstream activations are not finite.
        if (delta[r] == 0.0) continue;
        for (std::size_t c = 0; c < cols; ++c) gw[r * cols + c] += delta[r] * in[c];
        gb[r] += delta[r];
      }
      if (layer == 1) break;

      const double* w = theta.data() + off;
      const auto& z = tr.pre[layer - 2];
      prev.assign(cols, 0.0);
      for (std::size_t c = 0; c < cols; ++c) {
        if (std::abs(z[c]) <= kink_margin) flag_upstream(layer - 1, c);
        if (!(z[c] > 0.0)) continue;
        double acc = 0.0;
        for (std::size_t r = 0; r < rows; ++r) {
          if (delta[r] != 0.0) acc += w[r * cols + c] * delta[r];
        }
        prev[c] = acc;
      }
      delta.swap(prev);
    }
  }
  rep.loss = loss / m;
  return rep;
}

inline GradReport risk_gradient(const ParamVector& theta, const Batch& batch,
                                const ReadOut& readout, double kink_margin = 0.0) {
  return risk_gradient(theta.arch(), theta.values(), batch, readout, kink_margin);
}

/// Central differences (L(theta + h e_i) - L(theta - h e_i)) / 2h.
inline std::vector<double> finite_diff_gradient(const Architecture& arch,
                                                std::span<const double> theta, const Batch& batch,
                                                const ReadOut& readout, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite difference step must be positive");
  std::vector<double> t(theta.begin(), theta.end());
  std::vector<double> g(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double orig = t[i];
    t[i] = orig + h;
    const double up = empirical_risk(arch, t, batch, readout);
    t[i] = orig - h;
    const double down = empirical_risk(arch, t, batch, readout);
    t[i] = orig;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(|a|_inf, |b|_inf); 0 when both are zero.
inline double max_norm_relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale == 0.0 ? 0.0 : diff / scale;
}

}  // namespace deadrelu
