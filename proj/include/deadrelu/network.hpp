// Fully connected ReLU networks over a flat parameter vector.
//
// Parameter layout: for layer j (1-based) with a_j outputs and a_{j-1}
// inputs, the block starts at offset k_{j-1} and holds the a_j x a_{j-1}
// weight matrix in row-major order followed by the a_j biases.
#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <istream>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace deadrelu {

class Architecture {
 public:
  Architecture() = default;

  explicit Architecture(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.size() < 2) {
      throw std::invalid_argument("architecture needs at least input and output widths");
    }
    for (std::size_t w : dims_) {
      if (w == 0) throw std::invalid_argument("architecture widths must be positive");
    }
  }

  Architecture(std::initializer_list<std::size_t> dims)
      : Architecture(std::vector<std::size_t>(dims)) {}

  std::size_t depth() const { return dims_.size() - 1; }
  std::size_t input_dim() const { return dims_.front(); }
  std::size_t output_dim() const { return dims_.back(); }
  std::size_t width(std::size_t j) const { return dims_.at(j); }
  const std::vector<std::size_t>& dims() const { return dims_; }

  /// Largest hidden width max{a_1, ..., a_{D-1}}; 0 when there is no hidden layer.
  std::size_t max_hidden_width() const {
    std::size_t w = 0;
    for (std::size_t j = 1; j + 1 < dims_.size(); ++j) w = std::max(w, dims_[j]);
    return w;
  }

  friend bool operator==(const Architecture&, const Architecture&) = default;

 private:
  std::vector<std::size_t> dims_;
};

inline std::size_t param_count(const Architecture& arch) {
  std::size_t total = 0;
  for (std::size_t j = 1; j <= arch.depth(); ++j) {
    total += arch.width(j) * (arch.width(j - 1) + 1);
  }
  return total;
}

/// k_0 = 0, k_j = sum_{i<=j} a_i (a_{i-1} + 1). Layer j occupies the
/// zero-based half-open range [k_{j-1}, k_j).
inline std::vector<std::size_t> layer_offsets(const Architecture& arch) {
  std::vector<std::size_t> k(arch.depth() + 1, 0);
  for (std::size_t j = 1; j <= arch.depth(); ++j) {
    k[j] = k[j - 1] + arch.width(j) * (arch.width(j - 1) + 1);
  }
  return k;
}

/// Parameters paired with the architecture they belong to.
class ParamVector {
 public:
  ParamVector() = default;

  explicit ParamVector(Architecture arch)
      : arch_(std::move(arch)), values_(param_count(arch_), 0.0) {}

  ParamVector(Architecture arch, std::vector<double> values)
      : arch_(std::move(arch)), values_(std::move(values)) {
    if (values_.size() != param_count(arch_)) {
      throw std::invalid_argument("parameter vector length " + std::to_string(values_.size()) +
                                  " does not match P(a) = " + std::to_string(param_count(arch_)));
    }
  }

  const Architecture& arch() const { return arch_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }

  /// Parameters of layer j (1-based).
  std::span<const double> layer(std::size_t j) const {
    const auto k = layer_offsets(arch_);
    return std::span<const double>(values_).subspan(k.at(j - 1), k.at(j) - k.at(j - 1));
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  Architecture arch_;
  std::vector<double> values_;
};

struct ReadOut {
  enum class Kind { clip, identity };

  Kind kind = Kind::clip;
  double lo = 0.0;
  double hi = 1.0;

  static ReadOut clip(double lo = 0.0, double hi = 1.0) {
    if (!(lo < hi)) throw std::invalid_argument("clip read-out requires lo < hi");
    return ReadOut{Kind::clip, lo, hi};
  }
  static ReadOut identity() { return ReadOut{Kind::identity, 0.0, 1.0}; }
};

inline double read_out(const ReadOut& r, double y) {
  if (r.kind == ReadOut::Kind::identity) return y;
  return std::max(r.lo, std::min(y, r.hi));
}

/// Derivative of the read-out with the one-sided convention used by
/// backprop: clip is flat at and beyond its endpoints.
inline double read_out_slope(const ReadOut& r, double y) {
  if (r.kind == ReadOut::Kind::identity) return 1.0;
  return (y > r.lo && y < r.hi) ? 1.0 : 0.0;
}

/// True when y sits exactly on a non-differentiable point of the read-out.
inline bool read_out_kink(const ReadOut& r, double y) {
  return r.kind == ReadOut::Kind::clip && (y == r.lo || y == r.hi);
}

inline double relu(double z) { return z > 0.0 ? z : 0.0; }

/// W x + b with W (m x n, row-major) and b read from theta starting at offset.
inline std::vector<double> affine_apply(std::span<const double> theta, std::size_t offset,
                                        std::size_t out_dim, std::size_t in_dim,
                                        std::span<const double> x) {
  if (x.size() != in_dim) throw std::invalid_argument("affine_apply: input has wrong length");
  if (offset + out_dim * in_dim + out_dim > theta.size()) {
    throw std::out_of_range("affine_apply: parameter slice exceeds vector");
  }
  std::vector<double> y(out_dim);
  const double* w = theta.data() + offset;
  const double* b = w + out_dim * in_dim;
  for (std::size_t r = 0; r < out_dim; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < in_dim; ++c) acc += w[r * in_dim + c] * x[c];
    y[r] = acc + b[r];
  }
  return y;
}

/// Intermediate values of one forward pass. pre[l] and post[l] are the
/// pre- and post-activation of layer l+1; the last layer has no ReLU so
/// its post equals its pre.
struct ForwardTrace {
  std::vector<std::vector<double>> pre;
  std::vector<std::vector<double>> post;

  const std::vector<double>& output() const { return post.back(); }
};

inline ForwardTrace forward_trace(const Architecture& arch, std::span<const double> theta,
                                  std::span<const double> x) {
  if (x.size() != arch.input_dim()) {
    throw std::invalid_argument("input dimension " + std::to_string(x.size()) +
                                " does not match a_0 = " + std::to_string(arch.input_dim()));
  }
  if (theta.size() != param_count(arch)) {
    throw std::invalid_argument("parameter vector does not match architecture");
  }
  const std::size_t depth = arch.depth();
  ForwardTrace tr;
  tr.pre.reserve(depth);
  tr.post.reserve(depth);
  std::size_t offset = 0;
  std::span<const double> in = x;
  for (std::size_t j = 1; j <= depth; ++j) {
    tr.pre.push_back(affine_apply(theta, offset, arch.width(j), arch.width(j - 1), in));
    std::vector<double> h = tr.pre.back();
    if (j < depth) {
      for (double& v : h) v = relu(v);
    }
    tr.post.push_back(std::move(h));
    offset += arch.width(j) * (arch.width(j - 1) + 1);
    in = tr.post.back();
  }
  return tr;
}

inline std::vector<double> realize(const Architecture& arch, std::span<const double> theta,
                                   std::span<const double> x) {
  return forward_trace(arch, theta, x).output();
}

inline std::vector<double> realize(const ParamVector& theta, std::span<const double> x) {
  return realize(theta.arch(), theta.values(), x);
}

/// Scalar output of a network with a_D = 1.
inline double realize_scalar(const Architecture& arch, std::span<const double> theta,
                             std::span<const double> x) {
  if (arch.output_dim() != 1) throw std::invalid_argument("network output width must be 1");
  return realize(arch, theta, x)[0];
}

// --- serialization ---------------------------------------------------------

inline nlohmann::json to_json(const Architecture& arch) { return arch.dims(); }

inline Architecture architecture_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("architecture must be a JSON array of integers");
  std::vector<std::size_t> dims;
  for (const auto& e : j) {
    if (!e.is_number_integer() || e.get<long long>() <= 0) {
      throw std::invalid_argument("architecture entries must be positive integers");
    }
    dims.push_back(e.get<std::size_t>());
  }
  return Architecture(std::move(dims));
}

inline nlohmann::json to_json(const ParamVector& theta) {
  return std::vector<double>(theta.values().begin(), theta.values().end());
}

inline ParamVector param_vector_from_json(const Architecture& arch, const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("parameter vector must be a JSON array");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) throw std::invalid_argument("parameter entries must be numbers");
    v.push_back(e.get<double>());
  }
  return ParamVector(arch, std::move(v));
}

namespace detail {

inline void put_le64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(buf), 8);
}

inline std::uint64_t get_le64(std::istream& is) {
  unsigned char buf[8];
  if (!is.read(reinterpret_cast<char*>(buf), 8)) {
    throw std::runtime_error("truncated parameter blob");
  }
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace detail

/// Binary blob: little-endian uint64 length, then that many little-endian
/// IEEE-754 binary64 values.
inline void write_binary(std::ostream& os, std::span<const double> values) {
  detail::put_le64(os, values.size());
  for (double v : values) detail::put_le64(os, std::bit_cast<std::uint64_t>(v));
}

inline std::vector<double> read_binary(std::istream& is) {
  const std::uint64_t n = detail::get_le64(is);
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(std::min<std::uint64_t>(n, 1u << 20)));
  for (std::uint64_t i = 0; i < n; ++i) v.push_back(std::bit_cast<double>(detail::get_le64(is)));
  return v;
}

}  // namespace deadrelu
