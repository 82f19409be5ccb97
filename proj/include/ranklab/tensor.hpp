// Copyright 2026 the ranklab authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace ranklab {

class GradTape;

namespace detail {

struct TensorData {
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::optional<std::vector<double>> grad;
  // Id of the tape that recorded the producing op; 0 when none.
  std::uint64_t creator_tape = 0;
};

inline std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

inline std::string shape_str(const std::vector<std::size_t>& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

inline void ensure_grad(TensorData& d) {
  if (!d.grad) d.grad.emplace(d.data.size(), 0.0);
}

}  // namespace detail

/// Dense row-major tensor of 64-bit reals with optional gradient buffer.
/// Tensor is a cheap handle: copies share the underlying storage. Values are
/// written only at construction time or, for leaf parameters, by an owning
/// optimizer; op outputs are never mutated.
class Tensor {
 public:
  Tensor() : d_(std::make_shared<detail::TensorData>()) {}

  static Tensor zeros(std::vector<std::size_t> shape, bool requires_grad = false) {
    return filled(std::move(shape), 0.0, requires_grad);
  }

  static Tensor filled(std::vector<std::size_t> shape, double v,
                       bool requires_grad = false) {
    check_shape(shape);
    Tensor t;
    t.d_->data.assign(detail::shape_numel(shape), v);
    t.d_->shape = std::move(shape);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor from(std::vector<std::size_t> shape, std::vector<double> data,
                     bool requires_grad = false) {
    check_shape(shape);
    if (detail::shape_numel(shape) != data.size()) {
      throw std::invalid_argument("Tensor::from: shape " + detail::shape_str(shape) +
                                  " does not match data length " +
                                  std::to_string(data.size()));
    }
    Tensor t;
    t.d_->shape = std::move(shape);
    t.d_->data = std::move(data);
    t.d_->requires_grad = requires_grad;
    return t;
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from({1}, {v}, requires_grad);
  }

  const std::vector<std::size_t>& shape() const { return d_->shape; }
  std::size_t ndim() const { return d_->shape.size(); }
  std::size_t size() const { return d_->data.size(); }
  std::size_t rows() const { return d_->shape.empty() ? 0 : d_->shape[0]; }
  std::size_t cols() const { return d_->shape.size() < 2 ? 1 : d_->shape[1]; }

  const std::vector<double>& data() const { return d_->data; }
  std::vector<double>& mutable_data() { return d_->data; }

  double at(std::size_t i) const { return d_->data.at(i); }
  double at(std::size_t r, std::size_t c) const {
    return d_->data.at(r * cols() + c);
  }

  /// Value of a single-element tensor.
  double value() const {
    if (size() != 1) {
      throw std::invalid_argument("Tensor::value: tensor has " +
                                  std::to_string(size()) + " elements, expected 1");
    }
    return d_->data[0];
  }

  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool rg) { d_->requires_grad = rg; }

  bool has_grad() const { return d_->grad.has_value(); }
  const std::vector<double>& grad() const {
    if (!d_->grad) throw std::runtime_error("Tensor::grad: no gradient populated");
    return *d_->grad;
  }
  void zero_grad() {
    if (d_->grad) std::fill(d_->grad->begin(), d_->grad->end(), 0.0);
  }
  void clear_grad() { d_->grad.reset(); }

  bool same_storage(const Tensor& o) const { return d_ == o.d_; }

  std::shared_ptr<detail::TensorData> node() const { return d_; }

 private:
  static void check_shape(const std::vector<std::size_t>& shape) {
    if (shape.empty()) throw std::invalid_argument("Tensor: empty shape");
    for (std::size_t d : shape) {
      if (d == 0) throw std::invalid_argument("Tensor: zero dimension in shape");
    }
  }

  std::shared_ptr<detail::TensorData> d_;
};

/// Recorder for reverse-mode differentiation. Constructing a tape makes it
/// the active recorder for the current thread; ops executed while it is
/// active append their adjoint rules in creation order, which backward()
/// replays in reverse. One training step owns one tape.
class GradTape {
 public:
  GradTape() : id_(next_id()++) { stack().push_back(this); }
  ~GradTape() { stack().pop_back(); }
  GradTape(const GradTape&) = delete;
  GradTape& operator=(const GradTape&) = delete;

  static GradTape* active() {
    return stack().empty() ? nullptr : stack().back();
  }

  std::size_t size() const { return entries_.size(); }
  std::uint64_t id() const { return id_; }

  void record(const std::shared_ptr<detail::TensorData>& out,
              std::function<void()> backward_fn) {
    out->creator_tape = id_;
    entries_.push_back(Entry{out, std::move(backward_fn)});
  }

 private:
  struct Entry {
    std::shared_ptr<detail::TensorData> out;
    std::function<void()> fn;
  };

  static std::vector<GradTape*>& stack() {
    thread_local std::vector<GradTape*> s;
    return s;
  }

  static std::uint64_t& next_id() {
    static std::uint64_t n = 1;
    return n;
  }

  const std::uint64_t id_;
  std::vector<Entry> entries_;

  friend void backward(const Tensor& loss, GradTape& tape);
};

/// Populates gradients of `loss` w.r.t. every requires_grad tensor reachable
/// on `tape`. The loss must be a single-element tensor produced while the
/// tape was active.
inline void backward(const Tensor& loss, GradTape& tape) {
  if (loss.size() != 1) {
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                detail::shape_str(loss.shape()));
  }
  if (loss.node()->creator_tape != tape.id()) {
    throw std::invalid_argument("backward: loss was not produced on this tape");
  }
  detail::ensure_grad(*loss.node());
  (*loss.node()->grad)[0] = 1.0;
  for (auto it = tape.entries_.rbegin(); it != tape.entries_.rend(); ++it) {
    if (it->out->grad) it->fn();
  }
}

namespace detail {

inline bool want_record(const Tensor& out) {
  return GradTape::active() != nullptr && out.requires_grad();
}

inline void record(const Tensor& out, std::function<void()> fn) {
  GradTape::active()->record(out.node(), std::move(fn));
}

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
}

inline void check_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) {
    throw std::invalid_argument(std::string(op) + ": expected 2-D tensor, got " +
                                shape_str(t.shape()));
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise and arithmetic ops
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i < n; ++i)
    out.mutable_data()[i] = a.data()[i] + b.data()[i];
  if (detail::want_record(out)) {
    auto ad = a.node(), bd = b.node(), od = out.node();
    detail::record(out, [ad, bd, od] {
      const auto& g = *od->grad;
      if (ad->requires_grad) {
        detail::ensure_grad(*ad);
        for (std::size_t i = 0; i < g.size(); ++i) (*ad->grad)[i] += g[i];
      }
      if (bd->requires_grad) {
        detail::ensure_grad(*bd);
        for (std::size_t i = 0; i < g.size(); ++i) (*bd->grad)[i] += g[i];
      }
    });
  }
  return out;
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.mutable_data()[i] = a.data()[i] - b.data()[i];
  if (detail::want_record(out)) {
    auto ad = a.node(), bd = b.node(), od = out.node();
    detail::record(out, [ad, bd, od] {
      const auto& g = *od->grad;
      if (ad->requires_grad) {
        detail::ensure_grad(*ad);
        for (std::size_t i = 0; i < g.size(); ++i) (*ad->grad)[i] += g[i];
      }
      if (bd->requires_grad) {
        detail::ensure_grad(*bd);
        for (std::size_t i = 0; i < g.size(); ++i) (*bd->grad)[i] -= g[i];
      }
    });
  }
  return out;
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape(), a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.mutable_data()[i] = a.data()[i] * b.data()[i];
  if (detail::want_record(out)) {
    auto ad = a.node(), bd = b.node(), od = out.node();
    detail::record(out, [ad, bd, od] {
      const auto& g = *od->grad;
      if (ad->requires_grad) {
        detail::ensure_grad(*ad);
        for (std::size_t i = 0; i < g.size(); ++i) (*ad->grad)[i] += g[i] * bd->data[i];
      }
      if (bd->requires_grad) {
        detail::ensure_grad(*bd);
        for (std::size_t i = 0; i < g.size(); ++i) (*bd->grad)[i] += g[i] * ad->data[i];
      }
    });
  }
  return out;
}

inline Tensor scale(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i) out.mutable_data()[i] = x.data()[i] * c;
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od, c] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < g.size(); ++i) (*xd->grad)[i] += g[i] * c;
    });
  }
  return out;
}

inline Tensor add_scalar(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i) out.mutable_data()[i] = x.data()[i] + c;
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < g.size(); ++i) (*xd->grad)[i] += g[i];
    });
  }
  return out;
}

/// Adds a length-n vector to every row of an m-by-n matrix.
inline Tensor add_rowvec(const Tensor& x, const Tensor& b) {
  detail::check_2d(x, "add_rowvec");
  if (b.ndim() != 1 || b.size() != x.cols()) {
    throw std::invalid_argument("add_rowvec: bias shape " + detail::shape_str(b.shape()) +
                                " does not match row width " + std::to_string(x.cols()));
  }
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad() || b.requires_grad());
  const std::size_t m = x.rows(), n = x.cols();
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c)
      out.mutable_data()[r * n + c] = x.data()[r * n + c] + b.data()[c];
  if (detail::want_record(out)) {
    auto xd = x.node(), bd = b.node(), od = out.node();
    detail::record(out, [xd, bd, od, m, n] {
      const auto& g = *od->grad;
      if (xd->requires_grad) {
        detail::ensure_grad(*xd);
        for (std::size_t i = 0; i < g.size(); ++i) (*xd->grad)[i] += g[i];
      }
      if (bd->requires_grad) {
        detail::ensure_grad(*bd);
        for (std::size_t r = 0; r < m; ++r)
          for (std::size_t c = 0; c < n; ++c) (*bd->grad)[c] += g[r * n + c];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Matrix products and reductions
// ---------------------------------------------------------------------------

/// Standard matrix product of an m-by-k and a k-by-n matrix.
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::check_2d(a, "matmul");
  detail::check_2d(b, "matmul");
  if (a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                detail::shape_str(a.shape()) + " vs " +
                                detail::shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = Tensor::zeros({m, n}, a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a.data()[i * k + p];
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j)
        out.mutable_data()[i * n + j] += av * b.data()[p * n + j];
    }
  }
  if (detail::want_record(out)) {
    auto ad = a.node(), bd = b.node(), od = out.node();
    detail::record(out, [ad, bd, od, m, k, n] {
      const auto& g = *od->grad;
      if (ad->requires_grad) {
        detail::ensure_grad(*ad);
        // dA += G * B^T
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bd->data[p * n + j];
            (*ad->grad)[i * k + p] += s;
          }
      }
      if (bd->requires_grad) {
        detail::ensure_grad(*bd);
        // dB += A^T * G
        for (std::size_t p = 0; p < k; ++p)
          for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += ad->data[i * k + p] * g[i * n + j];
            (*bd->grad)[p * n + j] += s;
          }
      }
    });
  }
  return out;
}

/// a * b^T for a m-by-k and b n-by-k.
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  detail::check_2d(a, "matmul_nt");
  detail::check_2d(b, "matmul_nt");
  if (a.cols() != b.cols()) {
    throw std::invalid_argument("matmul_nt: widths disagree: " +
                                detail::shape_str(a.shape()) + " vs " +
                                detail::shape_str(b.shape()));
  }
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Tensor out = Tensor::zeros({m, n}, a.requires_grad() || b.requires_grad());
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += a.data()[i * k + p] * b.data()[j * k + p];
      out.mutable_data()[i * n + j] = s;
    }
  if (detail::want_record(out)) {
    auto ad = a.node(), bd = b.node(), od = out.node();
    detail::record(out, [ad, bd, od, m, k, n] {
      const auto& g = *od->grad;
      if (ad->requires_grad) {
        detail::ensure_grad(*ad);
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * bd->data[j * k + p];
            (*ad->grad)[i * k + p] += s;
          }
      }
      if (bd->requires_grad) {
        detail::ensure_grad(*bd);
        for (std::size_t j = 0; j < n; ++j)
          for (std::size_t p = 0; p < k; ++p) {
            double s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += g[i * n + j] * ad->data[i * k + p];
            (*bd->grad)[j * k + p] += s;
          }
      }
    });
  }
  return out;
}

/// Inner product of two equal-length vectors, as a scalar tensor.
inline Tensor dot(const Tensor& u, const Tensor& v) {
  if (u.ndim() != 1 || v.ndim() != 1 || u.size() != v.size()) {
    throw std::invalid_argument("dot: expected equal-length vectors, got " +
                                detail::shape_str(u.shape()) + " and " +
                                detail::shape_str(v.shape()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += u.data()[i] * v.data()[i];
  Tensor out = Tensor::scalar(s);
  out.set_requires_grad(u.requires_grad() || v.requires_grad());
  if (detail::want_record(out)) {
    auto ud = u.node(), vd = v.node(), od = out.node();
    detail::record(out, [ud, vd, od] {
      const double g = (*od->grad)[0];
      if (ud->requires_grad) {
        detail::ensure_grad(*ud);
        for (std::size_t i = 0; i < ud->data.size(); ++i) (*ud->grad)[i] += g * vd->data[i];
      }
      if (vd->requires_grad) {
        detail::ensure_grad(*vd);
        for (std::size_t i = 0; i < vd->data.size(); ++i) (*vd->grad)[i] += g * ud->data[i];
      }
    });
  }
  return out;
}

inline Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.data()) s += v;
  Tensor out = Tensor::scalar(s);
  out.set_requires_grad(x.requires_grad());
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const double g = (*od->grad)[0];
      for (std::size_t i = 0; i < xd->data.size(); ++i) (*xd->grad)[i] += g;
    });
  }
  return out;
}

inline Tensor mean_all(const Tensor& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.size()));
}

/// Row sums of an m-by-n matrix, as a length-m vector.
inline Tensor sum_rows(const Tensor& x) {
  detail::check_2d(x, "sum_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m}, x.requires_grad());
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += x.data()[r * n + c];
    out.mutable_data()[r] = s;
  }
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od, m, n] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < n; ++c) (*xd->grad)[r * n + c] += g[r];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Nonlinearities
// ---------------------------------------------------------------------------

inline Tensor relu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.mutable_data()[i] = x.data()[i] > 0.0 ? x.data()[i] : 0.0;
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xd->data[i] > 0.0) (*xd->grad)[i] += g[i];
    });
  }
  return out;
}

/// Gaussian error linear unit, exact erf form: x * Phi(x).
inline Tensor gelu(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  constexpr double inv_sqrt2 = 0.7071067811865475244;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = x.data()[i];
    out.mutable_data()[i] = 0.5 * v * (1.0 + std::erf(v * inv_sqrt2));
  }
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      constexpr double is2 = 0.7071067811865475244;
      constexpr double inv_sqrt2pi = 0.3989422804014326779;
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double v = xd->data[i];
        const double cdf = 0.5 * (1.0 + std::erf(v * is2));
        const double pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
        (*xd->grad)[i] += g[i] * (cdf + v * pdf);
      }
    });
  }
  return out;
}

inline Tensor tanh_t(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i) out.mutable_data()[i] = std::tanh(x.data()[i]);
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < g.size(); ++i) {
        const double y = od->data[i];
        (*xd->grad)[i] += g[i] * (1.0 - y * y);
      }
    });
  }
  return out;
}

inline Tensor exp_t(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i) out.mutable_data()[i] = std::exp(x.data()[i]);
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < g.size(); ++i) (*xd->grad)[i] += g[i] * od->data[i];
    });
  }
  return out;
}

/// Natural log; inputs must be strictly positive (clamp first if needed).
inline Tensor log_t(const Tensor& x) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(x.data()[i] > 0.0)) {
      throw std::invalid_argument("log_t: non-positive input at index " + std::to_string(i));
    }
    out.mutable_data()[i] = std::log(x.data()[i]);
  }
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < g.size(); ++i) (*xd->grad)[i] += g[i] / xd->data[i];
    });
  }
  return out;
}

/// max(x, c) elementwise; gradient passes only where x > c.
inline Tensor clamp_min(const Tensor& x, double c) {
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.mutable_data()[i] = x.data()[i] > c ? x.data()[i] : c;
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od, c] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < g.size(); ++i)
        if (xd->data[i] > c) (*xd->grad)[i] += g[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalizations
// ---------------------------------------------------------------------------

/// Row-wise softmax of an m-by-n matrix, stabilized by row-max subtraction.
inline Tensor softmax_rows(const Tensor& x) {
  detail::check_2d(x, "softmax_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  for (std::size_t r = 0; r < m; ++r) {
    double mx = x.data()[r * n];
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, x.data()[r * n + c]);
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      const double e = std::exp(x.data()[r * n + c] - mx);
      out.mutable_data()[r * n + c] = e;
      s += e;
    }
    for (std::size_t c = 0; c < n; ++c) out.mutable_data()[r * n + c] /= s;
  }
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od, m, n] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t r = 0; r < m; ++r) {
        double dotgy = 0.0;
        for (std::size_t c = 0; c < n; ++c) dotgy += g[r * n + c] * od->data[r * n + c];
        for (std::size_t c = 0; c < n; ++c)
          (*xd->grad)[r * n + c] += od->data[r * n + c] * (g[r * n + c] - dotgy);
      }
    });
  }
  return out;
}

/// Per-row zero-mean unit-variance normalization over the last dimension,
/// followed by the affine transform gain * xhat + bias.
inline Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias,
                         double eps = 1e-12) {
  const std::size_t h = gain.size();
  if (bias.size() != h) {
    throw std::invalid_argument("layer_norm: gain/bias lengths differ: " +
                                std::to_string(h) + " vs " + std::to_string(bias.size()));
  }
  if (x.size() % h != 0 ||
      (x.ndim() >= 1 && x.shape().back() != h)) {
    throw std::invalid_argument("layer_norm: last dimension of " +
                                detail::shape_str(x.shape()) +
                                " does not match gain length " + std::to_string(h));
  }
  const std::size_t m = x.size() / h;
  Tensor out = Tensor::zeros(x.shape(),
                             x.requires_grad() || gain.requires_grad() || bias.requires_grad());
  std::vector<double> inv_sigma(m), mu(m);
  for (std::size_t r = 0; r < m; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < h; ++c) mean += x.data()[r * h + c];
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (std::size_t c = 0; c < h; ++c) {
      const double d = x.data()[r * h + c] - mean;
      var += d * d;
    }
    var /= static_cast<double>(h);
    mu[r] = mean;
    inv_sigma[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < h; ++c) {
      const double xhat = (x.data()[r * h + c] - mean) * inv_sigma[r];
      out.mutable_data()[r * h + c] = gain.data()[c] * xhat + bias.data()[c];
    }
  }
  if (detail::want_record(out)) {
    auto xd = x.node(), gd = gain.node(), bd = bias.node(), od = out.node();
    detail::record(out, [xd, gd, bd, od, m, h, mu, inv_sigma] {
      const auto& g = *od->grad;
      for (std::size_t r = 0; r < m; ++r) {
        // Recompute xhat for the row.
        std::vector<double> xhat(h);
        for (std::size_t c = 0; c < h; ++c)
          xhat[c] = (xd->data[r * h + c] - mu[r]) * inv_sigma[r];
        if (gd->requires_grad) {
          detail::ensure_grad(*gd);
          for (std::size_t c = 0; c < h; ++c) (*gd->grad)[c] += g[r * h + c] * xhat[c];
        }
        if (bd->requires_grad) {
          detail::ensure_grad(*bd);
          for (std::size_t c = 0; c < h; ++c) (*bd->grad)[c] += g[r * h + c];
        }
        if (xd->requires_grad) {
          detail::ensure_grad(*xd);
          double mean_gg = 0.0, mean_ggx = 0.0;
          for (std::size_t c = 0; c < h; ++c) {
            const double gg = g[r * h + c] * gd->data[c];
            mean_gg += gg;
            mean_ggx += gg * xhat[c];
          }
          mean_gg /= static_cast<double>(h);
          mean_ggx /= static_cast<double>(h);
          for (std::size_t c = 0; c < h; ++c) {
            const double gg = g[r * h + c] * gd->data[c];
            (*xd->grad)[r * h + c] += inv_sigma[r] * (gg - mean_gg - xhat[c] * mean_ggx);
          }
        }
      }
    });
  }
  return out;
}

/// Scales each row of a matrix to unit L2 norm; all-zero rows stay zero.
inline Tensor normalize_rows(const Tensor& x) {
  detail::check_2d(x, "normalize_rows");
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  std::vector<double> norms(m, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < n; ++c) s += x.data()[r * n + c] * x.data()[r * n + c];
    norms[r] = std::sqrt(s);
    if (norms[r] > 0.0)
      for (std::size_t c = 0; c < n; ++c)
        out.mutable_data()[r * n + c] = x.data()[r * n + c] / norms[r];
  }
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od, m, n, norms] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t r = 0; r < m; ++r) {
        if (norms[r] == 0.0) continue;
        double gy = 0.0;
        for (std::size_t c = 0; c < n; ++c) gy += g[r * n + c] * od->data[r * n + c];
        for (std::size_t c = 0; c < n; ++c)
          (*xd->grad)[r * n + c] += (g[r * n + c] - gy * od->data[r * n + c]) / norms[r];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Indexing
// ---------------------------------------------------------------------------

/// Gathers rows of a 2-D tensor by index; backward scatter-adds.
inline Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx) {
  detail::check_2d(x, "gather_rows");
  if (idx.empty()) throw std::invalid_argument("gather_rows: empty index list");
  const std::size_t n = x.cols();
  for (std::size_t r : idx) {
    if (r >= x.rows()) {
      throw std::invalid_argument("gather_rows: index " + std::to_string(r) +
                                  " out of range for " + detail::shape_str(x.shape()));
    }
  }
  Tensor out = Tensor::zeros({idx.size(), n}, x.requires_grad());
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t c = 0; c < n; ++c)
      out.mutable_data()[i * n + c] = x.data()[idx[i] * n + c];
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od, idx, n] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < idx.size(); ++i)
        for (std::size_t c = 0; c < n; ++c) (*xd->grad)[idx[i] * n + c] += g[i * n + c];
    });
  }
  return out;
}

/// Column slice [off, off+width) of a 2-D tensor.
inline Tensor slice_cols(const Tensor& x, std::size_t off, std::size_t width) {
  detail::check_2d(x, "slice_cols");
  if (off + width > x.cols() || width == 0) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(off) + ", " +
                                std::to_string(off + width) + ") out of bounds for " +
                                detail::shape_str(x.shape()));
  }
  const std::size_t m = x.rows(), n = x.cols();
  Tensor out = Tensor::zeros({m, width}, x.requires_grad());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < width; ++c)
      out.mutable_data()[r * width + c] = x.data()[r * n + off + c];
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od, m, n, off, width] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t r = 0; r < m; ++r)
        for (std::size_t c = 0; c < width; ++c)
          (*xd->grad)[r * n + off + c] += g[r * width + c];
    });
  }
  return out;
}

/// Horizontal concatenation of 2-D tensors with equal row counts.
inline Tensor concat_cols(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const std::size_t m = xs[0].rows();
  std::size_t total = 0;
  bool rg = false;
  for (const Tensor& t : xs) {
    detail::check_2d(t, "concat_cols");
    if (t.rows() != m)
      throw std::invalid_argument("concat_cols: row counts differ");
    total += t.cols();
    rg = rg || t.requires_grad();
  }
  Tensor out = Tensor::zeros({m, total}, rg);
  std::size_t off = 0;
  for (const Tensor& t : xs) {
    for (std::size_t r = 0; r < m; ++r)
      for (std::size_t c = 0; c < t.cols(); ++c)
        out.mutable_data()[r * total + off + c] = t.data()[r * t.cols() + c];
    off += t.cols();
  }
  if (detail::want_record(out)) {
    std::vector<std::shared_ptr<detail::TensorData>> parts;
    parts.reserve(xs.size());
    for (const Tensor& t : xs) parts.push_back(t.node());
    auto od = out.node();
    detail::record(out, [parts, od, m, total] {
      const auto& g = *od->grad;
      std::size_t off2 = 0;
      for (const auto& p : parts) {
        const std::size_t w = p->shape[1];
        if (p->requires_grad) {
          detail::ensure_grad(*p);
          for (std::size_t r = 0; r < m; ++r)
            for (std::size_t c = 0; c < w; ++c)
              (*p->grad)[r * w + c] += g[r * total + off2 + c];
        }
        off2 += w;
      }
    });
  }
  return out;
}

/// Views a 1-D vector as a single-row matrix (copy).
inline Tensor as_row(const Tensor& x) {
  if (x.ndim() != 1) {
    throw std::invalid_argument("as_row: expected 1-D tensor, got " +
                                detail::shape_str(x.shape()));
  }
  Tensor out = Tensor::from({1, x.size()}, x.data());
  out.set_requires_grad(x.requires_grad());
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < g.size(); ++i) (*xd->grad)[i] += g[i];
    });
  }
  return out;
}

/// Collects scalar tensors into a 1-D vector.
inline Tensor stack_scalars(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw std::invalid_argument("stack_scalars: no inputs");
  bool rg = false;
  Tensor out = Tensor::zeros({xs.size()});
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (xs[i].size() != 1) {
      throw std::invalid_argument("stack_scalars: input " + std::to_string(i) +
                                  " has shape " + detail::shape_str(xs[i].shape()));
    }
    out.mutable_data()[i] = xs[i].data()[0];
    rg = rg || xs[i].requires_grad();
  }
  out.set_requires_grad(rg);
  if (detail::want_record(out)) {
    std::vector<std::shared_ptr<detail::TensorData>> parts;
    for (const Tensor& t : xs) parts.push_back(t.node());
    auto od = out.node();
    detail::record(out, [parts, od] {
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < parts.size(); ++i) {
        if (!parts[i]->requires_grad) continue;
        detail::ensure_grad(*parts[i]);
        (*parts[i]->grad)[0] += g[i];
      }
    });
  }
  return out;
}

/// Reinterprets a single row as a 1-D vector (copy).
inline Tensor row_as_vector(const Tensor& x, std::size_t r) {
  detail::check_2d(x, "row_as_vector");
  if (r >= x.rows()) {
    throw std::invalid_argument("row_as_vector: row " + std::to_string(r) +
                                " out of range for " + detail::shape_str(x.shape()));
  }
  const std::size_t n = x.cols();
  Tensor out = Tensor::zeros({n}, x.requires_grad());
  for (std::size_t c = 0; c < n; ++c) out.mutable_data()[c] = x.data()[r * n + c];
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od, r, n] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t c = 0; c < n; ++c) (*xd->grad)[r * n + c] += g[c];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Similarities and losses
// ---------------------------------------------------------------------------

/// Cosine similarity of two vectors as a scalar tensor. A zero-norm input
/// yields 0 by convention (gradient 0 on that branch), so degenerate
/// embeddings never propagate NaN.
inline Tensor cosine(const Tensor& u, const Tensor& v) {
  if (u.ndim() != 1 || v.ndim() != 1 || u.size() != v.size()) {
    throw std::invalid_argument("cosine: expected equal-length vectors, got " +
                                detail::shape_str(u.shape()) + " and " +
                                detail::shape_str(v.shape()));
  }
  double duv = 0.0, nu2 = 0.0, nv2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    duv += u.data()[i] * v.data()[i];
    nu2 += u.data()[i] * u.data()[i];
    nv2 += v.data()[i] * v.data()[i];
  }
  const double nu = std::sqrt(nu2), nv = std::sqrt(nv2);
  const double c = (nu == 0.0 || nv == 0.0) ? 0.0 : duv / (nu * nv);
  Tensor out = Tensor::scalar(c);
  out.set_requires_grad(u.requires_grad() || v.requires_grad());
  if (detail::want_record(out)) {
    auto ud = u.node(), vd = v.node(), od = out.node();
    detail::record(out, [ud, vd, od, nu, nv, c] {
      if (nu == 0.0 || nv == 0.0) return;
      const double g = (*od->grad)[0];
      if (ud->requires_grad) {
        detail::ensure_grad(*ud);
        for (std::size_t i = 0; i < ud->data.size(); ++i)
          (*ud->grad)[i] += g * (vd->data[i] / (nu * nv) - c * ud->data[i] / (nu * nu));
      }
      if (vd->requires_grad) {
        detail::ensure_grad(*vd);
        for (std::size_t i = 0; i < vd->data.size(); ++i)
          (*vd->grad)[i] += g * (ud->data[i] / (nu * nv) - c * vd->data[i] / (nv * nv));
      }
    });
  }
  return out;
}

/// Plain-value cosine similarity with the same zero-norm convention.
inline double cosine_value(const Tensor& u, const Tensor& v) {
  return cosine(u, v).value();
}

/// Numerically stable sigmoid.
inline double sigmoid(double s) {
  if (s >= 0.0) return 1.0 / (1.0 + std::exp(-s));
  const double e = std::exp(s);
  return e / (1.0 + e);
}

/// Binary cross-entropy on sigmoid(score): -[y ln s(x) + (1-y) ln(1-s(x))],
/// computed in the overflow-free form max(x,0) - x*y + log1p(exp(-|x|)).
inline Tensor bce_with_logits(const Tensor& score, double label) {
  if (score.size() != 1) {
    throw std::invalid_argument("bce_with_logits: score must be scalar, got " +
                                detail::shape_str(score.shape()));
  }
  const double s = score.data()[0];
  const double loss = std::max(s, 0.0) - s * label + std::log1p(std::exp(-std::abs(s)));
  Tensor out = Tensor::scalar(loss);
  out.set_requires_grad(score.requires_grad());
  if (detail::want_record(out)) {
    auto sd = score.node(), od = out.node();
    detail::record(out, [sd, od, label] {
      if (!sd->requires_grad) return;
      detail::ensure_grad(*sd);
      (*sd->grad)[0] += (*od->grad)[0] * (sigmoid(sd->data[0]) - label);
    });
  }
  return out;
}

/// Mean softmax cross-entropy over rows of a logits matrix against integer
/// targets, stabilized by the log-sum-exp trick.
inline Tensor softmax_cross_entropy_rows(const Tensor& logits,
                                         const std::vector<std::size_t>& targets) {
  detail::check_2d(logits, "softmax_cross_entropy_rows");
  const std::size_t m = logits.rows(), n = logits.cols();
  if (targets.size() != m) {
    throw std::invalid_argument("softmax_cross_entropy_rows: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(m) + " rows");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < m; ++r) {
    if (targets[r] >= n)
      throw std::invalid_argument("softmax_cross_entropy_rows: target out of range");
    double mx = logits.data()[r * n];
    for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, logits.data()[r * n + c]);
    double lse = 0.0;
    for (std::size_t c = 0; c < n; ++c) lse += std::exp(logits.data()[r * n + c] - mx);
    total += mx + std::log(lse) - logits.data()[r * n + targets[r]];
  }
  Tensor out = Tensor::scalar(total / static_cast<double>(m));
  out.set_requires_grad(logits.requires_grad());
  if (detail::want_record(out)) {
    auto ld = logits.node(), od = out.node();
    detail::record(out, [ld, od, targets, m, n] {
      if (!ld->requires_grad) return;
      detail::ensure_grad(*ld);
      const double g = (*od->grad)[0] / static_cast<double>(m);
      for (std::size_t r = 0; r < m; ++r) {
        double mx = ld->data[r * n];
        for (std::size_t c = 1; c < n; ++c) mx = std::max(mx, ld->data[r * n + c]);
        double z = 0.0;
        for (std::size_t c = 0; c < n; ++c) z += std::exp(ld->data[r * n + c] - mx);
        for (std::size_t c = 0; c < n; ++c) {
          const double p = std::exp(ld->data[r * n + c] - mx) / z;
          (*ld->grad)[r * n + c] += g * (p - (c == targets[r] ? 1.0 : 0.0));
        }
      }
    });
  }
  return out;
}

/// Inverted dropout; active only with rate > 0. The mask is drawn from the
/// provided generator, so training owns determinism via its seed.
template <typename Rng>
inline Tensor dropout(const Tensor& x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0,1)");
  const double keep = 1.0 - rate;
  std::vector<double> mask(x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    mask[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  Tensor out = Tensor::zeros(x.shape(), x.requires_grad());
  for (std::size_t i = 0; i < x.size(); ++i)
    out.mutable_data()[i] = x.data()[i] * mask[i];
  if (detail::want_record(out)) {
    auto xd = x.node(), od = out.node();
    detail::record(out, [xd, od, mask] {
      if (!xd->requires_grad) return;
      detail::ensure_grad(*xd);
      const auto& g = *od->grad;
      for (std::size_t i = 0; i < g.size(); ++i) (*xd->grad)[i] += g[i] * mask[i];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Random number generation
// ---------------------------------------------------------------------------

/// Deterministic RNG used everywhere seeds matter. All draws are derived from
/// mt19937_64 output with explicit arithmetic, so streams are reproducible
/// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n).
  std::size_t uniform_int(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::uniform_int: n must be positive");
    return static_cast<std::size_t>(gen_() % n);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Normal truncated to two standard deviations and rescaled so the sample
  /// standard deviation matches `stddev`. Bare 2-sigma truncation shrinks the
  /// spread by ~12%, which would drift initialization scales.
  double truncated_normal(double stddev) {
    double z = normal();
    while (std::abs(z) > 2.0) z = normal();
    return stddev * z / trunc2_std();
  }

 private:
  static double trunc2_std() {
    // Std of a standard normal conditioned on |z| <= 2.
    static const double v = [] {
      const double a = 2.0;
      const double pdf = std::exp(-0.5 * a * a) / std::sqrt(2.0 * M_PI);
      const double mass = std::erf(a / std::sqrt(2.0));
      return std::sqrt(1.0 - 2.0 * a * pdf / mass);
    }();
    return v;
  }

  std::mt19937_64 gen_;
};

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

/// Central-difference check of analytic gradients. Runs `f` once under a
/// fresh tape to collect analytic gradients of the scalar output w.r.t.
/// `params`, then perturbs every parameter component by +-h and compares.
/// Returns the max of |analytic - numeric| / max(1, |analytic| + |numeric|).
inline double grad_check(const std::function<Tensor()>& f, std::vector<Tensor> params,
                         double h = 1e-5) {
  if (!(h > 0.0 && h <= 1e-2)) {
    throw std::invalid_argument("grad_check: h must be in (0, 1e-2]");
  }
  for (Tensor& p : params) {
    p.set_requires_grad(true);
    p.clear_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    GradTape tape;
    Tensor loss = f();
    backward(loss, tape);
    for (Tensor& p : params) {
      analytic.push_back(p.has_grad() ? p.grad() : std::vector<double>(p.size(), 0.0));
    }
  }
  double max_err = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor& p = params[pi];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p.data()[i];
      p.mutable_data()[i] = saved + h;
      const double fplus = f().value();
      p.mutable_data()[i] = saved - h;
      const double fminus = f().value();
      p.mutable_data()[i] = saved;
      const double numeric = (fplus - fminus) / (2.0 * h);
      const double a = analytic[pi][i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a) + std::abs(numeric));
      max_err = std::max(max_err, err);
    }
  }
  return max_err;
}

inline bool all_finite(const Tensor& t) {
  for (double v : t.data())
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace ranklab
