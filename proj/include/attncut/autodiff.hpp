// Copyright 2026 The attncut Authors.
//
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

// Tape-based reverse-mode differentiation over dense row-major matrices.
//
// A Tape records every operation applied to Tensor handles in creation
// order, which is already a topological order of the graph. backward()
// sweeps the tape once in reverse. Parameters live outside any tape and
// receive accumulated gradients, so one model can be driven by many
// short-lived tapes.

#ifndef ATTNCUT_AUTODIFF_HPP_
#define ATTNCUT_AUTODIFF_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "attncut/errors.hpp"

namespace attncut::ad {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  std::ostringstream os;
  os << '(' << rows << 'x' << cols << ')';
  return os.str();
}

/// Named, persistent trainable tensor. `grad` stays empty until a backward
/// pass reaches the parameter.
template <typename Scalar>
struct Parameter {
  std::string name;
  Matrix<Scalar> value;
  Matrix<Scalar> grad;

  bool has_grad() const { return grad.rows() == value.rows() && grad.cols() == value.cols() && grad.size() > 0; }
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// Ordered collection of uniquely named parameters with stable addresses.
template <typename Scalar>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;

  Parameter<Scalar>& add(std::string name, Matrix<Scalar> value) {
    if (!names_.insert(name).second) {
      throw std::invalid_argument("duplicate parameter name '" + name + "'");
    }
    auto p = std::make_unique<Parameter<Scalar>>();
    p->name = std::move(name);
    p->value = std::move(value);
    params_.push_back(std::move(p));
    return *params_.back();
  }

  std::size_t size() const { return params_.size(); }
  Parameter<Scalar>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<Scalar>& operator[](std::size_t i) const { return *params_[i]; }

  Parameter<Scalar>* find(const std::string& name) {
    for (auto& p : params_) {
      if (p->name == name) return p.get();
    }
    return nullptr;
  }

  std::vector<Parameter<Scalar>*> pointers() {
    std::vector<Parameter<Scalar>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::vector<Matrix<Scalar>> snapshot() const {
    std::vector<Matrix<Scalar>> out;
    out.reserve(params_.size());
    for (const auto& p : params_) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<Matrix<Scalar>>& values) {
    if (values.size() != params_.size()) throw std::invalid_argument("snapshot size mismatch");
    for (std::size_t i = 0; i < values.size(); ++i) params_[i]->value = values[i];
  }

  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter<Scalar>>> params_;
  std::unordered_set<std::string> names_;
};

template <typename Scalar>
class Tape;

/// Handle to one recorded value on a Tape. Cheap to copy.
template <typename Scalar>
class Tensor {
 public:
  Tensor() = default;

  const Matrix<Scalar>& value() const { return tape_->value(id_); }
  /// Gradient of the last backward() call (accumulated for leaves).
  const Matrix<Scalar>& grad() const { return tape_->grad(id_); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool requires_grad() const { return tape_->requires_grad(id_); }
  Tape<Scalar>& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape<Scalar>;
  Tensor(Tape<Scalar>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<Scalar>* tape_ = nullptr;
  std::size_t id_ = 0;
};

template <typename Scalar>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor<Scalar> constant(Matrix<Scalar> value) {
    return push(std::move(value), false, nullptr, {});
  }

  /// Leaf that requires grad; its gradient accumulates across backward calls.
  Tensor<Scalar> variable(Matrix<Scalar> value) {
    return push(std::move(value), true, nullptr, {});
  }

  /// Leaf bound to a parameter; backward() accumulates into `p.grad`.
  Tensor<Scalar> parameter(Parameter<Scalar>& p) {
    return push(p.value, true, &p, {});
  }

  /// Records an operation result. `backward` is stored only when some parent
  /// requires grad.
  Tensor<Scalar> record(Matrix<Scalar> value, std::initializer_list<Tensor<Scalar>> parents,
                        BackwardFn backward) {
    bool needs = false;
    for (const auto& p : parents) {
      check_owner(p);
      needs = needs || nodes_[p.id_].requires_grad;
    }
    return push(std::move(value), needs, nullptr, needs ? std::move(backward) : BackwardFn{});
  }

  Tensor<Scalar> record(Matrix<Scalar> value, std::span<const Tensor<Scalar>> parents,
                        BackwardFn backward) {
    bool needs = false;
    for (const auto& p : parents) {
      check_owner(p);
      needs = needs || nodes_[p.id_].requires_grad;
    }
    return push(std::move(value), needs, nullptr, needs ? std::move(backward) : BackwardFn{});
  }

  const Matrix<Scalar>& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  const Matrix<Scalar>& grad(std::size_t id) const {
    const Node& n = nodes_[id];
    return (n.is_leaf && n.parameter == nullptr) ? n.leaf_grad : n.grad;
  }

  /// Gradient flowing into node `id` during the current sweep.
  const Matrix<Scalar>& upstream(std::size_t id) const { return nodes_[id].grad; }

  /// Adds `delta` into the sweep gradient of `t`; no-op when `t` is constant.
  template <typename Derived>
  void accumulate(const Tensor<Scalar>& t, const Eigen::MatrixBase<Derived>& delta) {
    Node& n = nodes_[t.id_];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
    } else {
      n.grad += delta;
    }
  }

  /// Adds `delta` into the block of `t`'s sweep gradient at (row, col).
  template <typename Derived>
  void accumulate_block(const Tensor<Scalar>& t, Eigen::Index row, Eigen::Index col,
                        const Eigen::MatrixBase<Derived>& delta) {
    Node& n = nodes_[t.id_];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix<Scalar>::Zero(n.value.rows(), n.value.cols());
    n.grad.block(row, col, delta.rows(), delta.cols()) += delta;
  }

  /// Reverse sweep from a scalar loss.
  void backward(const Tensor<Scalar>& loss) {
    check_owner(loss);
    const Matrix<Scalar>& lv = nodes_[loss.id_].value;
    if (lv.rows() != 1 || lv.cols() != 1) {
      throw ShapeError("backward() needs a scalar loss, got " + shape_string(lv.rows(), lv.cols()));
    }
    for (auto& n : nodes_) n.grad.resize(0, 0);
    if (!nodes_[loss.id_].requires_grad) return;
    nodes_[loss.id_].grad = Matrix<Scalar>::Ones(1, 1);
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, i);
      if (n.is_leaf) {
        if (n.parameter != nullptr) {
          if (!n.parameter->has_grad()) n.parameter->zero_grad();
          n.parameter->grad += n.grad;
        } else if (n.leaf_grad.size() == 0) {
          n.leaf_grad = n.grad;
        } else {
          n.leaf_grad += n.grad;
        }
      }
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix<Scalar> value;
    Matrix<Scalar> grad;
    Matrix<Scalar> leaf_grad;
    bool requires_grad = false;
    bool is_leaf = false;
    Parameter<Scalar>* parameter = nullptr;
    BackwardFn backward;
  };

  Tensor<Scalar> push(Matrix<Scalar> value, bool requires_grad, Parameter<Scalar>* param,
                      BackwardFn backward) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    n.is_leaf = !backward;
    n.parameter = param;
    n.backward = std::move(backward);
    nodes_.push_back(std::move(n));
    return Tensor<Scalar>(this, nodes_.size() - 1);
  }

  void check_owner(const Tensor<Scalar>& t) const {
    if (t.tape_ != this) throw std::invalid_argument("tensor belongs to a different tape");
  }

  std::vector<Node> nodes_;
};

// ---------------------------------------------------------------------------
// Primitives. Every function records its forward value and a backward rule
// that adds into the parents' gradients.
// ---------------------------------------------------------------------------

namespace detail {

template <typename Scalar>
void require_same_shape(const char* op, const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) +
                     " vs " + shape_string(b.rows(), b.cols()));
  }
}

template <typename Scalar>
void require_same_tape(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("tensors belong to different tapes");
}

}  // namespace detail

template <typename Scalar>
Tensor<Scalar> matmul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_tape(a, b);
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
                     shape_string(b.rows(), b.cols()));
  }
  Matrix<Scalar> out = a.value() * b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (a.requires_grad()) t.accumulate(a, g * b.value().transpose());
    if (b.requires_grad()) t.accumulate(b, a.value().transpose() * g);
  });
}

template <typename Scalar>
Tensor<Scalar> operator+(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("add", a, b);
  Matrix<Scalar> out = a.value() + b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("sub", a, b);
  Matrix<Scalar> out = a.value() - b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

template <typename Scalar>
Tensor<Scalar> operator-(const Tensor<Scalar>& a) {
  Matrix<Scalar> out = -a.value();
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(a, -t.upstream(self));
  });
}

template <typename Scalar>
Tensor<Scalar> scale(const Tensor<Scalar>& a, Scalar s) {
  Matrix<Scalar> out = a.value() * s;
  return a.tape().record(std::move(out), {a}, [a, s](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(a, t.upstream(self) * s);
  });
}

template <typename Scalar>
Tensor<Scalar> operator*(Scalar s, const Tensor<Scalar>& a) {
  return scale(a, s);
}

/// Elementwise product.
template <typename Scalar>
Tensor<Scalar> cwise_product(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape("cwise_product", a, b);
  Matrix<Scalar> out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    if (a.requires_grad()) t.accumulate(a, g.cwiseProduct(b.value()));
    if (b.requires_grad()) t.accumulate(b, g.cwiseProduct(a.value()));
  });
}

/// x (R x C) plus a row vector (1 x C) added to every row.
template <typename Scalar>
Tensor<Scalar> add_row(const Tensor<Scalar>& x, const Tensor<Scalar>& row) {
  detail::require_same_tape(x, row);
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("add_row: shape mismatch " + shape_string(x.rows(), x.cols()) + " vs " +
                     shape_string(row.rows(), row.cols()));
  }
  Matrix<Scalar> out = x.value().rowwise() + row.value().row(0);
  return x.tape().record(std::move(out), {x, row}, [x, row](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    t.accumulate(x, g);
    if (row.requires_grad()) t.accumulate(row, g.colwise().sum());
  });
}

template <typename Scalar>
Tensor<Scalar> transpose(const Tensor<Scalar>& a) {
  Matrix<Scalar> out = a.value().transpose();
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(a, t.upstream(self).transpose());
  });
}

/// Block [row, row+rows) x [col, col+cols).
template <typename Scalar>
Tensor<Scalar> slice(const Tensor<Scalar>& a, Eigen::Index row, Eigen::Index rows, Eigen::Index col,
                     Eigen::Index cols) {
  if (row < 0 || col < 0 || rows < 0 || cols < 0 || row + rows > a.rows() || col + cols > a.cols()) {
    throw ShapeError("slice: block " + shape_string(rows, cols) + " at (" + std::to_string(row) +
                     "," + std::to_string(col) + ") exceeds " + shape_string(a.rows(), a.cols()));
  }
  Matrix<Scalar> out = a.value().block(row, col, rows, cols);
  return a.tape().record(std::move(out), {a}, [a, row, col](Tape<Scalar>& t, std::size_t self) {
    t.accumulate_block(a, row, col, t.upstream(self));
  });
}

template <typename Scalar>
Tensor<Scalar> row(const Tensor<Scalar>& a, Eigen::Index r) {
  return slice(a, r, 1, 0, a.cols());
}

/// Side-by-side concatenation; all parts share the row count.
template <typename Scalar>
Tensor<Scalar> concat_cols(std::span<const Tensor<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const auto& p : parts) {
    detail::require_same_tape(parts[0], p);
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: shape mismatch " + shape_string(rows, parts[0].cols()) + " vs " +
                       shape_string(p.rows(), p.cols()));
    }
    cols += p.cols();
  }
  Matrix<Scalar> out(rows, cols);
  Eigen::Index c = 0;
  for (const auto& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Tensor<Scalar>> keep(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [keep](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    Eigen::Index c0 = 0;
    for (const auto& p : keep) {
      if (p.requires_grad()) t.accumulate(p, g.middleCols(c0, p.cols()));
      c0 += p.cols();
    }
  });
}

template <typename Scalar>
Tensor<Scalar> concat_cols(std::initializer_list<Tensor<Scalar>> parts) {
  return concat_cols(std::span<const Tensor<Scalar>>(parts.begin(), parts.size()));
}

/// Vertical stacking; all parts share the column count.
template <typename Scalar>
Tensor<Scalar> concat_rows(std::span<const Tensor<Scalar>> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const auto& p : parts) {
    detail::require_same_tape(parts[0], p);
    if (p.cols() != cols) {
      throw ShapeError("concat_rows: shape mismatch " + shape_string(parts[0].rows(), cols) + " vs " +
                       shape_string(p.rows(), p.cols()));
    }
    rows += p.rows();
  }
  Matrix<Scalar> out(rows, cols);
  Eigen::Index r = 0;
  for (const auto& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Tensor<Scalar>> keep(parts.begin(), parts.end());
  return parts[0].tape().record(std::move(out), parts, [keep](Tape<Scalar>& t, std::size_t self) {
    const auto& g = t.upstream(self);
    Eigen::Index r0 = 0;
    for (const auto& p : keep) {
      if (p.requires_grad()) t.accumulate(p, g.middleRows(r0, p.rows()));
      r0 += p.rows();
    }
  });
}

template <typename Scalar>
Tensor<Scalar> concat_rows(std::initializer_list<Tensor<Scalar>> parts) {
  return concat_rows(std::span<const Tensor<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& a) {
  Matrix<Scalar> out = (Scalar(1) + (-a.value().array()).exp()).inverse().matrix();
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& t, std::size_t self) {
    const auto& y = t.value(self).array();
    t.accumulate(a, (t.upstream(self).array() * y * (Scalar(1) - y)).matrix());
  });
}

template <typename Scalar>
Tensor<Scalar> tanh(const Tensor<Scalar>& a) {
  Matrix<Scalar> out = a.value().array().tanh().matrix();
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& t, std::size_t self) {
    const auto& y = t.value(self).array();
    t.accumulate(a, (t.upstream(self).array() * (Scalar(1) - y.square())).matrix());
  });
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& a) {
  Matrix<Scalar> out = a.value().cwiseMax(Scalar(0));
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& t, std::size_t self) {
    const auto mask = (a.value().array() > Scalar(0)).template cast<Scalar>();
    t.accumulate(a, (t.upstream(self).array() * mask).matrix());
  });
}

template <typename Scalar>
Tensor<Scalar> exp(const Tensor<Scalar>& a) {
  Matrix<Scalar> out = a.value().array().exp().matrix();
  return a.tape().record(std::move(out), {a}, [a](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(a, t.upstream(self).cwiseProduct(t.value(self)));
  });
}

/// Natural log of max(x, floor). Clamped entries pass no gradient.
template <typename Scalar>
Tensor<Scalar> log(const Tensor<Scalar>& a, Scalar floor = Scalar(0)) {
  Matrix<Scalar> out = a.value().cwiseMax(floor).array().log().matrix();
  return a.tape().record(std::move(out), {a}, [a, floor](Tape<Scalar>& t, std::size_t self) {
    const auto& x = a.value().array();
    const auto pass = (x >= floor).template cast<Scalar>();
    t.accumulate(a, (t.upstream(self).array() * pass / x.max(floor)).matrix());
  });
}

/// Softmax with numpy axis semantics: axis 0 normalizes each column,
/// axis 1 normalizes each row.
template <typename Scalar>
Tensor<Scalar> softmax(const Tensor<Scalar>& a, int axis) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("softmax: axis must be 0 or 1");
  Matrix<Scalar> out(a.rows(), a.cols());
  const auto& x = a.value();
  if (axis == 1) {
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      auto e = (x.row(r).array() - x.row(r).maxCoeff()).exp();
      out.row(r) = (e / e.sum()).matrix();
    }
  } else {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      auto e = (x.col(c).array() - x.col(c).maxCoeff()).exp();
      out.col(c) = (e / e.sum()).matrix();
    }
  }
  return a.tape().record(std::move(out), {a}, [a, axis](Tape<Scalar>& t, std::size_t self) {
    const auto& y = t.value(self);
    const auto& g = t.upstream(self);
    Matrix<Scalar> gy = g.cwiseProduct(y);
    Matrix<Scalar> dx(y.rows(), y.cols());
    if (axis == 1) {
      Eigen::Matrix<Scalar, Eigen::Dynamic, 1> s = gy.rowwise().sum();
      dx = gy - (y.array().colwise() * s.array()).matrix();
    } else {
      Eigen::Matrix<Scalar, 1, Eigen::Dynamic> s = gy.colwise().sum();
      dx = gy - (y.array().rowwise() * s.array()).matrix();
    }
    t.accumulate(a, dx);
  });
}

/// Per-row layer normalization: gain * (x - mean) / sqrt(var + eps) + bias,
/// with population variance. gain and bias are 1 x C.
template <typename Scalar>
Tensor<Scalar> layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gain,
                          const Tensor<Scalar>& bias, Scalar eps = Scalar(1e-12)) {
  detail::require_same_tape(x, gain);
  detail::require_same_tape(x, bias);
  const Eigen::Index cols = x.cols();
  if (gain.rows() != 1 || gain.cols() != cols || bias.rows() != 1 || bias.cols() != cols) {
    throw ShapeError("layer_norm: shape mismatch " + shape_string(x.rows(), cols) + " vs gain " +
                     shape_string(gain.rows(), gain.cols()) + " / bias " +
                     shape_string(bias.rows(), bias.cols()));
  }
  const auto& xv = x.value();
  Matrix<Scalar> xhat(xv.rows(), cols);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const Scalar mu = xv.row(r).mean();
    const auto centered = (xv.row(r).array() - mu);
    const Scalar var = centered.square().mean();
    inv_std(r) = Scalar(1) / std::sqrt(var + eps);
    xhat.row(r) = (centered * inv_std(r)).matrix();
  }
  Matrix<Scalar> out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<Scalar>& t,
                                                                            std::size_t self) {
        const auto& g = t.upstream(self);
        if (gain.requires_grad()) t.accumulate(gain, g.cwiseProduct(xhat).colwise().sum());
        if (bias.requires_grad()) t.accumulate(bias, g.colwise().sum());
        if (x.requires_grad()) {
          Matrix<Scalar> dxhat = (g.array().rowwise() * gain.value().row(0).array()).matrix();
          Matrix<Scalar> dx(g.rows(), g.cols());
          for (Eigen::Index r = 0; r < g.rows(); ++r) {
            const Scalar m1 = dxhat.row(r).mean();
            const Scalar m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
            dx.row(r) = ((dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_std(r)).matrix();
          }
          t.accumulate(x, dx);
        }
      });
}

/// Inverted dropout. Identity when `training` is false or rate is 0.
template <typename Scalar, typename Rng>
Tensor<Scalar> dropout(const Tensor<Scalar>& a, Scalar rate, bool training, Rng& rng) {
  if (rate < 0 || rate >= 1) throw std::invalid_argument("dropout: rate must be in [0,1)");
  if (!training || rate == Scalar(0)) return a;
  std::bernoulli_distribution keep(1.0 - static_cast<double>(rate));
  Matrix<Scalar> mask(a.rows(), a.cols());
  const Scalar s = Scalar(1) / (Scalar(1) - rate);
  for (Eigen::Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? s : Scalar(0);
  Matrix<Scalar> out = a.value().cwiseProduct(mask);
  return a.tape().record(std::move(out), {a}, [a, mask = std::move(mask)](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(a, t.upstream(self).cwiseProduct(mask));
  });
}

template <typename Scalar>
Tensor<Scalar> sum(const Tensor<Scalar>& a) {
  Matrix<Scalar> out(1, 1);
  out(0, 0) = a.value().sum();
  const Eigen::Index r = a.rows();
  const Eigen::Index c = a.cols();
  return a.tape().record(std::move(out), {a}, [a, r, c](Tape<Scalar>& t, std::size_t self) {
    t.accumulate(a, Matrix<Scalar>::Constant(r, c, t.upstream(self)(0, 0)));
  });
}

template <typename Scalar>
Tensor<Scalar> mean(const Tensor<Scalar>& a) {
  if (a.value().size() == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), Scalar(1) / static_cast<Scalar>(a.value().size()));
}

}  // namespace attncut::ad

#endif  // ATTNCUT_AUTODIFF_HPP_
