// Copyright 2026 The cocarry Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cocarry/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>
#include <utility>

#include "cocarry/error.hpp"

namespace cocarry::diff {

namespace {

std::size_t product(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + a.shape_string() + " and " +
                   b.shape_string());
}

Tape& tape_of(Var v) {
  if (v.tape == nullptr) throw Error("variable is not attached to a tape");
  return *v.tape;
}

void check_same_tape(const char* op, Var a, Var b) {
  if (a.tape != b.tape) throw Error(std::string(op) + ": operands live on different tapes");
}

// Result shares the shape of `a`; f maps each element.
template <typename F>
Tensor map_values(const Tensor& a, F f) {
  std::vector<double> out(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(in[i]);
  return Tensor(a.shape(), std::move(out));
}

// Elementwise unary op whose derivative is expressed through (x, y).
template <typename Fwd, typename Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv) {
  Tape& tape = tape_of(a);
  Tensor y = map_values(a.value(), fwd);
  return tape.record(op, std::move(y), {a.id},
                     [deriv](const Tape& t, std::size_t self, const Tensor& g,
                             std::vector<Tensor>& grads) {
                       const std::size_t in = t.inputs(self)[0];
                       if (!t.requires_grad(in)) return;
                       const auto x = t.value(in).data();
                       const auto y = t.value(self).data();
                       Tensor d(t.value(in).shape(), std::vector<double>(x.size()));
                       for (std::size_t i = 0; i < x.size(); ++i) d[i] = g[i] * deriv(x[i], y[i]);
                       accumulate(grads[in], d);
                     });
}

bool is_row_broadcast(const Tensor& a, const Tensor& b) {
  return b.rows() == 1 && b.cols() == a.cols() && a.rows() > 1 && a.rank() == 2;
}

Var add_or_sub(const char* op, Var a, Var b, double sign) {
  check_same_tape(op, a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const bool broadcast = is_row_broadcast(av, bv);
  if (!broadcast && (av.rows() != bv.rows() || av.cols() != bv.cols())) shape_error(op, av, bv);

  std::vector<double> out(av.values());
  const std::size_t cols = av.cols();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += sign * bv[broadcast ? i % cols : i];

  return tape_of(a).record(
      op, Tensor(av.shape(), std::move(out)), {a.id, b.id},
      [sign, broadcast](const Tape& t, std::size_t self, const Tensor& g,
                        std::vector<Tensor>& grads) {
        const std::size_t ia = t.inputs(self)[0];
        const std::size_t ib = t.inputs(self)[1];
        if (t.requires_grad(ia)) accumulate(grads[ia], g);
        if (!t.requires_grad(ib)) return;
        const Tensor& bv = t.value(ib);
        Tensor d = Tensor::zeros(bv.shape());
        if (broadcast) {
          const std::size_t cols = bv.cols();
          for (std::size_t i = 0; i < g.size(); ++i) d[i % cols] += sign * g[i];
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) d[i] = sign * g[i];
        }
        accumulate(grads[ib], d);
      });
}

}  // namespace

// --- Tensor -----------------------------------------------------------------

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_.size() > 2) throw ShapeError("tensors have rank <= 2, got " + shape_string());
  if (product(shape_) != data_.size()) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string());
  }
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const std::size_t n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> data) {
  return Tensor({rows, cols}, std::move(data));
}

Tensor Tensor::from_eigen(const RowMatrix& m) {
  const auto rows = static_cast<std::size_t>(m.rows());
  const auto cols = static_cast<std::size_t>(m.cols());
  return Tensor({rows, cols}, std::vector<double>(m.data(), m.data() + m.size()));
}

std::size_t Tensor::rows() const { return shape_.size() == 2 ? shape_[0] : 1; }

std::size_t Tensor::cols() const {
  if (shape_.size() == 2) return shape_[1];
  if (shape_.size() == 1) return shape_[0];
  return 1;
}

double Tensor::item() const {
  if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string());
  return data_[0];
}

Eigen::Map<const RowMatrix> Tensor::mat() const {
  return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

Eigen::Map<RowMatrix> Tensor::mat() {
  return {data_.data(), static_cast<Eigen::Index>(rows()), static_cast<Eigen::Index>(cols())};
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

std::string Tensor::shape_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "," : "") << shape_[i];
  os << ']';
  return os.str();
}

// --- Tape -------------------------------------------------------------------

const Tensor& Var::value() const { return tape_of(*this).value(id); }

Tensor Gradients::of(Var v) const {
  const Tensor& g = by_node_.at(v.id);
  if (!g.empty()) return g;
  return Tensor::zeros(v.value().shape());
}

Var Tape::leaf(Tensor value) {
  nodes_.push_back({std::move(value), {}, nullptr, true, "leaf"});
  return {this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  nodes_.push_back({std::move(value), {}, nullptr, false, "constant"});
  return {this, nodes_.size() - 1};
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
  bool needs_grad = false;
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) throw Error(std::string(op) + ": input node out of range");
    needs_grad = needs_grad || nodes_[in].requires_grad;
  }
  nodes_.push_back({std::move(value), std::move(inputs), std::move(backward), needs_grad, op});
  return {this, nodes_.size() - 1};
}

void accumulate(Tensor& slot, const Tensor& delta) {
  if (slot.empty()) {
    slot = delta;
    return;
  }
  auto s = slot.data();
  const auto d = delta.data();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] += d[i];
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape != this) throw Error("backward: loss belongs to another tape");
  const Tensor& lv = value(loss.id);
  if (lv.size() != 1) throw ShapeError("backward: loss must be scalar, got shape " + lv.shape_string());

  std::vector<Tensor> grads(nodes_.size());
  grads[loss.id] = Tensor::filled(lv.shape(), 1.0);
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || grads[id].empty()) continue;
    n.backward(*this, id, grads[id], grads);
  }
  return Gradients(std::move(grads));
}

// --- primitives -------------------------------------------------------------

Var matmul(Var a, Var b) {
  check_same_tape("matmul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 2 || bv.rank() != 2 || av.cols() != bv.rows()) shape_error("matmul", av, bv);
  RowMatrix c = av.mat() * bv.mat();
  return tape_of(a).record(
      "matmul", Tensor::from_eigen(c), {a.id, b.id},
      [](const Tape& t, std::size_t self, const Tensor& g, std::vector<Tensor>& grads) {
        const std::size_t ia = t.inputs(self)[0];
        const std::size_t ib = t.inputs(self)[1];
        if (t.requires_grad(ia)) {
          accumulate(grads[ia], Tensor::from_eigen(g.mat() * t.value(ib).mat().transpose()));
        }
        if (t.requires_grad(ib)) {
          accumulate(grads[ib], Tensor::from_eigen(t.value(ia).mat().transpose() * g.mat()));
        }
      });
}

Var add(Var a, Var b) { return add_or_sub("add", a, b, 1.0); }
Var sub(Var a, Var b) { return add_or_sub("sub", a, b, -1.0); }

Var mul(Var a, Var b) {
  check_same_tape("mul", a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() != bv.shape()) shape_error("mul", av, bv);
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return tape_of(a).record(
      "mul", Tensor(av.shape(), std::move(out)), {a.id, b.id},
      [](const Tape& t, std::size_t self, const Tensor& g, std::vector<Tensor>& grads) {
        const std::size_t ia = t.inputs(self)[0];
        const std::size_t ib = t.inputs(self)[1];
        const Tensor& x = t.value(ia);
        const Tensor& y = t.value(ib);
        if (t.requires_grad(ia)) {
          Tensor d(x.shape(), std::vector<double>(x.size()));
          for (std::size_t i = 0; i < d.size(); ++i) d[i] = g[i] * y[i];
          accumulate(grads[ia], d);
        }
        if (t.requires_grad(ib)) {
          Tensor d(y.shape(), std::vector<double>(y.size()));
          for (std::size_t i = 0; i < d.size(); ++i) d[i] = g[i] * x[i];
          accumulate(grads[ib], d);
        }
      });
}

Var scale(Var a, double factor) {
  return unary("scale", a, [factor](double x) { return factor * x; },
               [factor](double, double) { return factor; });
}

Var concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const std::size_t rows = parts[0].value().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    check_same_tape("concat", parts[0], p);
    if (p.value().rows() != rows) shape_error("concat", parts[0].value(), p.value());
    cols += p.value().cols();
    ids.push_back(p.id);
  }
  std::vector<double> out(rows * cols);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    const Tensor& v = p.value();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(v.data().begin() + r * v.cols(), v.cols(), out.begin() + r * cols + offset);
    }
    offset += v.cols();
  }
  return tape_of(parts[0]).record(
      "concat", Tensor::matrix(rows, cols, std::move(out)), std::move(ids),
      [](const Tape& t, std::size_t self, const Tensor& g, std::vector<Tensor>& grads) {
        const std::size_t rows = g.rows();
        const std::size_t cols = g.cols();
        std::size_t offset = 0;
        for (std::size_t in : t.inputs(self)) {
          const Tensor& v = t.value(in);
          const std::size_t w = v.cols();
          if (t.requires_grad(in)) {
            Tensor d(v.shape(), std::vector<double>(v.size()));
            for (std::size_t r = 0; r < rows; ++r) {
              std::copy_n(g.data().begin() + r * cols + offset, w, d.data().begin() + r * w);
            }
            accumulate(grads[in], d);
          }
          offset += w;
        }
      });
}

Var concat(std::initializer_list<Var> parts) {
  return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var slice(Var a, std::size_t col_begin, std::size_t col_end) {
  const Tensor& av = a.value();
  if (col_begin >= col_end || col_end > av.cols()) {
    throw ShapeError("slice: columns [" + std::to_string(col_begin) + ", " + std::to_string(col_end) +
                     ") out of range for shape " + av.shape_string());
  }
  const std::size_t rows = av.rows();
  const std::size_t w = col_end - col_begin;
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(av.data().begin() + r * av.cols() + col_begin, w, out.begin() + r * w);
  }
  return tape_of(a).record(
      "slice", Tensor::matrix(rows, w, std::move(out)), {a.id},
      [col_begin, w](const Tape& t, std::size_t self, const Tensor& g, std::vector<Tensor>& grads) {
        const std::size_t in = t.inputs(self)[0];
        if (!t.requires_grad(in)) return;
        const Tensor& v = t.value(in);
        Tensor d = Tensor::zeros(v.shape());
        for (std::size_t r = 0; r < v.rows(); ++r) {
          std::copy_n(g.data().begin() + r * w, w, d.data().begin() + r * v.cols() + col_begin);
        }
        accumulate(grads[in], d);
      });
}

Var sum(Var a) {
  const auto v = a.value().data();
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  return tape_of(a).record(
      "sum", Tensor::scalar(s), {a.id},
      [](const Tape& t, std::size_t self, const Tensor& g, std::vector<Tensor>& grads) {
        const std::size_t in = t.inputs(self)[0];
        if (t.requires_grad(in)) accumulate(grads[in], Tensor::filled(t.value(in).shape(), g.item()));
      });
}

Var tanh(Var a) {
  return unary("tanh", a, [](double x) { return std::tanh(x); },
               [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(Var a) {
  return unary("sigmoid", a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [](double, double y) { return y * (1.0 - y); });
}

Var exp(Var a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  for (double v : a.value().data()) {
    if (!(v > 0.0)) throw Error("log: non-positive input");
  }
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary("clamp", a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
               [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

// --- gradient check ---------------------------------------------------------

double grad_check(const ScalarFn& f, const Tensor& point, double eps) {
  Tensor analytic;
  {
    Tape tape;
    const Var x = tape.leaf(point);
    const Var y = f(tape, x);
    analytic = tape.backward(y).of(x);
  }
  auto eval = [&](const Tensor& p) {
    Tape tape;
    return f(tape, tape.constant(p)).value().item();
  };

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + eps;
    const double up = eval(probe);
    probe[i] = point[i] - eps;
    const double down = eval(probe);
    probe[i] = point[i];
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace cocarry::diff
