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

// A small tape-based reverse-mode autodiff engine over dense row-major
// tensors of rank <= 2, used to train the sequence model.
//
// Operations record onto the Tape that owns their first operand. Node ids are
// assigned in creation order, so the tape is always topologically sorted and
// backward() is a single reverse sweep. backward() does not modify the tape.
//
// Broadcasting is limited to adding or subtracting a 1xN row to an MxN matrix.

#ifndef COCARRY_DIFFCORE_HPP_
#define COCARRY_DIFFCORE_HPP_

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace cocarry::diff {

using Shape = std::vector<std::size_t>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  static Tensor from_eigen(const RowMatrix& m);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }
  // Rank-0 and rank-1 tensors behave as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> data() const { return data_; }
  std::span<double> data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double item() const;

  Eigen::Map<const RowMatrix> mat() const;
  Eigen::Map<RowMatrix> mat();

  bool all_finite() const;
  std::string shape_string() const;

  bool operator==(const Tensor&) const = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

class Gradients {
 public:
  explicit Gradients(std::vector<Tensor> by_node) : by_node_(std::move(by_node)) {}
  // Zero tensor of the node's shape when nothing flowed into it.
  Tensor of(Var v) const;
  std::size_t size() const { return by_node_.size(); }

 private:
  std::vector<Tensor> by_node_;
};

class Tape {
 public:
  // Receives d(loss)/d(output) and accumulates into the inputs' slots.
  using BackwardFn = std::function<void(const Tape& tape, std::size_t self,
                                        const Tensor& grad_out, std::vector<Tensor>& grads)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value);      // differentiable input
  Var constant(Tensor value);  // receives no gradient

  // Records an application of a user-defined primitive.
  Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const char* op(std::size_t id) const { return nodes_[id].op; }
  std::size_t size() const { return nodes_.size(); }

  // Throws ShapeError if `loss` is not a single element.
  Gradients backward(Var loss) const;

 private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    const char* op = "leaf";
  };
  std::vector<Node> nodes_;
};

// Adds `delta` into `slot`, allocating on first use.
void accumulate(Tensor& slot, const Tensor& delta);

// Primitives.
Var matmul(Var a, Var b);
Var add(Var a, Var b);  // b may be a 1xN row broadcast over a's rows
Var sub(Var a, Var b);  // same broadcasting rule as add
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var concat(std::span<const Var> parts);  // along columns
Var concat(std::initializer_list<Var> parts);
Var slice(Var a, std::size_t col_begin, std::size_t col_end);  // columns
Var sum(Var a);
Var tanh(Var a);
Var sigmoid(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);
Var clamp(Var a, double lo, double hi);  // zero gradient outside [lo, hi]
Var detach(Var a);

using ScalarFn = std::function<Var(Tape&, Var)>;

// Largest componentwise relative error between backward() and central
// differences, with denominator max(|a|, |b|, 1e-8).
double grad_check(const ScalarFn& f, const Tensor& point, double eps = 1e-6);

}  // namespace cocarry::diff

#endif  // COCARRY_DIFFCORE_HPP_
