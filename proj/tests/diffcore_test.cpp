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

// Tests for the reverse-mode autodiff engine.

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "cocarry/diffcore.hpp"
#include "cocarry/error.hpp"
#include "support/grad_suite.hpp"

namespace cocarry::diff {
namespace {

Tensor Random(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> d(r * c);
  for (double& v : d) v = u(rng);
  return Tensor::matrix(r, c, d);
}

TEST(Primitives, SigmoidOfZeroIsHalf) {
  Tape t;
  EXPECT_DOUBLE_EQ(sigmoid(t.leaf(Tensor::scalar(0.0))).value().item(), 0.5);
}

TEST(Primitives, IdentityMatmul) {
  std::mt19937_64 rng(1);
  Tape t;
  const Tensor a = Random(3, 4, rng);
  std::vector<double> eye(9, 0.0);
  eye[0] = eye[4] = eye[8] = 1.0;
  const Var out = matmul(t.constant(Tensor::matrix(3, 3, eye)), t.constant(a));
  EXPECT_EQ(out.value(), a);
}

TEST(Primitives, MatmulMatchesTripleLoop) {
  std::mt19937_64 rng(2);
  const Tensor a = Random(2, 3, rng);
  const Tensor b = Random(3, 2, rng);
  Tape t;
  const Tensor c = matmul(t.constant(a), t.constant(b)).value();
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t j = 0; j < 2; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < 3; ++k) acc += a.at(i, k) * b.at(k, j);
      EXPECT_NEAR(c.at(i, j), acc, 1e-15);
    }
  }
}

TEST(Primitives, ShapeMismatchNamesOpAndShapes) {
  Tape t;
  const Var a = t.leaf(Tensor::zeros({2, 3}));
  const Var b = t.leaf(Tensor::zeros({2, 3}));
  try {
    matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("matmul"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[2,3]"), std::string::npos) << msg;
  }
  EXPECT_THROW(add(a, t.leaf(Tensor::zeros({3, 3}))), ShapeError);
  EXPECT_THROW(slice(a, 2, 5), ShapeError);
}

TEST(Primitives, RowBroadcastAdd) {
  Tape t;
  const Var a = t.leaf(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const Var b = t.leaf(Tensor::matrix(1, 2, {10, 20}));
  EXPECT_EQ(add(a, b).value(), Tensor::matrix(2, 2, {11, 22, 13, 24}));
  const Gradients g = t.backward(sum(add(a, b)));
  EXPECT_EQ(g.of(b), Tensor::matrix(1, 2, {2, 2}));
}

TEST(Primitives, LogRejectsNonPositive) {
  Tape t;
  EXPECT_THROW(log(t.leaf(Tensor::matrix(1, 2, {1.0, 0.0}))), Error);
}

TEST(Backward, SquareAtThree) {
  Tape t;
  const Var x = t.leaf(Tensor::scalar(3.0));
  EXPECT_DOUBLE_EQ(t.backward(sum(square(x))).of(x).item(), 6.0);
}

TEST(Backward, NonScalarLossThrows) {
  Tape t;
  const Var x = t.leaf(Tensor::zeros({2, 2}));
  EXPECT_THROW(t.backward(tanh(x)), ShapeError);
}

TEST(Backward, DetachedBranchGetsNoGradient) {
  Tape t;
  const Var x = t.leaf(Tensor::scalar(2.0));
  const Var y = mul(detach(x), detach(x));
  const Gradients g = t.backward(sum(y));
  EXPECT_EQ(g.of(x).item(), 0.0);
}

TEST(Backward, RepeatableOnSameTape) {
  std::mt19937_64 rng(3);
  Tape t;
  const Var w = t.leaf(Random(3, 4, rng));
  const Var x = t.constant(Random(2, 3, rng));
  const Var loss = sum(sigmoid(matmul(x, w)));
  const Tensor g1 = t.backward(loss).of(w);
  const Tensor g2 = t.backward(loss).of(w);
  EXPECT_EQ(g1, g2);
}

TEST(Backward, SumSigmoidMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  const Tensor x = Random(4, 2, rng);
  const ScalarFn f = [x](Tape& t, Var w) { return sum(sigmoid(matmul(w, t.constant(x)))); };
  EXPECT_LT(grad_check(f, Random(3, 4, rng)), 1e-5);
}

TEST(Backward, ChainMatchesClosedForm) {
  // f(x) = log(1 + exp(tanh(x)^2)), f' = 2 tanh(x) sech(x)^2 * e / (1 + e), e = exp(tanh(x)^2)
  for (double x0 : {-1.3, -0.2, 0.4, 1.7}) {
    Tape t;
    const Var x = t.leaf(Tensor::scalar(x0));
    const Var th = tanh(x);
    const Var e = exp(square(th));
    const Var f = log(add(e, t.constant(Tensor::scalar(1.0))));
    const double g = t.backward(sum(f)).of(x).item();
    const double tv = std::tanh(x0);
    const double ev = std::exp(tv * tv);
    const double expected = 2 * tv * (1 - tv * tv) * ev / (1 + ev);
    EXPECT_NEAR(g, expected, 1e-10);
  }
}

TEST(GradCheck, LinearFunctionIsExact) {
  std::mt19937_64 rng(5);
  const Tensor c = Random(3, 3, rng);
  const ScalarFn f = [c](Tape& t, Var x) { return sum(mul(x, t.constant(c))); };
  EXPECT_LT(grad_check(f, Random(3, 3, rng)), 1e-10);
}

TEST(GradCheck, WrongGradientIsCaught) {
  std::mt19937_64 rng(6);
  // A cube primitive whose recorded derivative is off by a factor of two.
  const ScalarFn f = [](Tape& t, Var x) {
    Tensor v = x.value();
    for (double& e : v.data()) e = e * e * e;
    const Var y = t.record("bad_cube", v, {x.id},
                           [](const Tape& tape, std::size_t self, const Tensor& g, std::vector<Tensor>& grads) {
                             const std::size_t in = tape.inputs(self)[0];
                             Tensor d = tape.value(in);
                             for (std::size_t i = 0; i < d.size(); ++i) d[i] = 6.0 * d[i] * d[i] * g[i];
                             accumulate(grads[in], d);
                           });
    return sum(y);
  };
  EXPECT_GT(grad_check(f, Random(2, 2, rng, 0.5, 1.5)), 1e-2);
}

// Every primitive, on random shapes and seeds, in each differentiable operand.
class PrimitiveGradTest : public ::testing::TestWithParam<int> {};

TEST_P(PrimitiveGradTest, PassesGradCheck) {
  for (const auto& r : cocarry::testing::primitive_grad_checks(GetParam())) {
    EXPECT_LT(r.error, 1e-5) << r.name << " seed " << GetParam();
  }
}

INSTANTIATE_TEST_SUITE_P(RandomShapes, PrimitiveGradTest, ::testing::Range(0, 100));

TEST(Clamp, ZeroGradientOutsideRange) {
  Tape t;
  const Var x = t.leaf(Tensor::matrix(1, 3, {-2.0, 0.1, 3.0}));
  const Tensor g = t.backward(sum(clamp(x, -1.0, 1.0))).of(x);
  EXPECT_EQ(g, Tensor::matrix(1, 3, {0.0, 1.0, 0.0}));
}

}  // namespace
}  // namespace cocarry::diff
