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

#include "support/grad_suite.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "cocarry/diffcore.hpp"
#include "cocarry/vrnn.hpp"

namespace cocarry::testing {

namespace {

using namespace cocarry::diff;

Tensor Random(std::size_t r, std::size_t c, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> d(r * c);
  for (double& v : d) v = u(rng);
  return Tensor::matrix(r, c, d);
}

// sum(w * out) with fixed random weights, so every output element matters.
Var Weighted(Tape& t, Var out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Tensor& v = out.value();
  Var w = t.constant(Random(v.rows(), v.cols(), rng, 0.5, 1.5));
  return sum(mul(out, w));
}

}  // namespace

std::vector<GradResult> primitive_grad_checks(int seed) {
  std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
  std::uniform_int_distribution<std::size_t> dim(1, 4);
  const std::size_t r = dim(rng);
  const std::size_t c = dim(rng);
  const std::size_t k = dim(rng);
  const Tensor other_rc = Random(r, c, rng);
  const Tensor other_ck = Random(c, k, rng);
  const Tensor other_rk = Random(r, k, rng);
  const Tensor row = Random(1, c, rng);
  const auto s = static_cast<std::uint64_t>(seed) + 1000;

  struct Case {
    const char* name;
    ScalarFn f;
    Tensor point;
  };
  const std::vector<Case> cases = {
      {"matmul_lhs", [&](Tape& t, Var x) { return Weighted(t, matmul(x, t.constant(other_ck)), s); }, Random(r, c, rng)},
      {"matmul_rhs", [&](Tape& t, Var x) { return Weighted(t, matmul(t.constant(other_rc), x), s); }, Random(c, k, rng)},
      {"add", [&](Tape& t, Var x) { return Weighted(t, add(x, t.constant(other_rc)), s); }, Random(r, c, rng)},
      {"add_row", [&](Tape& t, Var x) { return Weighted(t, add(t.constant(other_rc), x), s); }, Random(1, c, rng)},
      {"sub_lhs", [&](Tape& t, Var x) { return Weighted(t, sub(x, t.constant(row)), s); }, Random(r, c, rng)},
      {"sub_rhs", [&](Tape& t, Var x) { return Weighted(t, sub(t.constant(other_rc), x), s); }, Random(r, c, rng)},
      {"mul", [&](Tape& t, Var x) { return Weighted(t, mul(x, t.constant(other_rc)), s); }, Random(r, c, rng)},
      {"mul_self", [&](Tape& t, Var x) { return Weighted(t, mul(x, x), s); }, Random(r, c, rng)},
      {"scale", [&](Tape& t, Var x) { return Weighted(t, scale(x, -2.5), s); }, Random(r, c, rng)},
      {"concat", [&](Tape& t, Var x) { return Weighted(t, concat({x, t.constant(other_rk), x}), s); }, Random(r, c, rng)},
      {"slice", [&](Tape& t, Var x) { return Weighted(t, slice(x, 0, (c + 1) / 2), s); }, Random(r, c, rng)},
      {"sum", [&](Tape&, Var x) { return sum(x); }, Random(r, c, rng)},
      {"tanh", [&](Tape& t, Var x) { return Weighted(t, tanh(x), s); }, Random(r, c, rng, -2, 2)},
      {"sigmoid", [&](Tape& t, Var x) { return Weighted(t, sigmoid(x), s); }, Random(r, c, rng, -3, 3)},
      {"exp", [&](Tape& t, Var x) { return Weighted(t, exp(x), s); }, Random(r, c, rng, -2, 2)},
      {"log", [&](Tape& t, Var x) { return Weighted(t, log(x), s); }, Random(r, c, rng, 0.2, 3)},
      {"square", [&](Tape& t, Var x) { return Weighted(t, square(x), s); }, Random(r, c, rng)},
      {"clamp", [&](Tape& t, Var x) { return Weighted(t, clamp(x, -0.5, 0.5), s); }, Random(r, c, rng, -0.45, 0.45)},
  };
  std::vector<GradResult> out;
  for (const auto& cs : cases) out.push_back({cs.name, grad_check(cs.f, cs.point)});
  return out;
}

std::vector<GradResult> tiny_vrnn_grad_checks(std::uint64_t seed) {
  vrnn::HyperParams hyper;
  hyper.history = 3;
  hyper.window = 5;
  hyper.latent_dim = 2;
  hyper.enc_hidden = 8;
  hyper.small_hidden = 8;
  hyper.gru_hidden = 8;

  std::mt19937_64 rng(seed);
  vrnn::VrnnParams params = vrnn::init_params(hyper, seed);
  for_each_weight(
      [&](const std::string& name, Tensor& t) {
        if (name.ends_with(".bias")) t = Random(t.rows(), t.cols(), rng, -0.5, 0.5);
      },
      params);

  // Three windows of smooth synthetic motion, already standardized.
  vrnn::SequenceBatch batch;
  std::normal_distribution<double> normal;
  for (int t = 0; t < hyper.window; ++t) {
    batch.inputs.push_back(Tensor::zeros({3, static_cast<std::size_t>(vrnn::kInputDim)}));
    batch.targets.push_back(Tensor::zeros({3, static_cast<std::size_t>(vrnn::kTargetDim)}));
    for (std::size_t row = 0; row < 3; ++row) {
      for (int d = 0; d < vrnn::kInputDim; ++d) {
        const double v = std::sin(0.4 * t + 0.7 * d + 1.3 * static_cast<double>(row)) + 0.1 * normal(rng);
        batch.inputs.back().at(row, d) = v;
        if (d < vrnn::kTargetDim) batch.targets.back().at(row, d) = v;
      }
    }
  }
  const auto noise = vrnn::draw_noise(batch.steps(), batch.batch(), hyper.latent_dim, seed + 1);

  std::vector<std::string> names;
  std::vector<Tensor> points;
  for_each_weight(
      [&](const std::string& n, const Tensor& t) {
        names.push_back(n);
        points.push_back(t);
      },
      params);

  std::vector<GradResult> out;
  for (std::size_t target = 0; target < names.size(); ++target) {
    const ScalarFn f = [&](Tape& tape, Var x) {
      vrnn::graph::BoundParams b;
      std::size_t i = 0;
      for_each_weight(
          [&](const std::string&, const Tensor& t, Var& v) { v = (i++ == target) ? x : tape.constant(t); },
          params, b);
      return vrnn::elbo_loss(b, batch, hyper, noise);
    };
    out.push_back({names[target], grad_check(f, points[target], 1e-5)});
  }
  return out;
}

}  // namespace cocarry::testing
