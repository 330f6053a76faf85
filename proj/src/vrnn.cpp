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

#include "cocarry/vrnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cocarry/error.hpp"
#include "cocarry/random.hpp"

namespace cocarry::vrnn {

namespace {

using diff::Var;

// --- shapes -------------------------------------------------------------------

struct LayerShape {
  std::size_t in;
  std::size_t out;
};

// Expected (in, out) for every Linear, in for_each_weight order (one entry per
// weight/bias pair).
std::vector<std::pair<std::string, LayerShape>> expected_layers(const HyperParams& h) {
  const auto s = static_cast<std::size_t>(h.small_hidden);
  const auto e = static_cast<std::size_t>(h.enc_hidden);
  const auto g = static_cast<std::size_t>(h.gru_hidden);
  const auto z = static_cast<std::size_t>(h.latent_dim);
  return {
      {"embed_x.first", {kInputDim, s}},    {"embed_x.second", {s, s}},
      {"embed_z.first", {z, s}},            {"embed_z.second", {s, s}},
      {"encoder.first", {g + s, e}},        {"encoder.second", {e, e}},
      {"enc_head.mean", {e, z}},            {"enc_head.log_var", {e, z}},
      {"prior.first", {g, s}},              {"prior.second", {s, s}},
      {"prior_head.mean", {s, z}},          {"prior_head.log_var", {s, z}},
      {"decoder.first", {s + g, e}},        {"decoder.second", {e, e}},
      {"decoder_out", {e, kTargetDim}},     {"gru.input", {2 * s, 3 * g}},
      {"gru.hidden", {g, 3 * g}},
  };
}

template <typename F>
void for_each_layer_shape(const HyperParams& h, F f) {
  for (const auto& [name, shape] : expected_layers(h)) {
    f(name + ".weight", diff::Shape{shape.in, shape.out});
    f(name + ".bias", diff::Shape{1, shape.out});
  }
}

VrnnParams make_params(const HyperParams& hyper, const std::function<Tensor(const diff::Shape&, bool)>& make) {
  VrnnParams p;
  std::vector<diff::Shape> shapes;
  for_each_layer_shape(hyper, [&](const std::string&, const diff::Shape& s) { shapes.push_back(s); });
  std::size_t i = 0;
  for_each_weight(
      [&](const std::string& name, Tensor& t) {
        const bool is_bias = name.size() >= 5 && name.compare(name.size() - 5, 5, ".bias") == 0;
        t = make(shapes.at(i++), is_bias);
      },
      p);
  return p;
}

// --- Eigen forward helpers ----------------------------------------------------

RowMatrix apply_tanh(RowMatrix m) {
  m = m.unaryExpr([](double v) { return std::tanh(v); });
  return m;
}

RowMatrix apply_sigmoid(const RowMatrix& m) {
  return m.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

RowMatrix linear(const LinearT<Tensor>& l, const RowMatrix& x, const char* what) {
  if (static_cast<std::size_t>(x.cols()) != l.weight.rows()) {
    throw ShapeError(std::string(what) + ": input has " + std::to_string(x.cols()) +
                     " columns, layer expects " + std::to_string(l.weight.rows()));
  }
  RowMatrix y = x * l.weight.mat();
  y.rowwise() += l.bias.mat().row(0);
  return y;
}

RowMatrix mlp(const MlpT<Tensor>& m, const RowMatrix& x, const char* what) {
  return apply_tanh(linear(m.second, apply_tanh(linear(m.first, x, what)), what));
}

RowMatrix hcat(const RowMatrix& a, const RowMatrix& b, const char* what) {
  if (a.rows() != b.rows()) {
    throw ShapeError(std::string(what) + ": batch sizes differ (" + std::to_string(a.rows()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
  RowMatrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

RowMatrix clamp_log_var(RowMatrix m) {
  return m.unaryExpr([](double v) { return std::clamp(v, kLogVarMin, kLogVarMax); });
}

GaussianParams head(const HeadT<Tensor>& h, const RowMatrix& features, const char* what) {
  return {linear(h.mean, features, what), clamp_log_var(linear(h.log_var, features, what))};
}

RowMatrix decode_embedded(const VrnnParams& p, const RowMatrix& z_emb, const RowMatrix& h_prev) {
  return linear(p.decoder_out, mlp(p.decoder, hcat(z_emb, h_prev, "decode"), "decode"), "decode");
}

RowMatrix gru_step(const VrnnParams& p, const RowMatrix& h_prev, const RowMatrix& input) {
  const Eigen::Index g = h_prev.cols();
  if (static_cast<std::size_t>(g) != p.gru.hidden.weight.rows()) {
    throw ShapeError("recurrence: hidden state has " + std::to_string(g) + " columns, expected " +
                     std::to_string(p.gru.hidden.weight.rows()));
  }
  const RowMatrix gi = linear(p.gru.input, input, "recurrence");
  const RowMatrix gh = linear(p.gru.hidden, h_prev, "recurrence");
  const RowMatrix r = apply_sigmoid(gi.leftCols(g) + gh.leftCols(g));
  const RowMatrix u = apply_sigmoid(gi.middleCols(g, g) + gh.middleCols(g, g));
  const RowMatrix n = apply_tanh(gi.rightCols(g) + r.cwiseProduct(gh.rightCols(g)));
  return n + u.cwiseProduct(h_prev - n);
}

// --- tape helpers -------------------------------------------------------------

Var linear(const LinearT<Var>& l, Var x) { return diff::add(diff::matmul(x, l.weight), l.bias); }

Var mlp(const MlpT<Var>& m, Var x) {
  return diff::tanh(linear(m.second, diff::tanh(linear(m.first, x))));
}

graph::GaussianVars head(const HeadT<Var>& h, Var features) {
  return {linear(h.mean, features),
          diff::clamp(linear(h.log_var, features), kLogVarMin, kLogVarMax)};
}

Var decode_embedded(const graph::BoundParams& p, Var z_emb, Var h_prev) {
  return linear(p.decoder_out, mlp(p.decoder, diff::concat({z_emb, h_prev})));
}

Var gru_step(const graph::BoundParams& p, Var h_prev, Var input) {
  const std::size_t g = h_prev.value().cols();
  const Var gi = linear(p.gru.input, input);
  const Var gh = linear(p.gru.hidden, h_prev);
  const Var r = diff::sigmoid(diff::add(diff::slice(gi, 0, g), diff::slice(gh, 0, g)));
  const Var u = diff::sigmoid(diff::add(diff::slice(gi, g, 2 * g), diff::slice(gh, g, 2 * g)));
  const Var n = diff::tanh(
      diff::add(diff::slice(gi, 2 * g, 3 * g), diff::mul(r, diff::slice(gh, 2 * g, 3 * g))));
  return diff::add(n, diff::mul(u, diff::sub(h_prev, n)));
}

}  // namespace

// --- hyper-parameters -----------------------------------------------------------

void HyperParams::validate() const {
  if (history <= 0 || window <= history) throw Error("hyper: need 0 < H < T");
  if (latent_dim <= 0 || enc_hidden <= 0 || small_hidden <= 0 || gru_hidden <= 0) {
    throw Error("hyper: layer sizes must be positive");
  }
  if (!(kl_weight >= 0.0) || !(learning_rate > 0.0) || batch_size <= 0 || epochs < 0) {
    throw Error("hyper: invalid optimization settings");
  }
}

void to_json(nlohmann::json& j, const HyperParams& h) {
  j = nlohmann::json{{"history", h.history},         {"window", h.window},
                     {"latent_dim", h.latent_dim},   {"enc_hidden", h.enc_hidden},
                     {"small_hidden", h.small_hidden}, {"gru_hidden", h.gru_hidden},
                     {"kl_weight", h.kl_weight},     {"learning_rate", h.learning_rate},
                     {"batch_size", h.batch_size},   {"epochs", h.epochs},
                     {"grad_clip", h.grad_clip},     {"seed", h.seed}};
}

void from_json(const nlohmann::json& j, HyperParams& h) {
  HyperParams d;
  h.history = j.value("history", d.history);
  h.window = j.value("window", d.window);
  h.latent_dim = j.value("latent_dim", d.latent_dim);
  h.enc_hidden = j.value("enc_hidden", d.enc_hidden);
  h.small_hidden = j.value("small_hidden", d.small_hidden);
  h.gru_hidden = j.value("gru_hidden", d.gru_hidden);
  h.kl_weight = j.value("kl_weight", d.kl_weight);
  h.learning_rate = j.value("learning_rate", d.learning_rate);
  h.batch_size = j.value("batch_size", d.batch_size);
  h.epochs = j.value("epochs", d.epochs);
  h.grad_clip = j.value("grad_clip", d.grad_clip);
  h.seed = j.value("seed", d.seed);
}

// --- parameters -------------------------------------------------------------------

VrnnParams init_params(const HyperParams& hyper, std::uint64_t seed) {
  hyper.validate();
  std::mt19937_64 rng(seed);
  return make_params(hyper, [&](const diff::Shape& s, bool is_bias) {
    if (is_bias) return Tensor::zeros(s);
    const double limit = std::sqrt(6.0 / static_cast<double>(s[0] + s[1]));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> v(s[0] * s[1]);
    for (double& x : v) x = dist(rng);
    return Tensor(s, std::move(v));
  });
}

VrnnParams zero_params(const HyperParams& hyper) {
  hyper.validate();
  return make_params(hyper, [](const diff::Shape& s, bool) { return Tensor::zeros(s); });
}

void check_shapes(const VrnnParams& params, const HyperParams& hyper) {
  std::vector<std::pair<std::string, diff::Shape>> expected;
  for_each_layer_shape(hyper, [&](const std::string& n, const diff::Shape& s) { expected.emplace_back(n, s); });
  std::size_t i = 0;
  for_each_weight(
      [&](const std::string& name, const Tensor& t) {
        const auto& [exp_name, exp_shape] = expected.at(i++);
        if (t.shape() != exp_shape) {
          diff::Tensor probe = Tensor::zeros(exp_shape);
          throw ShapeError("parameter " + name + " has shape " + t.shape_string() + ", expected " +
                           probe.shape_string());
        }
      },
      params);
}

std::size_t parameter_count(const VrnnParams& params) {
  std::size_t n = 0;
  for_each_weight([&](const std::string&, const Tensor& t) { n += t.size(); }, params);
  return n;
}

// --- inference ----------------------------------------------------------------------

RowMatrix embed_input(const VrnnParams& p, const RowMatrix& x) { return mlp(p.embed_x, x, "embed_input"); }

RowMatrix embed_latent(const VrnnParams& p, const RowMatrix& z) { return mlp(p.embed_z, z, "embed_latent"); }

GaussianParams posterior(const VrnnParams& p, const RowMatrix& h_prev, const RowMatrix& x_embedded) {
  return head(p.enc_head, mlp(p.encoder, hcat(h_prev, x_embedded, "posterior"), "posterior"), "posterior");
}

GaussianParams prior(const VrnnParams& p, const RowMatrix& h_prev) {
  return head(p.prior_head, mlp(p.prior, h_prev, "prior"), "prior");
}

RowMatrix reparameterize(const GaussianParams& g, const RowMatrix& noise) {
  if (noise.rows() != g.mean.rows() || noise.cols() != g.mean.cols()) {
    throw ShapeError("reparameterize: noise shape does not match the Gaussian");
  }
  const RowMatrix std_dev = (0.5 * g.log_var).unaryExpr([](double v) { return std::exp(v); });
  return g.mean + std_dev.cwiseProduct(noise);
}

RowMatrix decode(const VrnnParams& p, const RowMatrix& z, const RowMatrix& h_prev) {
  return decode_embedded(p, embed_latent(p, z), h_prev);
}

RowMatrix recurrence(const VrnnParams& p, const RowMatrix& h_prev, const RowMatrix& z,
                     const RowMatrix& x_embedded) {
  return gru_step(p, h_prev, hcat(embed_latent(p, z), x_embedded, "recurrence"));
}

Eigen::VectorXd kl_divergence(const GaussianParams& q, const GaussianParams& p) {
  const Eigen::ArrayXXd lq = q.log_var.array();
  const Eigen::ArrayXXd lp = p.log_var.array();
  const Eigen::ArrayXXd d = (q.mean - p.mean).array();
  const Eigen::ArrayXXd terms = lp - lq + (lq.exp() + d.square()) * (-lp).exp() - 1.0;
  return 0.5 * terms.rowwise().sum().matrix();
}

// --- training graph ----------------------------------------------------------------

namespace graph {

BoundParams bind(Tape& tape, const VrnnParams& params) {
  BoundParams b;
  for_each_weight([&](const std::string&, const Tensor& t, Var& v) { v = tape.leaf(t); }, params, b);
  return b;
}

Var embed_input(const BoundParams& p, Var x) { return mlp(p.embed_x, x); }

GaussianVars posterior(const BoundParams& p, Var h_prev, Var x_embedded) {
  return head(p.enc_head, mlp(p.encoder, diff::concat({h_prev, x_embedded})));
}

GaussianVars prior(const BoundParams& p, Var h_prev) { return head(p.prior_head, mlp(p.prior, h_prev)); }

Var reparameterize(const GaussianVars& g, Var noise) {
  return diff::add(g.mean, diff::mul(diff::exp(diff::scale(g.log_var, 0.5)), noise));
}

Var decode(const BoundParams& p, Var z, Var h_prev) {
  return decode_embedded(p, mlp(p.embed_z, z), h_prev);
}

Var recurrence(const BoundParams& p, Var h_prev, Var z, Var x_embedded) {
  return gru_step(p, h_prev, diff::concat({mlp(p.embed_z, z), x_embedded}));
}

Var kl_divergence(const GaussianVars& q, const GaussianVars& p) {
  Tape& tape = *q.mean.tape;
  const Var inv_var_p = diff::exp(diff::scale(p.log_var, -1.0));
  const Var spread = diff::add(diff::exp(q.log_var), diff::square(diff::sub(q.mean, p.mean)));
  const Var inner = diff::add(diff::sub(p.log_var, q.log_var), diff::mul(spread, inv_var_p));
  const double count = static_cast<double>(q.mean.value().size());
  return diff::scale(diff::add(diff::sum(inner), tape.constant(Tensor::scalar(-count))), 0.5);
}

}  // namespace graph

// --- batches and loss -----------------------------------------------------------------

SequenceBatch make_batch(std::span<const Window* const> windows, const Normalization& norm) {
  if (windows.empty()) throw Error("make_batch: no windows");
  const std::size_t steps = windows.front()->frames.size();
  const std::size_t b = windows.size();
  SequenceBatch batch;
  batch.inputs.assign(steps, Tensor::zeros({b, static_cast<std::size_t>(kInputDim)}));
  batch.targets.assign(steps, Tensor::zeros({b, static_cast<std::size_t>(kTargetDim)}));
  for (std::size_t row = 0; row < b; ++row) {
    if (windows[row]->frames.size() != steps) throw ShapeError("make_batch: windows differ in length");
    for (std::size_t t = 0; t < steps; ++t) {
      const auto x = norm.apply(windows[row]->frames[t]);
      for (int k = 0; k < kInputDim; ++k) batch.inputs[t].at(row, k) = x[k];
      for (int k = 0; k < kTargetDim; ++k) batch.targets[t].at(row, k) = x[k];
    }
  }
  return batch;
}

std::vector<Tensor> draw_noise(std::size_t steps, std::size_t batch, int latent_dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Tensor> out;
  out.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor n = Tensor::zeros({batch, static_cast<std::size_t>(latent_dim)});
    for (double& v : n.data()) v = normal(rng);
    out.push_back(std::move(n));
  }
  return out;
}

diff::Var elbo_loss(const graph::BoundParams& p, const SequenceBatch& batch,
                    const HyperParams& hyper, std::span<const Tensor> noise, LossTerms* terms) {
  using namespace graph;
  if (batch.steps() == 0) throw Error("elbo_loss: empty batch");
  if (noise.size() < batch.steps()) throw ShapeError("elbo_loss: not enough noise draws");
  Tape& tape = *p.decoder_out.weight.tape;
  const std::size_t b = batch.batch();

  Var h = tape.constant(Tensor::zeros({b, static_cast<std::size_t>(hyper.gru_hidden)}));
  Var rec_total = tape.constant(Tensor::scalar(0.0));
  Var kl_total = tape.constant(Tensor::scalar(0.0));
  for (std::size_t t = 0; t < batch.steps(); ++t) {
    const Var x = tape.constant(batch.inputs[t]);
    const Var target = tape.constant(batch.targets[t]);
    const Var x_emb = embed_input(p, x);
    const GaussianVars q = posterior(p, h, x_emb);
    const GaussianVars pr = prior(p, h);
    const Var z = reparameterize(q, tape.constant(noise[t]));
    const Var z_emb = mlp(p.embed_z, z);
    const Var pred = decode_embedded(p, z_emb, h);
    const Var rec = diff::sum(diff::square(diff::sub(pred, target)));
    const Var kl = kl_divergence(q, pr);
    if (!std::isfinite(rec.value().item()) || !std::isfinite(kl.value().item())) {
      throw Error("elbo_loss: non-finite loss at step " + std::to_string(t));
    }
    rec_total = diff::add(rec_total, rec);
    kl_total = diff::add(kl_total, kl);
    h = gru_step(p, h, diff::concat({z_emb, x_emb}));
  }
  const double inv_b = 1.0 / static_cast<double>(b);
  if (terms != nullptr) {
    terms->reconstruction = rec_total.value().item() * inv_b;
    terms->kl = kl_total.value().item() * inv_b;
  }
  return diff::scale(diff::add(rec_total, diff::scale(kl_total, hyper.kl_weight)), inv_b);
}

double elbo_loss_value(const VrnnParams& p, const SequenceBatch& batch, const HyperParams& hyper,
                       std::span<const Tensor> noise) {
  if (batch.steps() == 0) throw Error("elbo_loss: empty batch");
  if (noise.size() < batch.steps()) throw ShapeError("elbo_loss: not enough noise draws");
  const auto b = static_cast<Eigen::Index>(batch.batch());
  RowMatrix h = RowMatrix::Zero(b, hyper.gru_hidden);
  double rec_total = 0.0;
  double kl_total = 0.0;
  for (std::size_t t = 0; t < batch.steps(); ++t) {
    const RowMatrix x_emb = embed_input(p, batch.inputs[t].mat());
    const GaussianParams q = posterior(p, h, x_emb);
    const GaussianParams pr = prior(p, h);
    const RowMatrix z = reparameterize(q, noise[t].mat());
    const RowMatrix z_emb = embed_latent(p, z);
    const RowMatrix pred = decode_embedded(p, z_emb, h);
    const double rec = (pred - batch.targets[t].mat()).squaredNorm();
    const double kl = kl_divergence(q, pr).sum();
    if (!std::isfinite(rec) || !std::isfinite(kl)) {
      throw Error("elbo_loss: non-finite loss at step " + std::to_string(t));
    }
    rec_total += rec;
    kl_total += kl;
    h = gru_step(p, h, hcat(z_emb, x_emb, "recurrence"));
  }
  return (rec_total + hyper.kl_weight * kl_total) / static_cast<double>(b);
}

// --- training ------------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kEvalNoiseStream = 0xe7a1u;

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;
};

void adam_update(VrnnParams& params, std::vector<Tensor>& grads, AdamState& st,
                 const HyperParams& hyper) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  if (hyper.grad_clip > 0.0) {
    double norm_sq = 0.0;
    for (const Tensor& g : grads) {
      for (double v : g.data()) norm_sq += v * v;
    }
    const double norm = std::sqrt(norm_sq);
    if (norm > hyper.grad_clip) {
      const double s = hyper.grad_clip / norm;
      for (Tensor& g : grads) {
        for (double& v : g.data()) v *= s;
      }
    }
  }

  ++st.step;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(st.step));
  std::size_t i = 0;
  for_each_weight(
      [&](const std::string&, Tensor& w) {
        Tensor& m = st.m[i];
        Tensor& v = st.v[i];
        const Tensor& g = grads[i];
        for (std::size_t k = 0; k < w.size(); ++k) {
          m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g[k];
          v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g[k] * g[k];
          w[k] -= hyper.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + kEps);
        }
        ++i;
      },
      params);
}

}  // namespace

double evaluate(const VrnnParams& params, std::span<const Window> windows, const HyperParams& hyper,
                const Normalization& norm) {
  if (windows.empty()) throw Error("evaluate: no windows");
  const auto bs = static_cast<std::size_t>(hyper.batch_size);
  double total = 0.0;
  for (std::size_t start = 0, batch_no = 0; start < windows.size(); start += bs, ++batch_no) {
    const std::size_t end = std::min(windows.size(), start + bs);
    std::vector<const Window*> ptrs;
    for (std::size_t i = start; i < end; ++i) ptrs.push_back(&windows[i]);
    const SequenceBatch batch = make_batch(ptrs, norm);
    const auto noise = draw_noise(batch.steps(), batch.batch(), hyper.latent_dim,
                                  derive_seed(hyper.seed, kEvalNoiseStream, batch_no));
    total += elbo_loss_value(params, batch, hyper, noise) * static_cast<double>(ptrs.size());
  }
  return total / static_cast<double>(windows.size());
}

TrainResult train(std::span<const Window> train_windows, std::span<const Window> val_windows,
                  const HyperParams& hyper, const Normalization& norm, const TrainOptions& options) {
  hyper.validate();
  if (train_windows.empty() || val_windows.empty()) {
    throw Error("train: training and validation splits must be non-empty");
  }
  TrainResult result;
  VrnnParams params = init_params(hyper, derive_seed(hyper.seed, 1));
  AdamState adam;
  for_each_weight(
      [&](const std::string&, const Tensor& t) {
        adam.m.push_back(Tensor::zeros(t.shape()));
        adam.v.push_back(Tensor::zeros(t.shape()));
      },
      params);

  result.initial_val_loss = evaluate(params, val_windows, hyper, norm);
  result.best_val_loss = result.initial_val_loss;
  result.params = params;

  std::vector<std::size_t> order(train_windows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(derive_seed(hyper.seed, 2));
  const auto bs = static_cast<std::size_t>(hyper.batch_size);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0, batch_no = 0; start < order.size(); start += bs, ++batch_no) {
      const std::size_t end = std::min(order.size(), start + bs);
      std::vector<const Window*> ptrs;
      for (std::size_t i = start; i < end; ++i) ptrs.push_back(&train_windows[order[i]]);
      const SequenceBatch batch = make_batch(ptrs, norm);
      const auto noise = draw_noise(batch.steps(), batch.batch(), hyper.latent_dim,
                                    derive_seed(hyper.seed, 3 + static_cast<std::uint64_t>(epoch), batch_no));

      diff::Tape tape;
      const graph::BoundParams bound = graph::bind(tape, params);
      const Var loss = elbo_loss(bound, batch, hyper, noise);
      const diff::Gradients grads = tape.backward(loss);
      std::vector<Tensor> g;
      for_each_weight([&](const std::string&, const Var& v) { g.push_back(grads.of(v)); }, bound);
      adam_update(params, g, adam, hyper);
      epoch_loss += loss.value().item() * static_cast<double>(ptrs.size());
    }
    epoch_loss /= static_cast<double>(order.size());
    const double val = evaluate(params, val_windows, hyper, norm);
    result.train_loss.push_back(epoch_loss);
    result.val_loss.push_back(val);
    if (val < result.best_val_loss) {
      result.best_val_loss = val;
      result.best_epoch = epoch;
      result.params = params;
    }
    if (options.on_epoch) options.on_epoch(epoch, epoch_loss, val);
  }
  return result;
}

// --- rollouts ------------------------------------------------------------------------------

namespace {

// Heading tracked as a unit (cos, sin) pair.
struct PoseIntegrator {
  Pose2 pose;
  double c;
  double s;

  explicit PoseIntegrator(const Pose2& start)
      : pose(start), c(std::cos(start.theta)), s(std::sin(start.theta)) {}

  const Pose2& advance(const Delta& d) {
    pose.x += d[0];
    pose.y += d[1];
    c += d[2];
    s += d[3];
    const double n = std::hypot(c, s);
    if (!(n > 0.0) || !std::isfinite(n)) throw Error("integrate_deltas: degenerate orientation pair");
    c /= n;
    s /= n;
    pose.theta = std::atan2(s, c);
    return pose;
  }
};

RowMatrix draw(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

void set_row(RowMatrix& m, Eigen::Index row, const std::array<double, ObservationFrame::kDim>& v) {
  for (int k = 0; k < kInputDim; ++k) m(row, k) = v[k];
}

}  // namespace

std::vector<Pose2> integrate_deltas(const Pose2& start, std::span<const Delta> deltas) {
  PoseIntegrator it(start);
  std::vector<Pose2> out;
  out.reserve(deltas.size());
  for (const Delta& d : deltas) out.push_back(it.advance(d));
  return out;
}

std::vector<DeltaSeq> sample_rollout(const Model& model, const RolloutRequest& req) {
  const HyperParams& hyper = model.hyper;
  const VrnnParams& p = model.params;
  const auto h_len = static_cast<std::size_t>(hyper.history);
  if (req.history.size() < h_len) {
    throw Error("sample_rollout: history has " + std::to_string(req.history.size()) +
                " frames, need " + std::to_string(h_len));
  }
  if (req.map == nullptr) throw Error("sample_rollout: map is required");
  if (req.n_samples <= 0 || req.horizon < 0) throw Error("sample_rollout: invalid sample count or horizon");

  const Eigen::Index n = req.n_samples;
  std::mt19937_64 rng(req.seed);
  RowMatrix h = RowMatrix::Zero(n, hyper.gru_hidden);
  RowMatrix x(n, kInputDim);

  for (std::size_t i = req.history.size() - h_len; i < req.history.size(); ++i) {
    const auto xn = model.normalization.apply(req.history[i]);
    for (Eigen::Index r = 0; r < n; ++r) set_row(x, r, xn);
    const RowMatrix x_emb = embed_input(p, x);
    const RowMatrix z = reparameterize(posterior(p, h, x_emb), draw(rng, n, hyper.latent_dim));
    h = gru_step(p, h, hcat(embed_latent(p, z), x_emb, "recurrence"));
  }

  std::vector<DeltaSeq> out(static_cast<std::size_t>(n));
  std::vector<PoseIntegrator> poses(static_cast<std::size_t>(n), PoseIntegrator(req.start));
  for (auto& seq : out) seq.reserve(static_cast<std::size_t>(req.horizon));

  for (int k = 0; k < req.horizon; ++k) {
    const RowMatrix z = reparameterize(prior(p, h), draw(rng, n, hyper.latent_dim));
    const RowMatrix z_emb = embed_latent(p, z);
    const RowMatrix d = decode_embedded(p, z_emb, h);
    for (Eigen::Index r = 0; r < n; ++r) {
      const std::array<double, ObservationFrame::kMotionDim> dn = {d(r, 0), d(r, 1), d(r, 2), d(r, 3)};
      const Delta delta = model.normalization.restore_motion(dn);
      auto& seq = out[static_cast<std::size_t>(r)];
      seq.push_back(delta);
      const Pose2& pose = poses[static_cast<std::size_t>(r)].advance(delta);
      ObservationFrame f = heading_features(pose, *req.map);
      f.dp = {delta[0], delta[1]};
      f.dcos = delta[2];
      f.dsin = delta[3];
      set_row(x, r, model.normalization.apply(f));
    }
    const RowMatrix x_emb = embed_input(p, x);
    h = gru_step(p, h, hcat(z_emb, x_emb, "recurrence"));
  }
  return out;
}

std::vector<std::vector<Pose2>> sample_pose_rollouts(const Model& model, const RolloutRequest& request) {
  std::vector<std::vector<Pose2>> out;
  for (const DeltaSeq& seq : sample_rollout(model, request)) {
    out.push_back(integrate_deltas(request.start, seq));
  }
  return out;
}

// --- checkpoints ---------------------------------------------------------------------------

nlohmann::json checkpoint_to_json(const Model& model) {
  nlohmann::json tensors = nlohmann::json::object();
  for_each_weight(
      [&](const std::string& name, const Tensor& t) {
        tensors[name] = {{"shape", t.shape()}, {"data", t.values()}};
      },
      model.params);
  return {{"format", "cocarry-vrnn-checkpoint"},
          {"version", kCheckpointVersion},
          {"hyper", model.hyper},
          {"normalization", model.normalization},
          {"tensors", tensors}};
}

Model checkpoint_from_json(const nlohmann::json& j) {
  Model model;
  try {
    if (j.at("format").get<std::string>() != "cocarry-vrnn-checkpoint") {
      throw DataError("not a model checkpoint");
    }
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + std::to_string(version));
    }
    model.hyper = j.at("hyper").get<HyperParams>();
    model.normalization = j.at("normalization").get<Normalization>();
    const auto& tensors = j.at("tensors");
    for_each_weight(
        [&](const std::string& name, Tensor& t) {
          const auto& e = tensors.at(name);
          t = Tensor(e.at("shape").get<diff::Shape>(), e.at("data").get<std::vector<double>>());
        },
        model.params);
    check_shapes(model.params, model.hyper);
  } catch (const DataError&) {
    throw;
  } catch (const std::exception& e) {
    throw DataError(std::string("checkpoint: ") + e.what());
  }
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_to_json(model).dump() + "\n");
}

Model load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace cocarry::vrnn
