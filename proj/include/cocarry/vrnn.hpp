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

// Variational recurrent sequence model over table motion.
//
// Per step tau, with GRU state h (zero at the start of a window):
//
//   x_emb  = embed_x(x_tau)                       8 -> 64 -> 64
//   q      = encoder([h, x_emb]) -> (mu, logvar)  128 -> 128 -> 128 -> 6 + 6
//   p      = prior(h) -> (mu, logvar)             64 -> 64 -> 64 -> 6 + 6
//   z      = mu + exp(logvar / 2) * eps
//   s_hat  = decoder([embed_z(z), h])             128 -> 128 -> 128 -> 4
//   h'     = GRU(h, [embed_z(z), x_emb])
//
// Training minimizes sum_tau ||s_hat - s||^2 + kl_weight * KL(q || p) with
// latents drawn from the posterior at every step. Generation conditions on the
// observed history through the posterior path, then samples the prior.
//
// Two forward implementations exist: a tape-recorded one (namespace graph) for
// training and an Eigen one for inference. Tests keep them in agreement.

#ifndef COCARRY_VRNN_HPP_
#define COCARRY_VRNN_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cocarry/datasets.hpp"
#include "cocarry/diffcore.hpp"
#include "cocarry/world.hpp"

namespace cocarry::vrnn {

using diff::RowMatrix;
using diff::Tensor;

inline constexpr int kInputDim = static_cast<int>(ObservationFrame::kDim);
inline constexpr int kTargetDim = static_cast<int>(ObservationFrame::kMotionDim);
inline constexpr double kLogVarMin = -10.0;
inline constexpr double kLogVarMax = 10.0;

struct HyperParams {
  int history = 30;  // H
  int window = 120;  // T
  int latent_dim = 6;
  int enc_hidden = 128;
  int small_hidden = 64;
  int gru_hidden = 64;
  double kl_weight = 1.0;
  double learning_rate = 3e-4;
  int batch_size = 32;
  int epochs = 50;
  double grad_clip = 5.0;  // global L2 norm; <= 0 disables
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const HyperParams&) const = default;
};

void to_json(nlohmann::json& j, const HyperParams& h);
void from_json(const nlohmann::json& j, HyperParams& h);

// Weight containers are templated so one layout serves both plain tensors and
// tape variables. Linear weights are (in x out), biases (1 x out).
template <typename T>
struct LinearT {
  T weight;
  T bias;
};
template <typename T>
struct MlpT {  // tanh after both layers
  LinearT<T> first;
  LinearT<T> second;
};
template <typename T>
struct HeadT {
  LinearT<T> mean;
  LinearT<T> log_var;
};
template <typename T>
struct GruT {  // gate columns ordered [reset | update | candidate]
  LinearT<T> input;
  LinearT<T> hidden;
};

template <typename T>
struct Weights {
  MlpT<T> embed_x;
  MlpT<T> embed_z;
  MlpT<T> encoder;
  HeadT<T> enc_head;
  MlpT<T> prior;
  HeadT<T> prior_head;
  MlpT<T> decoder;
  LinearT<T> decoder_out;
  GruT<T> gru;
};

namespace detail {
template <typename F, typename... L>
void visit_linear(const std::string& name, F& f, L&... l) {
  f(name + ".weight", l.weight...);
  f(name + ".bias", l.bias...);
}
template <typename F, typename... M>
void visit_mlp(const std::string& name, F& f, M&... m) {
  visit_linear(name + ".first", f, m.first...);
  visit_linear(name + ".second", f, m.second...);
}
template <typename F, typename... H>
void visit_head(const std::string& name, F& f, H&... h) {
  visit_linear(name + ".mean", f, h.mean...);
  visit_linear(name + ".log_var", f, h.log_var...);
}
}  // namespace detail

// Calls f(name, member...) for every weight tensor, in a fixed order, across
// any number of structurally identical weight sets.
template <typename F, typename... W>
void for_each_weight(F&& f, W&... w) {
  detail::visit_mlp("embed_x", f, w.embed_x...);
  detail::visit_mlp("embed_z", f, w.embed_z...);
  detail::visit_mlp("encoder", f, w.encoder...);
  detail::visit_head("enc_head", f, w.enc_head...);
  detail::visit_mlp("prior", f, w.prior...);
  detail::visit_head("prior_head", f, w.prior_head...);
  detail::visit_mlp("decoder", f, w.decoder...);
  detail::visit_linear("decoder_out", f, w.decoder_out...);
  detail::visit_linear("gru.input", f, w.gru.input...);
  detail::visit_linear("gru.hidden", f, w.gru.hidden...);
}

using VrnnParams = Weights<Tensor>;

// Glorot-uniform weights, zero biases.
VrnnParams init_params(const HyperParams& hyper, std::uint64_t seed);
VrnnParams zero_params(const HyperParams& hyper);
// Throws ShapeError when any tensor disagrees with `hyper`.
void check_shapes(const VrnnParams& params, const HyperParams& hyper);
std::size_t parameter_count(const VrnnParams& params);

// A trained model: architecture, input statistics, and weights.
struct Model {
  HyperParams hyper;
  Normalization normalization;
  VrnnParams params;
};

// --- inference (Eigen) --------------------------------------------------------
// All functions operate on batches: one row per sequence.

struct GaussianParams {
  RowMatrix mean;
  RowMatrix log_var;  // clamped to [kLogVarMin, kLogVarMax]
};

RowMatrix embed_input(const VrnnParams& p, const RowMatrix& x);
RowMatrix embed_latent(const VrnnParams& p, const RowMatrix& z);
GaussianParams posterior(const VrnnParams& p, const RowMatrix& h_prev, const RowMatrix& x_embedded);
GaussianParams prior(const VrnnParams& p, const RowMatrix& h_prev);
RowMatrix reparameterize(const GaussianParams& g, const RowMatrix& noise);
RowMatrix decode(const VrnnParams& p, const RowMatrix& z, const RowMatrix& h_prev);
RowMatrix recurrence(const VrnnParams& p, const RowMatrix& h_prev, const RowMatrix& z,
                     const RowMatrix& x_embedded);

// Closed-form KL(q || p) of diagonal Gaussians, one value per row.
Eigen::VectorXd kl_divergence(const GaussianParams& q, const GaussianParams& p);

// --- training graph -----------------------------------------------------------

namespace graph {

using diff::Tape;
using diff::Var;
using BoundParams = Weights<Var>;

BoundParams bind(Tape& tape, const VrnnParams& params);

struct GaussianVars {
  Var mean;
  Var log_var;
};

Var embed_input(const BoundParams& p, Var x);
GaussianVars posterior(const BoundParams& p, Var h_prev, Var x_embedded);
GaussianVars prior(const BoundParams& p, Var h_prev);
Var reparameterize(const GaussianVars& g, Var noise);
Var decode(const BoundParams& p, Var z, Var h_prev);
Var recurrence(const BoundParams& p, Var h_prev, Var z, Var x_embedded);
// Summed over rows and latent dimensions.
Var kl_divergence(const GaussianVars& q, const GaussianVars& p);

}  // namespace graph

// Normalized inputs and targets for a batch of windows, stored step-major:
// inputs[tau] is (B x 8), targets[tau] is (B x 4).
struct SequenceBatch {
  std::vector<Tensor> inputs;
  std::vector<Tensor> targets;
  std::size_t batch() const { return inputs.empty() ? 0 : inputs.front().rows(); }
  std::size_t steps() const { return inputs.size(); }
};

SequenceBatch make_batch(std::span<const Window* const> windows, const Normalization& norm);

// Standard-normal draws, noise[tau] is (B x latent_dim).
std::vector<Tensor> draw_noise(std::size_t steps, std::size_t batch, int latent_dim,
                               std::uint64_t seed);

struct LossTerms {
  double reconstruction = 0.0;
  double kl = 0.0;
};

// Per-window mean of sum_tau [L2 + kl_weight * KL]. Throws Error naming the
// step when a term goes non-finite.
diff::Var elbo_loss(const graph::BoundParams& params, const SequenceBatch& batch,
                    const HyperParams& hyper, std::span<const Tensor> noise,
                    LossTerms* terms = nullptr);

double elbo_loss_value(const VrnnParams& params, const SequenceBatch& batch,
                       const HyperParams& hyper, std::span<const Tensor> noise);

struct TrainResult {
  VrnnParams params;  // best validation checkpoint
  std::vector<double> train_loss;  // per epoch
  std::vector<double> val_loss;    // per epoch
  double initial_val_loss = 0.0;
  double best_val_loss = 0.0;
  int best_epoch = -1;  // -1 when no epoch beat the initialization
};

struct TrainOptions {
  // Called after each epoch with (epoch, train_loss, val_loss).
  std::function<void(int, double, double)> on_epoch;
};

// Adam over shuffled minibatches; deterministic given hyper.seed. Throws
// Error if either split is empty.
TrainResult train(std::span<const Window> train_windows, std::span<const Window> val_windows,
                  const HyperParams& hyper, const Normalization& norm,
                  const TrainOptions& options = {});

// Mean validation loss over the windows with the fixed evaluation noise.
double evaluate(const VrnnParams& params, std::span<const Window> windows,
                const HyperParams& hyper, const Normalization& norm);

// --- rollouts -----------------------------------------------------------------

using Delta = std::array<double, ObservationFrame::kMotionDim>;
using DeltaSeq = std::vector<Delta>;

// Positions accumulate dp; orientation tracks the (cos, sin) pair, renormalized
// after every step. Returns one pose per delta. Throws Error on a degenerate
// (0, 0) orientation pair.
std::vector<Pose2> integrate_deltas(const Pose2& start, std::span<const Delta> deltas);

struct RolloutRequest {
  std::span<const ObservationFrame> history;  // raw frames, oldest first; >= H
  Pose2 start;  // pose at the last history frame
  const MapConfig* map = nullptr;
  int n_samples = 16;
  int horizon = 90;
  std::uint64_t seed = 0;
};

// Conditions on the last H history frames through the posterior, then samples
// the prior for `horizon` steps, feeding each decoded delta back with goal and
// obstacle headings recomputed from the integrated pose.
std::vector<DeltaSeq> sample_rollout(const Model& model, const RolloutRequest& request);

// sample_rollout followed by integrate_deltas per sample.
std::vector<std::vector<Pose2>> sample_pose_rollouts(const Model& model,
                                                     const RolloutRequest& request);

// --- checkpoints ----------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

nlohmann::json checkpoint_to_json(const Model& model);
Model checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
// Throws DataError on version or shape mismatch.
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace cocarry::vrnn

#endif  // COCARRY_VRNN_HPP_
