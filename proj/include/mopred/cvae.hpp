#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "mopred/dataset.hpp"
#include "mopred/dct.hpp"
#include "mopred/nn.hpp"
#include "mopred/tensor.hpp"
#include "mopred/transition.hpp"

namespace mopred {

struct CvaeConfig {
  int K = 0;
  int A = 0;
  int N = 10;           // history frames
  int D_z = 64;
  int hidden = 128;
  int action_embed = 16;
  std::vector<int> mlp = {300, 200, 128};
  int P = 50;           // padded static frames during training
  int T0_max = 20;      // transition-length cap
  int T_max = 0;        // rollout budget, resolved before training
  int L = 10;           // junction half-window
  int M = 5;            // retained DCT frequencies
  int Q = 5;            // stopping window
  double delta = 0.015; // stopping threshold
  // Feed ground-truth previous poses on supervised frames during training.
  // Off, the decoder consumes its own outputs everywhere; at desk scale that
  // regime collapses to the conditional mean.
  bool teacher_forcing = true;
};

struct LossWeights {
  double rec = 100.0;
  double smooth = 100.0;
};

// Diagonal Gaussian produced by the posterior or prior heads. The standard
// deviation is exp of a log-std clamped to [-10, 10], so it is always
// strictly positive.
struct GaussianParams {
  Tensor mu;       // D_z x 1
  Tensor log_std;  // D_z x 1, clamped
  Tensor std_dev;  // D_z x 1
};

struct StoppingConfig {
  int Q = 5;
  double delta = 0.015;
  int T_max = 0;
};

// Recurrent conditional VAE: a shared history encoder, a posterior branch
// that additionally encodes the supervision target, a prior branch, and an
// autoregressive residual decoder, all conditioned on an action token.
struct CvaeModel {
  CvaeConfig cfg;
  GruParams hist_gru;       // shared by posterior and prior
  GruParams fut_gru;        // posterior only
  LinearParams act_embed;   // one-hot action -> token
  MlpParams post_mlp;
  LinearParams post_head;   // -> (mu, log sigma)
  MlpParams prior_mlp;
  LinearParams prior_head;  // -> (mu_hat, log sigma_hat)
  GruParams dec_gru;
  LinearParams dec_out;     // hidden -> pose residual

  static CvaeModel init(const CvaeConfig& cfg, std::uint64_t seed);
  static CvaeModel from_params(const CvaeConfig& cfg, const ParamMap& params);
  ParamMap params() const;

  Tensor action_token(int action) const;
  Tensor encode_history(const Motion& history) const;  // final hidden, H x 1

  GaussianParams encode_posterior(const Motion& history, const Motion& target,
                                  int action) const;
  GaussianParams encode_prior(const Motion& history, int action) const;
  GaussianParams prior_from_feature(const Tensor& history_feature, int action) const;

  // Autoregressive rollout of t_total frames. Per step the GRU consumes the
  // previous pose, z, the action token and the history feature; the output
  // projection is a residual added to the previous pose.
  // When `teacher` is non-null, step t0+i (i >= 1) consumes target frame i-1
  // instead of the model's own previous output; transition and first
  // supervised steps are always self-fed.
  std::vector<Tensor> decode_frames(const Tensor& history_feature,
                                    const Tensor& action_token, const Tensor& z,
                                    int t_total, const Tensor& last_history_pose,
                                    const Motion* teacher = nullptr,
                                    int t0 = 0) const;
  Tensor decode(const Motion& history, int action, const Tensor& z, int t_total) const;
};

// z = eps .* sigma + mu.
Tensor reparameterize(const GaussianParams& g, const Tensor& eps);

// KL(post || prior) for diagonal Gaussians.
Tensor kl_divergence(const GaussianParams& post, const GaussianParams& prior);

// Mean squared frame error over the supervised tail: prediction frames
// [t0, t0+T+P) against the padded target. Transition frames receive no
// reconstruction supervision.
Tensor reconstruction_loss(const Tensor& y_hat, const Tensor& target, int t0);

struct LossParts {
  double rec = 0;
  double smooth = 0;
  double kl = 0;
  double total = 0;
};

// Complete training loss: lambda_rec * rec + lambda_smooth * smooth + kl,
// with z drawn from the posterior through the given standard-normal eps.
std::pair<Tensor, LossParts> total_loss(const CvaeModel& model,
                                        const TransitionSample& sample,
                                        const LossWeights& weights,
                                        const DctBasis& basis, const Tensor& eps);

// First window start i (0-based) whose mean pose deviation over frames
// [i, i+Q] falls below delta; nullopt when no window qualifies.
std::optional<int> stopping_index(const Motion& rollout, const StoppingConfig& cfg);

struct Rollout {
  Motion full;              // T_max frames
  Motion truncated;         // cut at the stopping rule, or equal to full
  std::optional<int> stop;  // window start that fired
};

// Samples z from the prior, rolls out T_max frames and truncates at the
// stopping rule. The history's last N frames condition the model.
Rollout predict_rollout(const CvaeModel& model, const Motion& history, int action,
                        const StoppingConfig& cfg, Rng& rng);
Motion predict(const CvaeModel& model, const Motion& history, int action,
               const StoppingConfig& cfg, Rng& rng);

// Recursive multi-action prediction: each truncated prediction feeds the next
// step's history window.
std::vector<Rollout> predict_sequence_rollouts(const CvaeModel& model,
                                               const Motion& history,
                                               std::span<const int> actions,
                                               const StoppingConfig& cfg, Rng& rng);
std::vector<Motion> predict_sequence(const CvaeModel& model, const Motion& history,
                                     std::span<const int> actions,
                                     const StoppingConfig& cfg, Rng& rng);

}  // namespace mopred
