#include "mopred/cvae.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mopred {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<Tensor> motion_frames(const Motion& m, int start, int count) {
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(count));
  for (int t = start; t < start + count; ++t)
    out.push_back(pose_to_tensor(m.frame(t)));
  return out;
}

GaussianParams gaussian_from_head(const Tensor& head_out, int d_z) {
  GaussianParams g;
  g.mu = slice(head_out, 0, 0, d_z);
  g.log_std = clamp(slice(head_out, 0, d_z, d_z), -10.0, 10.0);
  g.std_dev = exp_op(g.log_std);
  return g;
}

}  // namespace

CvaeModel CvaeModel::init(const CvaeConfig& cfg, std::uint64_t seed) {
  if (cfg.K < 1 || cfg.A < 2 || cfg.N < 1 || cfg.D_z < 1 || cfg.hidden < 1)
    fail("cvae config: invalid dimensions");
  Rng rng(seed);
  CvaeModel m;
  m.cfg = cfg;
  m.hist_gru = GruParams::init(cfg.K, cfg.hidden, rng);
  m.fut_gru = GruParams::init(cfg.K, cfg.hidden, rng);
  m.act_embed = LinearParams::init(cfg.A, cfg.action_embed, rng);
  m.post_mlp = MlpParams::init(2 * cfg.hidden + cfg.action_embed, cfg.mlp,
                               Activation::kTanh, rng);
  m.post_head = LinearParams::init(cfg.mlp.back(), 2 * cfg.D_z, rng);
  m.prior_mlp = MlpParams::init(cfg.hidden + cfg.action_embed, cfg.mlp,
                                Activation::kTanh, rng);
  m.prior_head = LinearParams::init(cfg.mlp.back(), 2 * cfg.D_z, rng);
  m.dec_gru = GruParams::init(cfg.K + cfg.D_z + cfg.action_embed + cfg.hidden,
                              cfg.hidden, rng);
  m.dec_out = LinearParams::init(cfg.hidden, cfg.K, rng);
  return m;
}

CvaeModel CvaeModel::from_params(const CvaeConfig& cfg, const ParamMap& params) {
  CvaeModel m;
  m.cfg = cfg;
  m.hist_gru = GruParams::from_params(params, "hist_gru");
  m.fut_gru = GruParams::from_params(params, "fut_gru");
  m.act_embed = LinearParams::from_params(params, "act_embed");
  m.post_mlp = MlpParams::from_params(params, "post_mlp",
                                      static_cast<int>(cfg.mlp.size()),
                                      Activation::kTanh);
  m.post_head = LinearParams::from_params(params, "post_head");
  m.prior_mlp = MlpParams::from_params(params, "prior_mlp",
                                       static_cast<int>(cfg.mlp.size()),
                                       Activation::kTanh);
  m.prior_head = LinearParams::from_params(params, "prior_head");
  m.dec_gru = GruParams::from_params(params, "dec_gru");
  m.dec_out = LinearParams::from_params(params, "dec_out");
  return m;
}

ParamMap CvaeModel::params() const {
  ParamMap p;
  hist_gru.collect(p, "hist_gru");
  fut_gru.collect(p, "fut_gru");
  act_embed.collect(p, "act_embed");
  post_mlp.collect(p, "post_mlp");
  post_head.collect(p, "post_head");
  prior_mlp.collect(p, "prior_mlp");
  prior_head.collect(p, "prior_head");
  dec_gru.collect(p, "dec_gru");
  dec_out.collect(p, "dec_out");
  return p;
}

Tensor CvaeModel::action_token(int action) const {
  return act_embed.forward(one_hot(action, cfg.A));
}

Tensor CvaeModel::encode_history(const Motion& history) const {
  if (history.K != cfg.K) fail("encode_history: pose dimension mismatch");
  const int t = history.frames();
  const int start = std::max(0, t - cfg.N);
  auto frames = motion_frames(history, start, t - start);
  return hist_gru.run(frames, hist_gru.zero_state());
}

GaussianParams CvaeModel::encode_posterior(const Motion& history, const Motion& target,
                                           int action) const {
  Tensor h_x = encode_history(history);
  auto target_frames = motion_frames(target, 0, target.frames());
  Tensor h_y = fut_gru.run(target_frames, fut_gru.zero_state());
  const Tensor parts[3] = {h_x, h_y, action_token(action)};
  Tensor features = post_mlp.forward(concat(parts, 0));
  return gaussian_from_head(post_head.forward(features), cfg.D_z);
}

GaussianParams CvaeModel::encode_prior(const Motion& history, int action) const {
  return prior_from_feature(encode_history(history), action);
}

GaussianParams CvaeModel::prior_from_feature(const Tensor& history_feature,
                                             int action) const {
  const Tensor parts[2] = {history_feature, action_token(action)};
  Tensor features = prior_mlp.forward(concat(parts, 0));
  return gaussian_from_head(prior_head.forward(features), cfg.D_z);
}

std::vector<Tensor> CvaeModel::decode_frames(const Tensor& history_feature,
                                             const Tensor& action_token,
                                             const Tensor& z, int t_total,
                                             const Tensor& last_history_pose,
                                             const Motion* teacher, int t0) const {
  if (t_total < 1) fail("decode: need at least one frame");
  std::vector<Tensor> out;
  out.reserve(static_cast<size_t>(t_total));
  Tensor h = history_feature;
  Tensor prev = last_history_pose;
  for (int t = 0; t < t_total; ++t) {
    if (teacher && t > t0)
      prev = pose_to_tensor(teacher->frame(t - t0 - 1));
    const Tensor parts[4] = {prev, z, action_token, history_feature};
    h = dec_gru.step(concat(parts, 0), h);
    prev = add(prev, dec_out.forward(h));
    out.push_back(prev);
  }
  return out;
}

Tensor CvaeModel::decode(const Motion& history, int action, const Tensor& z,
                         int t_total) const {
  Tensor h_x = encode_history(history);
  Tensor last = pose_to_tensor(history.frame(history.frames() - 1));
  auto frames = decode_frames(h_x, action_token(action), z, t_total, last);
  return concat(frames, 1);
}

Tensor reparameterize(const GaussianParams& g, const Tensor& eps) {
  return add(mul(eps, g.std_dev), g.mu);
}

Tensor kl_divergence(const GaussianParams& post, const GaussianParams& prior) {
  if (post.mu.shape() != prior.mu.shape())
    fail("kl_divergence: latent dimensions differ");
  // The variance ratio is formed in log space so that identical parameters
  // give an exact zero.
  Tensor log_ratio = scale(sub(prior.log_std, post.log_std), 2.0);
  Tensor var_ratio = exp_op(scale(sub(post.log_std, prior.log_std), 2.0));
  Tensor d_mu = sub(post.mu, prior.mu);
  Tensor quad = add(var_ratio,
                    mul(mul(d_mu, d_mu), exp_op(scale(prior.log_std, -2.0))));
  Tensor ones = Tensor::full(post.mu.shape(), 1.0);
  Tensor per_dim = sub(add(log_ratio, quad), ones);
  return scale(sum(per_dim), 0.5);
}

Tensor reconstruction_loss(const Tensor& y_hat, const Tensor& target, int t0) {
  const Shape& ys = y_hat.shape();
  const Shape& ts = target.shape();
  if (ys.size() != 2 || ts.size() != 2 || ys[0] != ts[0])
    fail("reconstruction_loss: shape mismatch " + shape_str(ys) + " vs " + shape_str(ts));
  const int supervised = ts[1];
  if (ys[1] != t0 + supervised)
    fail("reconstruction_loss: prediction has " + std::to_string(ys[1]) +
         " columns, expected t0 + target = " + std::to_string(t0 + supervised));
  Tensor tail = t0 == 0 ? y_hat : slice(y_hat, 1, t0, supervised);
  return scale(squared_norm(sub(tail, target)), 1.0 / supervised);
}

std::pair<Tensor, LossParts> total_loss(const CvaeModel& model,
                                        const TransitionSample& sample,
                                        const LossWeights& weights,
                                        const DctBasis& basis, const Tensor& eps) {
  const CvaeConfig& cfg = model.cfg;
  const int t_sup = sample.target.frames();
  const int t_total = sample.t0 + t_sup;

  Tensor h_x = model.encode_history(sample.history);
  auto target_frames = [&] {
    std::vector<Tensor> fs;
    fs.reserve(static_cast<size_t>(t_sup));
    for (int t = 0; t < t_sup; ++t)
      fs.push_back(pose_to_tensor(sample.target.frame(t)));
    return fs;
  }();
  Tensor h_y = model.fut_gru.run(target_frames, model.fut_gru.zero_state());
  Tensor token = model.action_token(sample.action);

  const Tensor post_in[3] = {h_x, h_y, token};
  GaussianParams post = gaussian_from_head(
      model.post_head.forward(model.post_mlp.forward(concat(post_in, 0))), cfg.D_z);
  GaussianParams prior = model.prior_from_feature(h_x, sample.action);

  Tensor z = reparameterize(post, eps);
  Tensor last = pose_to_tensor(sample.history.frame(sample.history.frames() - 1));
  auto frames = model.decode_frames(h_x, token, z, t_total, last,
                                    cfg.teacher_forcing ? &sample.target : nullptr,
                                    sample.t0);

  Tensor y_hat = concat(frames, 1);
  Tensor target_t = motion_to_tensor(sample.target, 0, t_sup);
  Tensor rec = reconstruction_loss(y_hat, target_t, sample.t0);

  const int n_hist = sample.history.frames();
  const int l = basis.L;
  if (l > n_hist || l > t_total)
    fail("total_loss: junction window L exceeds history or prediction length");
  Tensor history_tail = motion_to_tensor(sample.history, n_hist - l, l);
  Tensor pred_head = slice(y_hat, 1, 0, l);
  Tensor smooth = smoothness_loss(history_tail, pred_head, basis);

  Tensor kl = kl_divergence(post, prior);

  Tensor total = add(add(scale(rec, weights.rec), scale(smooth, weights.smooth)), kl);
  LossParts parts;
  parts.rec = rec.value();
  parts.smooth = smooth.value();
  parts.kl = kl.value();
  parts.total = total.value();
  return {total, parts};
}

std::optional<int> stopping_index(const Motion& rollout, const StoppingConfig& cfg) {
  const int t = rollout.frames();
  const int q = cfg.Q;
  if (q < 1) fail("stopping_index: Q must be positive");
  if (t < q + 1) fail("stopping_index: rollout shorter than Q+1 frames");
  const int k = rollout.K;
  std::vector<double> mean_pose(static_cast<size_t>(k));
  for (int i = 0; i + q < t; ++i) {
    std::fill(mean_pose.begin(), mean_pose.end(), 0.0);
    for (int j = i; j <= i + q; ++j) {
      auto f = rollout.frame(j);
      for (int c = 0; c < k; ++c) mean_pose[static_cast<size_t>(c)] += f[c];
    }
    for (double& v : mean_pose) v /= (q + 1);
    double acc = 0.0;
    for (int j = i; j <= i + q; ++j) {
      auto f = rollout.frame(j);
      double d2 = 0.0;
      for (int c = 0; c < k; ++c) {
        const double d = f[c] - mean_pose[static_cast<size_t>(c)];
        d2 += d * d;
      }
      acc += std::sqrt(d2);
    }
    if (acc / q < cfg.delta) return i;
  }
  return std::nullopt;
}

Rollout predict_rollout(const CvaeModel& model, const Motion& history, int action,
                        const StoppingConfig& cfg, Rng& rng) {
  if (cfg.T_max < cfg.Q + 1) fail("predict: T_max must exceed Q");
  Tensor h_x = model.encode_history(history);
  GaussianParams prior = model.prior_from_feature(h_x, action);

  std::vector<double> eps(static_cast<size_t>(model.cfg.D_z));
  for (double& e : eps) e = rng.normal();
  Tensor z = reparameterize(prior, Tensor({model.cfg.D_z, 1}, std::move(eps)));

  Tensor last = pose_to_tensor(history.frame(history.frames() - 1));
  auto frames = model.decode_frames(h_x, model.action_token(action), z, cfg.T_max, last);

  Rollout r;
  r.full = Motion(model.cfg.K, 0, history.fps);
  r.full.data.reserve(static_cast<size_t>(model.cfg.K) * cfg.T_max);
  for (const Tensor& f : frames)
    r.full.data.insert(r.full.data.end(), f.data().begin(), f.data().end());
  r.stop = stopping_index(r.full, cfg);
  r.truncated = r.stop ? r.full.window(0, std::min(cfg.T_max, *r.stop + cfg.Q))
                       : r.full;
  return r;
}

Motion predict(const CvaeModel& model, const Motion& history, int action,
               const StoppingConfig& cfg, Rng& rng) {
  return predict_rollout(model, history, action, cfg, rng).truncated;
}

std::vector<Rollout> predict_sequence_rollouts(const CvaeModel& model,
                                               const Motion& history,
                                               std::span<const int> actions,
                                               const StoppingConfig& cfg, Rng& rng) {
  if (actions.empty()) fail("predict_sequence: empty action list");
  std::vector<Rollout> out;
  out.reserve(actions.size());
  Motion window = history;
  for (int a : actions) {
    Rollout r = predict_rollout(model, window, a, cfg, rng);
    // next history: last N frames of (window ++ truncated prediction)
    Motion joined = window;
    joined.data.insert(joined.data.end(), r.truncated.data.begin(),
                       r.truncated.data.end());
    const int total = joined.frames();
    window = joined.window(std::max(0, total - model.cfg.N),
                           std::min(model.cfg.N, total));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<Motion> predict_sequence(const CvaeModel& model, const Motion& history,
                                     std::span<const int> actions,
                                     const StoppingConfig& cfg, Rng& rng) {
  std::vector<Motion> out;
  for (Rollout& r : predict_sequence_rollouts(model, history, actions, cfg, rng))
    out.push_back(std::move(r.truncated));
  return out;
}

}  // namespace mopred
