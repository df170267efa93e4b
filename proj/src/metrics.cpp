#include "mopred/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mopred {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

double pose_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

// Cross-entropy against label y via a max-shifted log-sum-exp; the shift is a
// constant, so gradients are exact.
Tensor cross_entropy(const Tensor& logits, int label) {
  double mx = logits.data()[0];
  for (double v : logits.data()) mx = std::max(mx, v);
  Tensor shifted = sub(logits, Tensor::scalar(mx));
  Tensor lse = add(log_op(sum(exp_op(shifted))), Tensor::scalar(mx));
  Tensor picked = sum(slice(logits, 0, label, 1));
  return sub(lse, picked);
}

}  // namespace

// ---------------------------------------------------------------------------
// Classifier

ClassifierModel ClassifierModel::init(const ClassifierConfig& cfg, std::uint64_t seed) {
  if (cfg.K < 1 || cfg.A < 2) fail("classifier config: invalid dimensions");
  if (cfg.mlp.size() != 2) fail("classifier config: trunk must have two layers");
  Rng rng(seed);
  ClassifierModel m;
  m.cfg = cfg;
  m.gru = GruParams::init(cfg.K, cfg.hidden, rng);
  m.trunk = MlpParams::init(cfg.hidden, cfg.mlp, Activation::kRelu, rng);
  m.head = LinearParams::init(cfg.mlp.back(), cfg.A, rng);
  return m;
}

ClassifierModel ClassifierModel::from_params(const ClassifierConfig& cfg,
                                             const ParamMap& p) {
  ClassifierModel m;
  m.cfg = cfg;
  m.gru = GruParams::from_params(p, "gru");
  m.trunk = MlpParams::from_params(p, "mlp", 2, Activation::kRelu);
  m.head = LinearParams::from_params(p, "head");
  return m;
}

ParamMap ClassifierModel::params() const {
  ParamMap p;
  gru.collect(p, "gru");
  trunk.collect(p, "mlp");
  head.collect(p, "head");
  return p;
}

Tensor ClassifierModel::logits(const Motion& m) const {
  if (m.K != cfg.K) fail("classifier: pose dimension mismatch");
  Tensor h = gru.zero_state();
  for (int t = 0; t < m.frames(); ++t) h = gru.step(pose_to_tensor(m.frame(t)), h);
  return head.forward(trunk.forward(h));
}

std::vector<double> ClassifierModel::features(const Motion& m) const {
  Tensor h = gru.zero_state();
  for (int t = 0; t < m.frames(); ++t) h = gru.step(pose_to_tensor(m.frame(t)), h);
  Tensor f = trunk.forward(h);
  return {f.data().begin(), f.data().end()};
}

int ClassifierModel::predict_label(const Motion& m) const {
  Tensor l = logits(m);
  int best = 0;
  for (int a = 1; a < cfg.A; ++a)
    if (l.data()[static_cast<size_t>(a)] > l.data()[static_cast<size_t>(best)]) best = a;
  return best;
}

ClassifierTrainResult train_classifier(const Dataset& train,
                                       const ClassifierConfig& cfg,
                                       std::uint64_t seed) {
  if (train.A < 2) fail("train_classifier: need at least two actions");
  {
    std::vector<int> counts(static_cast<size_t>(train.A), 0);
    for (const LabeledMotion& lm : train.samples)
      ++counts[static_cast<size_t>(lm.action)];
    for (int c : counts)
      if (c == 0) fail("train_classifier: an action has no samples");
  }

  ClassifierModel model = ClassifierModel::init(cfg, derive_seed(seed, {1}));
  ParamMap params = model.params();
  AdamState adam;
  adam.cfg.lr = cfg.lr;
  Rng shuffle_rng(derive_seed(seed, {2}));

  std::vector<int> order(static_cast<size_t>(train.size()));
  for (int i = 0; i < train.size(); ++i) order[static_cast<size_t>(i)] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    for (int i = train.size() - 1; i > 0; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[static_cast<size_t>(shuffle_rng.uniform_int(i + 1))]);
    for (int b = 0; b < train.size(); b += cfg.batch) {
      const int n = std::min(cfg.batch, train.size() - b);
      GradValueMap grads;
      for (int i = 0; i < n; ++i) {
        const LabeledMotion& lm = train.samples[static_cast<size_t>(order[static_cast<size_t>(b + i)])];
        Tape tape;
        Tape::Scope scope(tape);
        Tensor loss = cross_entropy(model.logits(lm.motion), lm.action);
        accumulate_grads(params, tape.backward(loss), grads);
      }
      for (auto& [name, g] : grads)
        for (double& v : g) v /= n;
      adam_step(params, grads, adam);
    }
  }

  ClassifierTrainResult result;
  result.model = std::move(model);
  int hits = 0;
  for (const LabeledMotion& lm : train.samples)
    if (result.model.predict_label(lm.motion) == lm.action) ++hits;
  result.train_accuracy = train.size() ? static_cast<double>(hits) / train.size() : 0.0;
  return result;
}

double classify_accuracy(std::span<const Motion> motions, std::span<const int> labels,
                         const ClassifierModel& clf) {
  if (motions.empty()) fail("classify_accuracy: no motions");
  if (motions.size() != labels.size()) fail("classify_accuracy: size mismatch");
  int hits = 0;
  for (size_t i = 0; i < motions.size(); ++i)
    if (clf.predict_label(motions[i]) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(motions.size());
}

// ---------------------------------------------------------------------------
// Feature statistics and FID

FeatureStats feature_stats(const std::vector<std::vector<double>>& features) {
  if (features.size() < 2) fail("feature_stats: need at least 2 feature vectors");
  const int f = static_cast<int>(features[0].size());
  for (const auto& v : features)
    if (static_cast<int>(v.size()) != f) fail("feature_stats: inconsistent dimensions");

  FeatureStats st;
  st.F = f;
  st.count = static_cast<int>(features.size());
  st.mu.assign(static_cast<size_t>(f), 0.0);
  for (const auto& v : features)
    for (int i = 0; i < f; ++i) st.mu[static_cast<size_t>(i)] += v[static_cast<size_t>(i)];
  for (double& x : st.mu) x /= st.count;

  st.sigma.assign(static_cast<size_t>(f) * f, 0.0);
  for (const auto& v : features)
    for (int i = 0; i < f; ++i) {
      const double di = v[static_cast<size_t>(i)] - st.mu[static_cast<size_t>(i)];
      for (int j = 0; j < f; ++j)
        st.sigma[static_cast<size_t>(i) * f + j] +=
            di * (v[static_cast<size_t>(j)] - st.mu[static_cast<size_t>(j)]);
    }
  for (double& x : st.sigma) x /= (st.count - 1);

  if (st.count <= f)
    for (int i = 0; i < f; ++i) st.sigma[static_cast<size_t>(i) * f + i] += 1e-6;
  return st;
}

std::vector<double> jacobi_eigen_symmetric(std::vector<double> a, int n,
                                           std::vector<double>* eigvecs) {
  std::vector<double> v;
  if (eigvecs) {
    v.assign(static_cast<size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i) v[static_cast<size_t>(i) * n + i] = 1.0;
  }

  auto off_norm = [&]() {
    double s = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) s += a[static_cast<size_t>(p) * n + q] *
                                           a[static_cast<size_t>(p) * n + q];
    return s;
  };
  double scale_ref = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      scale_ref = std::max(scale_ref, std::abs(a[static_cast<size_t>(i) * n + j]));
  const double tol = std::max(1e-300, 1e-24 * scale_ref * scale_ref * n * n);

  for (int sweep = 0; sweep < 100 && off_norm() > tol; ++sweep) {
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[static_cast<size_t>(p) * n + q];
        if (apq == 0.0) continue;
        const double app = a[static_cast<size_t>(p) * n + p];
        const double aqq = a[static_cast<size_t>(q) * n + q];
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;

        for (int i = 0; i < n; ++i) {
          const double aip = a[static_cast<size_t>(i) * n + p];
          const double aiq = a[static_cast<size_t>(i) * n + q];
          a[static_cast<size_t>(i) * n + p] = c * aip - s * aiq;
          a[static_cast<size_t>(i) * n + q] = s * aip + c * aiq;
        }
        for (int j = 0; j < n; ++j) {
          const double apj = a[static_cast<size_t>(p) * n + j];
          const double aqj = a[static_cast<size_t>(q) * n + j];
          a[static_cast<size_t>(p) * n + j] = c * apj - s * aqj;
          a[static_cast<size_t>(q) * n + j] = s * apj + c * aqj;
        }
        if (eigvecs)
          for (int i = 0; i < n; ++i) {
            const double vip = v[static_cast<size_t>(i) * n + p];
            const double viq = v[static_cast<size_t>(i) * n + q];
            v[static_cast<size_t>(i) * n + p] = c * vip - s * viq;
            v[static_cast<size_t>(i) * n + q] = s * vip + c * viq;
          }
      }
  }

  std::vector<double> eig(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) eig[static_cast<size_t>(i)] = a[static_cast<size_t>(i) * n + i];
  if (eigvecs) *eigvecs = std::move(v);
  return eig;
}

namespace {

// V diag(sqrt(clamped eig)) V^T for a symmetric PSD matrix.
std::vector<double> sqrt_psd(const std::vector<double>& m, int n, const char* what) {
  std::vector<double> vecs;
  std::vector<double> eig = jacobi_eigen_symmetric(m, n, &vecs);
  double lambda_max = 0.0;
  for (double e : eig) lambda_max = std::max(lambda_max, e);
  std::vector<double> root(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    double e = eig[static_cast<size_t>(i)];
    if (e < -1e-10 * std::max(lambda_max, 1.0))
      fail(std::string("fid: ") + what + " is not PSD within tolerance (eigenvalue " +
           std::to_string(e) + ")");
    root[static_cast<size_t>(i)] = std::sqrt(std::max(0.0, e));
  }
  std::vector<double> out(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double acc = 0.0;
      for (int k = 0; k < n; ++k)
        acc += vecs[static_cast<size_t>(i) * n + k] * root[static_cast<size_t>(k)] *
               vecs[static_cast<size_t>(j) * n + k];
      out[static_cast<size_t>(i) * n + j] = acc;
    }
  return out;
}

}  // namespace

double fid(const FeatureStats& a, const FeatureStats& b) {
  if (a.F != b.F) fail("fid: feature dimensions differ");
  const int n = a.F;

  double mean_term = 0.0;
  for (int i = 0; i < n; ++i) {
    const double d = a.mu[static_cast<size_t>(i)] - b.mu[static_cast<size_t>(i)];
    mean_term += d * d;
  }

  const std::vector<double> sa_root = sqrt_psd(a.sigma, n, "first covariance");
  // M = Sa^{1/2} Sb Sa^{1/2}
  std::vector<double> tmp(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double x = sa_root[static_cast<size_t>(i) * n + k];
      if (x == 0.0) continue;
      for (int j = 0; j < n; ++j)
        tmp[static_cast<size_t>(i) * n + j] += x * b.sigma[static_cast<size_t>(k) * n + j];
    }
  std::vector<double> m(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      const double x = tmp[static_cast<size_t>(i) * n + k];
      if (x == 0.0) continue;
      for (int j = 0; j < n; ++j)
        m[static_cast<size_t>(i) * n + j] += x * sa_root[static_cast<size_t>(k) * n + j];
    }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const double sym = 0.5 * (m[static_cast<size_t>(i) * n + j] +
                                m[static_cast<size_t>(j) * n + i]);
      m[static_cast<size_t>(i) * n + j] = sym;
      m[static_cast<size_t>(j) * n + i] = sym;
    }

  std::vector<double> eig = jacobi_eigen_symmetric(m, n);
  double lambda_max = 0.0;
  for (double e : eig) lambda_max = std::max(lambda_max, e);
  double tr_sqrt = 0.0;
  for (double e : eig) {
    if (e < -1e-10 * std::max(lambda_max, 1.0))
      fail("fid: product matrix is not PSD within tolerance (eigenvalue " +
           std::to_string(e) + ")");
    tr_sqrt += std::sqrt(std::max(0.0, e));
  }

  double trace_a = 0.0, trace_b = 0.0;
  for (int i = 0; i < n; ++i) {
    trace_a += a.sigma[static_cast<size_t>(i) * n + i];
    trace_b += b.sigma[static_cast<size_t>(i) * n + i];
  }
  return mean_term + trace_a + trace_b - 2.0 * tr_sqrt;
}

// ---------------------------------------------------------------------------
// DTW and sample-set metrics

AlignedPair dtw_align(const Motion& a, const Motion& b) {
  if (a.frames() == 0 || b.frames() == 0) fail("dtw_align: empty motion");
  if (a.K != b.K) fail("dtw_align: pose dimensions differ");
  const int n = a.frames();
  const int m = b.frames();

  std::vector<double> dp(static_cast<size_t>(n) * m);
  std::vector<char> from(static_cast<size_t>(n) * m);  // 0 diag, 1 up, 2 left
  auto d = [&](int i, int j) { return pose_distance(a.frame(i), b.frame(j)); };

  dp[0] = d(0, 0);
  from[0] = 0;
  for (int i = 1; i < n; ++i) {
    dp[static_cast<size_t>(i) * m] = dp[static_cast<size_t>(i - 1) * m] + d(i, 0);
    from[static_cast<size_t>(i) * m] = 1;
  }
  for (int j = 1; j < m; ++j) {
    dp[static_cast<size_t>(j)] = dp[static_cast<size_t>(j - 1)] + d(0, j);
    from[static_cast<size_t>(j)] = 2;
  }
  for (int i = 1; i < n; ++i)
    for (int j = 1; j < m; ++j) {
      const double diag = dp[static_cast<size_t>(i - 1) * m + (j - 1)];
      const double up = dp[static_cast<size_t>(i - 1) * m + j];
      const double left = dp[static_cast<size_t>(i) * m + (j - 1)];
      double best = diag;
      char arg = 0;
      if (up < best) {
        best = up;
        arg = 1;
      }
      if (left < best) {
        best = left;
        arg = 2;
      }
      dp[static_cast<size_t>(i) * m + j] = best + d(i, j);
      from[static_cast<size_t>(i) * m + j] = arg;
    }

  AlignedPair out;
  out.cost = dp[static_cast<size_t>(n - 1) * m + (m - 1)];
  int i = n - 1, j = m - 1;
  std::vector<std::pair<int, int>> rev;
  while (true) {
    rev.emplace_back(i, j);
    if (i == 0 && j == 0) break;
    switch (from[static_cast<size_t>(i) * m + j]) {
      case 0: --i; --j; break;
      case 1: --i; break;
      default: --j; break;
    }
  }
  out.path.assign(rev.rbegin(), rev.rend());

  out.a_aligned = Motion(a.K, 0, a.fps);
  out.b_aligned = Motion(b.K, 0, b.fps);
  for (const auto& [pi, pj] : out.path) {
    out.a_aligned.append_frame(a.frame(pi));
    out.b_aligned.append_frame(b.frame(pj));
  }
  return out;
}

double diversity(std::span<const Motion> samples) {
  const int s = static_cast<int>(samples.size());
  if (s < 2) fail("diversity: need at least 2 samples");
  const int t = samples[0].frames();
  for (const Motion& m : samples)
    if (m.frames() != t) fail("diversity: samples must share the full rollout length");

  double acc = 0.0;
  for (int i = 0; i < s; ++i)
    for (int j = i + 1; j < s; ++j) {
      double pair_acc = 0.0;
      for (int k = 0; k < t; ++k)
        pair_acc += pose_distance(samples[static_cast<size_t>(i)].frame(k),
                                  samples[static_cast<size_t>(j)].frame(k));
      acc += pair_acc / t;
    }
  return 2.0 * acc / (static_cast<double>(s) * (s - 1));
}

double diversity_dtw(std::span<const Motion> samples) {
  const int s = static_cast<int>(samples.size());
  if (s < 2) fail("diversity_dtw: need at least 2 samples");
  double acc = 0.0;
  for (int i = 0; i < s; ++i)
    for (int j = i + 1; j < s; ++j) {
      AlignedPair ap = dtw_align(samples[static_cast<size_t>(i)],
                                 samples[static_cast<size_t>(j)]);
      acc += ap.cost / static_cast<double>(ap.path.size());
    }
  return 2.0 * acc / (static_cast<double>(s) * (s - 1));
}

double ade(std::span<const Motion> samples, const Motion& gt) {
  if (samples.empty()) fail("ade: need at least one sample");
  if (gt.frames() == 0) fail("ade: empty ground truth");
  const int t = gt.frames();
  double best = std::numeric_limits<double>::infinity();
  for (const Motion& m : samples) {
    double acc = 0.0;
    const int last = m.frames() - 1;
    for (int k = 0; k < t; ++k)
      acc += pose_distance(m.frame(std::min(k, last)), gt.frame(k));
    best = std::min(best, acc / t);
  }
  return best;
}

double ade_dtw(std::span<const Motion> samples, const Motion& gt) {
  if (samples.empty()) fail("ade_dtw: need at least one sample");
  double best = std::numeric_limits<double>::infinity();
  for (const Motion& m : samples) {
    AlignedPair ap = dtw_align(m, gt);
    best = std::min(best, ap.cost / static_cast<double>(ap.path.size()));
  }
  return best;
}

}  // namespace mopred
