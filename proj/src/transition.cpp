#include "mopred/transition.hpp"

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

}  // namespace

double estimate_k(const Dataset& train, int pair_budget, std::uint64_t seed) {
  if (train.size() == 0) fail("estimate_k: empty dataset");
  if (pair_budget < 1) fail("estimate_k: pair budget must be positive");

  Rng rng(seed);
  double acc = 0.0;
  int used = 0;
  // Bounded number of attempts so an all-degenerate dataset terminates.
  const long attempts = static_cast<long>(pair_budget) * 16;
  for (long it = 0; it < attempts && used < pair_budget; ++it) {
    const LabeledMotion& lm =
        train.samples[static_cast<size_t>(rng.uniform_int(train.size()))];
    const int t = lm.motion.frames();
    if (t < 2) continue;
    const int i = rng.uniform_int(t);
    int j = rng.uniform_int(t - 1);
    if (j >= i) ++j;
    const double dist = pose_distance(lm.motion.frame(i), lm.motion.frame(j));
    if (dist < 1e-8) continue;
    acc += std::abs(i - j) / dist;
    ++used;
  }
  if (used == 0) fail("estimate_k: k undefined, all sampled pairs are degenerate");
  return acc / used;
}

int transition_length(std::span<const double> x_last, std::span<const double> y_first,
                      double k, int t0_max) {
  if (x_last.size() != y_first.size())
    fail("transition_length: pose dimensions differ");
  const double raw = k * pose_distance(x_last, y_first);
  const int t0 = static_cast<int>(std::floor(raw));
  return std::min(t0, t0_max);
}

TransitionSample assemble_sample(const LabeledMotion& history_src,
                                 const LabeledMotion& future_src, int n, double k,
                                 int padding, int t0_max, Rng& rng,
                                 int max_total_frames) {
  const int t_hist = history_src.motion.frames();
  if (n < 1 || t_hist < n) fail("assemble_sample: history source shorter than N");
  const bool same_source = &history_src == &future_src ||
                           history_src.sample_id == future_src.sample_id;

  TransitionSample s;
  s.padding = padding;
  s.action = future_src.action;

  if (same_source) {
    if (t_hist < n + 1)
      fail("assemble_sample: same-source pair needs at least one future frame");
    const int start = rng.uniform_int(t_hist - n);  // leaves >= 1 future frame
    s.history = history_src.motion.window(start, n);
    s.future = history_src.motion.window(start + n, t_hist - start - n);
    s.t0 = 0;
  } else {
    const int start = rng.uniform_int(t_hist - n + 1);
    s.history = history_src.motion.window(start, n);
    const Motion& fut = future_src.motion;
    s.t0 = transition_length(s.history.frame(n - 1), fut.frame(0), k, t0_max);
    int t_fut = fut.frames();
    if (max_total_frames > 0) {
      const int cap = max_total_frames - s.t0 - padding;
      if (cap < 1) fail("assemble_sample: rollout budget too small for any future frame");
      t_fut = std::min(t_fut, cap);
    }
    s.future = fut.window(0, t_fut);
  }

  // Target: the future followed by `padding` repeats of its final pose.
  const int t_fut = s.future.frames();
  s.target = Motion(s.future.K, 0, s.future.fps);
  s.target.data.reserve(static_cast<size_t>(s.future.K) * (t_fut + padding));
  s.target.data = s.future.data;
  const auto last = s.future.frame(t_fut - 1);
  for (int p = 0; p < padding; ++p) s.target.append_frame(last);
  return s;
}

PairSampler::PairSampler(const Dataset& d, int n_history, double cross_fraction)
    : data_(&d), n_history_(n_history), cross_fraction_(cross_fraction) {
  by_action_.resize(static_cast<size_t>(d.A));
  for (int i = 0; i < d.size(); ++i) {
    const LabeledMotion& lm = d.samples[static_cast<size_t>(i)];
    if (lm.motion.frames() >= n_history)
      by_action_[static_cast<size_t>(lm.action)].push_back(i);
    if (lm.motion.frames() >= n_history + 1) same_source_ok_.push_back(i);
  }
  int usable_actions = 0;
  for (const auto& v : by_action_)
    if (!v.empty()) ++usable_actions;
  if (usable_actions < 2)
    fail("pair sampler: need at least two actions with usable samples");
  if (same_source_ok_.empty())
    fail("pair sampler: no sample long enough for same-source pairs");
}

std::vector<std::pair<int, int>> PairSampler::epoch_pairs(int count, Rng& rng) const {
  const int n_cross = static_cast<int>(std::llround(cross_fraction_ * count));
  std::vector<char> is_cross(static_cast<size_t>(count), 0);
  for (int i = 0; i < n_cross; ++i) is_cross[static_cast<size_t>(i)] = 1;
  for (int i = count - 1; i > 0; --i)
    std::swap(is_cross[static_cast<size_t>(i)],
              is_cross[static_cast<size_t>(rng.uniform_int(i + 1))]);

  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    if (is_cross[static_cast<size_t>(i)]) {
      // any usable history, future from a different action
      int hist = -1;
      do {
        const int a = rng.uniform_int(data_->A);
        if (by_action_[static_cast<size_t>(a)].empty()) continue;
        hist = by_action_[static_cast<size_t>(a)][static_cast<size_t>(
            rng.uniform_int(static_cast<int>(by_action_[static_cast<size_t>(a)].size())))];
      } while (hist < 0);
      const int hist_action = data_->samples[static_cast<size_t>(hist)].action;
      int fut = -1;
      do {
        const int a = rng.uniform_int(data_->A);
        if (a == hist_action || by_action_[static_cast<size_t>(a)].empty()) continue;
        fut = by_action_[static_cast<size_t>(a)][static_cast<size_t>(
            rng.uniform_int(static_cast<int>(by_action_[static_cast<size_t>(a)].size())))];
      } while (fut < 0);
      pairs.emplace_back(hist, fut);
    } else {
      const int idx = same_source_ok_[static_cast<size_t>(
          rng.uniform_int(static_cast<int>(same_source_ok_.size())))];
      pairs.emplace_back(idx, idx);
    }
  }
  return pairs;
}

}  // namespace mopred
