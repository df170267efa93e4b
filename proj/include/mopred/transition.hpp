#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mopred/dataset.hpp"
#include "mopred/rng.hpp"

namespace mopred {

// Frames-per-unit-pose-distance coefficient for the linear transition-length
// rule. Mean of |i - j| / ||x_i - x_j|| over sampled frame pairs inside
// training motions; pairs closer than 1e-8 are skipped.
double estimate_k(const Dataset& train, int pair_budget, std::uint64_t seed);

// min(floor(k * ||x_last - y_first||), t0_max).
int transition_length(std::span<const double> x_last, std::span<const double> y_first,
                      double k, int t0_max);

// One training unit: a history window spliced onto a future motion from a
// possibly different action, with a padded static supervision target.
struct TransitionSample {
  Motion history;   // K x N
  Motion future;    // K x T, the supervised future
  Motion target;    // K x (T+P): future followed by P repeats of its last pose
  int action = 0;   // the future's action label
  int t0 = 0;       // unsupervised transition frames; 0 for same-source pairs
  int padding = 0;  // P
};

// History is an N-frame window of history_src at a random start. When the two
// sources are the same sample the future continues the history and t0 is 0;
// otherwise the future is future_src's whole motion (clipped so that
// t0 + T + P <= max_total_frames) and t0 follows the linear rule.
TransitionSample assemble_sample(const LabeledMotion& history_src,
                                 const LabeledMotion& future_src, int n, double k,
                                 int padding, int t0_max, Rng& rng,
                                 int max_total_frames = 0);

// Draws epoch pair plans with an exact cross-action / same-source mix.
class PairSampler {
 public:
  PairSampler(const Dataset& d, int n_history, double cross_fraction = 0.5);

  // (history index, future index) pairs; equal indices mean same-source.
  std::vector<std::pair<int, int>> epoch_pairs(int count, Rng& rng) const;

 private:
  const Dataset* data_;
  int n_history_;
  double cross_fraction_;
  std::vector<std::vector<int>> by_action_;
  std::vector<int> same_source_ok_;  // samples long enough to continue
};

}  // namespace mopred
