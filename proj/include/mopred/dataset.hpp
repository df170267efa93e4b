#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mopred/rng.hpp"

namespace mopred {

// A pose sequence: K channels by T frames, stored frame-major so that one
// frame is contiguous.
struct Motion {
  int K = 0;
  double fps = 0.0;
  std::vector<double> data;  // T blocks of K values

  Motion() = default;
  Motion(int k, int t, double fps_, double fill = 0.0)
      : K(k), fps(fps_), data(static_cast<size_t>(k) * t, fill) {}

  int frames() const { return K == 0 ? 0 : static_cast<int>(data.size()) / K; }
  std::span<const double> frame(int t) const {
    return {data.data() + static_cast<size_t>(t) * K, static_cast<size_t>(K)};
  }
  std::span<double> frame(int t) {
    return {data.data() + static_cast<size_t>(t) * K, static_cast<size_t>(K)};
  }
  // Frames [start, start+count) as a new motion.
  Motion window(int start, int count) const;
  void append_frame(std::span<const double> pose);
};

struct LabeledMotion {
  Motion motion;
  int action = 0;
  std::string sample_id;
};

// Per-action generator parameters for the synthetic corpus.
struct ActionSpec {
  double freq = 1.0;       // base frequency, Hz
  double amp_lo = 0.5;
  double amp_hi = 1.0;
  double phase_lo = 0.0;
  double phase_hi = 6.283185307179586;
  double mean_len = 60.0;  // frames
  double jitter = 0.1;     // relative length jitter
  std::vector<double> bias;  // per-channel offset, length K
  int count = 0;           // samples to generate
};

struct SyntheticSpec {
  int K = 6;
  int A = 4;
  double fps = 30.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  std::vector<ActionSpec> actions;

  void validate() const;
  // The toy corpus configuration: K=6, A=4, mean lengths {40,60,80,100}.
  static SyntheticSpec default_toy(std::uint64_t seed);
};

struct Dataset {
  std::vector<LabeledMotion> samples;
  int A = 0;
  int K = 0;
  double fps = 0.0;
  std::string split_tag;

  int size() const { return static_cast<int>(samples.size()); }
};

Dataset generate_synthetic(const SyntheticSpec& spec);

// JSON-lines motion format. Line 1 is a header object; every following line
// is one labeled motion. Values round-trip bit exactly.
void save_dataset(const Dataset& d, const std::string& path);
Dataset load_dataset(const std::string& path);

// Stratified by action, deterministic in seed. Errors when an action has
// fewer than 2 samples.
std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double test_fraction,
                                          std::uint64_t seed);

// First N frames.
Motion slice_history(const Motion& m, int n);

}  // namespace mopred
