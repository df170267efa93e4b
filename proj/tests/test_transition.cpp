#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mopred/transition.hpp"

using namespace mopred;

namespace {

// Straight-line motion at constant per-frame speed.
Motion line_motion(int k, int t, double speed) {
  Motion m(k, t, 30.0);
  for (int j = 0; j < t; ++j)
    for (int c = 0; c < k; ++c)
      m.frame(j)[c] = speed * j / std::sqrt(static_cast<double>(k));
  return m;
}

Dataset one_motion_dataset(Motion m, int action = 0, int a_total = 2) {
  Dataset d;
  d.K = m.K;
  d.A = a_total;
  d.fps = m.fps;
  LabeledMotion lm;
  lm.motion = std::move(m);
  lm.action = action;
  lm.sample_id = "m0";
  d.samples.push_back(std::move(lm));
  return d;
}

}  // namespace

TEST_CASE("estimate_k recovers the reciprocal speed on constant-speed lines") {
  for (double speed : {0.5, 1.0, 2.5}) {
    Dataset d = one_motion_dataset(line_motion(3, 50, speed));
    const double k = estimate_k(d, 5000, 7);
    CHECK(std::abs(k - 1.0 / speed) < 1e-6);
  }
}

TEST_CASE("a single two-frame motion with distance 2 gives k = 0.5") {
  Motion m(1, 2, 30.0);
  m.frame(0)[0] = 0.0;
  m.frame(1)[0] = 2.0;
  Dataset d = one_motion_dataset(std::move(m));
  CHECK(estimate_k(d, 10, 3) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("estimate_k is deterministic in seed and budget") {
  SyntheticSpec spec = SyntheticSpec::default_toy(13);
  for (ActionSpec& a : spec.actions) a.count = 5;
  Dataset d = generate_synthetic(spec);
  CHECK(estimate_k(d, 2000, 5) == estimate_k(d, 2000, 5));
}

TEST_CASE("estimate_k rejects an all-constant dataset") {
  Motion m(2, 10, 30.0, 1.5);  // constant pose
  Dataset d = one_motion_dataset(std::move(m));
  CHECK_THROWS_WITH_AS(estimate_k(d, 100, 1), doctest::Contains("undefined"),
                       std::runtime_error);
}

TEST_CASE("transition_length floors and caps") {
  const std::vector<double> x{1.0, 2.0};
  CHECK(transition_length(x, x, 3.0, 100) == 0);

  // distance 3.4 at k = 2 floors to 6
  const std::vector<double> y{1.0 + 3.4, 2.0};
  CHECK(transition_length(x, y, 2.0, 100) == 6);
  CHECK(transition_length(x, y, 2.0, 4) == 4);

  const std::vector<double> far{1e9, 2.0};
  CHECK(transition_length(x, far, 2.0, 17) == 17);
}

TEST_CASE("transition_length is monotone in distance and zero iff k*d < 1") {
  const std::vector<double> origin{0.0};
  int prev = 0;
  for (double d = 0.0; d < 5.0; d += 0.1) {
    const std::vector<double> p{d};
    const int t0 = transition_length(origin, p, 1.7, 1000);
    CHECK(t0 >= prev);
    CHECK((t0 == 0) == (1.7 * d < 1.0));
    prev = t0;
  }
}

TEST_CASE("same-source assembly keeps continuity and zero transition") {
  Motion m(2, 40, 30.0);
  for (int t = 0; t < 40; ++t) {
    m.frame(t)[0] = t;
    m.frame(t)[1] = 2 * t;
  }
  LabeledMotion lm{std::move(m), 1, "src"};
  Rng rng(5);
  for (int it = 0; it < 10; ++it) {
    TransitionSample s = assemble_sample(lm, lm, 8, 3.0, 4, 16, rng);
    CHECK(s.t0 == 0);
    CHECK(s.action == 1);
    // history ++ future must be one contiguous slice of the source
    const double first = s.history.frame(0)[0];
    for (int t = 0; t < s.history.frames(); ++t)
      CHECK(s.history.frame(t)[0] == first + t);
    for (int t = 0; t < s.future.frames(); ++t)
      CHECK(s.future.frame(t)[0] == first + s.history.frames() + t);
  }
}

TEST_CASE("a cross pair whose junction poses coincide gets zero transition") {
  Motion a(2, 12, 30.0);
  Motion b(2, 9, 30.0);
  for (int t = 0; t < 12; ++t) {
    a.frame(t)[0] = 1.0;
    a.frame(t)[1] = -1.0;
  }
  for (int t = 0; t < 9; ++t) {
    b.frame(t)[0] = t == 0 ? 1.0 : 5.0;
    b.frame(t)[1] = t == 0 ? -1.0 : 5.0;
  }
  LabeledMotion la{std::move(a), 0, "a"};
  LabeledMotion lb{std::move(b), 1, "b"};
  Rng rng(2);
  TransitionSample s = assemble_sample(la, lb, 12, 10.0, 2, 30, rng);
  CHECK(s.t0 == 0);
  CHECK(s.action == 1);
}

TEST_CASE("a padding of 50 yields a target with T+50 columns and a constant tail") {
  SyntheticSpec spec = SyntheticSpec::default_toy(31);
  for (ActionSpec& a : spec.actions) a.count = 2;
  Dataset d = generate_synthetic(spec);
  const LabeledMotion& hist = d.samples[0];
  const LabeledMotion& fut = d.samples[static_cast<size_t>(d.size() - 1)];
  Rng rng(9);
  TransitionSample s = assemble_sample(hist, fut, 10, 2.0, 50, 20, rng);
  const int t = s.future.frames();
  REQUIRE(s.target.frames() == t + 50);
  const auto last = s.future.frame(t - 1);
  for (int p = 0; p < 50; ++p) {
    auto padded = s.target.frame(t + p);
    for (int c = 0; c < s.target.K; ++c) CHECK(padded[c] == last[c]);
  }
}

TEST_CASE("the pair sampler hits the configured mix exactly") {
  SyntheticSpec spec = SyntheticSpec::default_toy(37);
  for (ActionSpec& a : spec.actions) a.count = 6;
  Dataset d = generate_synthetic(spec);
  PairSampler sampler(d, 10, 0.5);
  Rng rng(11);
  auto pairs = sampler.epoch_pairs(100, rng);
  int same = 0, cross = 0;
  for (const auto& [h, f] : pairs) {
    if (h == f)
      ++same;
    else {
      ++cross;
      CHECK(d.samples[static_cast<size_t>(h)].action !=
            d.samples[static_cast<size_t>(f)].action);
    }
  }
  CHECK(same == 50);
  CHECK(cross == 50);
}

TEST_CASE("cross futures are clipped to the rollout budget") {
  Motion a(1, 30, 30.0, 0.0);
  Motion b(1, 60, 30.0);
  for (int t = 0; t < 60; ++t) b.frame(t)[0] = 100.0 + t;
  LabeledMotion la{std::move(a), 0, "a"};
  LabeledMotion lb{std::move(b), 1, "b"};
  Rng rng(1);
  TransitionSample s = assemble_sample(la, lb, 10, 0.05, 5, 8, rng, 40);
  CHECK(s.t0 + s.future.frames() + 5 <= 40);
  CHECK(s.target.frames() == s.future.frames() + 5);
}
