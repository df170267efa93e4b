#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "mopred/metrics.hpp"
#include "test_util.hpp"

using namespace mopred;
using testutil::random_motion;

namespace {

ClassifierConfig small_classifier(int k, int a) {
  ClassifierConfig cfg;
  cfg.K = k;
  cfg.A = a;
  cfg.hidden = 16;
  cfg.mlp = {24, 16};
  cfg.lr = 0.002;
  cfg.epochs = 40;
  cfg.batch = 8;
  return cfg;
}

Dataset small_toy_corpus(std::uint64_t seed, int count_per_action 	= 12) {
  SyntheticSpec spec = SyntheticSpec::default_toy(seed);
  const double mean_lens[4] = {18, 24, 30, 36};  // short motions keep tests fast
  for (int a = 0; a < 4; ++a) {
    spec.actions[static_cast<size_t>(a)].count = count_per_action;
    spec.actions[static_cast<size_t>(a)].mean_len = mean_lens[a];
  }
  return generate_synthetic(spec);
}

Motion constant_motion(int k, int t, double value) {
  return Motion(k, t, 30.0, value);
}

FeatureStats diag_stats(std::vector<double> mu, std::vector<double> var) {
  FeatureStats st;
  st.F = static_cast<int>(mu.size());
  st.count = 1000;  // large enough to skip the ridge
  st.mu = std::move(mu);
  st.sigma.assign(static_cast<size_t>(st.F) * st.F, 0.0);
  for (int i = 0; i < st.F; ++i)
    st.sigma[static_cast<size_t>(i) * st.F + i] = var[static_cast<size_t>(i)];
  return st;
}

}  // namespace

TEST_CASE("the classifier reaches high accuracy on separable toy actions") {
  Dataset train = small_toy_corpus(77);
  ClassifierTrainResult r = train_classifier(train, small_classifier(train.K, train.A), 5);
  CHECK(r.train_accuracy >= 0.95);
}

TEST_CASE("zero epochs leave the initialization untouched") {
  Dataset train = small_toy_corpus(78, 3);
  ClassifierConfig cfg = small_classifier(train.K, train.A);
  cfg.epochs = 0;
  ClassifierTrainResult r = train_classifier(train, cfg, 9);
  ClassifierModel fresh = ClassifierModel::init(cfg, derive_seed(9, {1}));
  ParamMap a = r.model.params();
  ParamMap b = fresh.params();
  for (const auto& [name, t] : a) {
    auto other = b.at(name).data();
    for (int64_t i = 0; i < t.size(); ++i) CHECK(t.data()[i] == other[i]);
  }
}

TEST_CASE("classifier training is deterministic in its seed") {
  Dataset train = small_toy_corpus(79, 4);
  ClassifierConfig cfg = small_classifier(train.K, train.A);
  cfg.epochs = 3;
  ClassifierTrainResult r1 = train_classifier(train, cfg, 33);
  ClassifierTrainResult r2 = train_classifier(train, cfg, 33);
  ParamMap a = r1.model.params();
  ParamMap b = r2.model.params();
  for (const auto& [name, t] : a) {
    auto other = b.at(name).data();
    for (int64_t i = 0; i < t.size(); ++i) CHECK(t.data()[i] == other[i]);
  }
}

TEST_CASE("training rejects a single-action dataset") {
  Dataset d;
  d.K = 2;
  d.A = 1;
  d.fps = 30;
  for (int i = 0; i < 4; ++i)
    d.samples.push_back({constant_motion(2, 10, i), 0, "s" + std::to_string(i)});
  CHECK_THROWS(train_classifier(d, small_classifier(2, 1), 1));
}

TEST_CASE("accuracy against self-predicted labels is one and order-invariant") {
  Dataset train = small_toy_corpus(80, 4);
  ClassifierConfig cfg = small_classifier(train.K, train.A);
  cfg.epochs = 2;
  ClassifierModel clf = train_classifier(train, cfg, 3).model;

  std::vector<Motion> motions;
  std::vector<int> self_labels;
  for (const LabeledMotion& lm : train.samples) {
    motions.push_back(lm.motion);
    self_labels.push_back(clf.predict_label(lm.motion));
  }
  CHECK(classify_accuracy(motions, self_labels, clf) == 1.0);

  std::vector<int> true_labels;
  for (const LabeledMotion& lm : train.samples) true_labels.push_back(lm.action);
  const double acc = classify_accuracy(motions, true_labels, clf);
  std::reverse(motions.begin(), motions.end());
  std::reverse(true_labels.begin(), true_labels.end());
  CHECK(classify_accuracy(motions, true_labels, clf) == acc);
}

TEST_CASE("features have the penultimate width regardless of motion length") {
  Dataset train = small_toy_corpus(81, 3);
  ClassifierConfig cfg = small_classifier(train.K, train.A);
  cfg.epochs = 1;
  ClassifierModel clf = train_classifier(train, cfg, 3).model;
  Rng rng(5);
  CHECK(clf.features(random_motion(train.K, 3, rng)).size() == 16);
  CHECK(clf.features(random_motion(train.K, 60, rng)).size() == 16);
}

TEST_CASE("feature statistics: identical vectors leave only the ridge") {
  std::vector<std::vector<double>> feats(5, std::vector<double>{1.0, -2.0, 0.5});
  FeatureStats st = feature_stats(feats);  // count 5 <= F is false (F=3) ... count > F
  // count 5 > F 3, so no ridge and the covariance is exactly zero
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(st.sigma[static_cast<size_t>(i) * 3 + j] == 0.0);

  std::vector<std::vector<double>> few(3, std::vector<double>{1.0, -2.0, 0.5});
  FeatureStats ridged = feature_stats(few);  // count 3 <= F 3 triggers the ridge
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(ridged.sigma[static_cast<size_t>(i) * 3 + j] ==
            (i == j ? doctest::Approx(1e-6) : doctest::Approx(0.0)));
}

TEST_CASE("feature statistics match hand arithmetic and ignore order") {
  std::vector<std::vector<double>> feats{{0.0}, {2.0}};
  FeatureStats st = feature_stats(feats);
  CHECK(st.mu[0] == doctest::Approx(1.0));
  CHECK(st.sigma[0] == doctest::Approx(2.0));  // unbiased, no ridge at count > F

  std::vector<std::vector<double>> swapped{{2.0}, {0.0}};
  FeatureStats st2 = feature_stats(swapped);
  CHECK(st2.mu[0] == st.mu[0]);
  CHECK(st2.sigma[0] == st.sigma[0]);
}

TEST_CASE("feature statistics require two vectors") {
  CHECK_THROWS(feature_stats({{1.0, 2.0}}));
}

TEST_CASE("fid of identical statistics vanishes") {
  Rng rng(7);
  std::vector<std::vector<double>> feats;
  for (int i = 0; i < 20; ++i) {
    std::vector<double> f(4);
    for (double& x : f) x = rng.uniform(-1, 1);
    feats.push_back(std::move(f));
  }
  FeatureStats st = feature_stats(feats);
  CHECK(std::abs(fid(st, st)) < 1e-8);
}

TEST_CASE("fid matches the one-dimensional hand cases") {
  CHECK(fid(diag_stats({0.0}, {1.0}), diag_stats({1.0}, {1.0})) ==
        doctest::Approx(1.0).epsilon(1e-10));
  CHECK(fid(diag_stats({0.0}, {1.0}), diag_stats({0.0}, {4.0})) ==
        doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("the trace term reduces to sum of sqrt products for diagonal covariances") {
  const std::vector<double> va{0.5, 2.0, 1.25};
  const std::vector<double> vb{1.5, 0.25, 3.0};
  FeatureStats a = diag_stats({0, 0, 0}, va);
  FeatureStats b = diag_stats({0, 0, 0}, vb);
  double expected = 0.0;
  for (int i = 0; i < 3; ++i)
    expected += va[static_cast<size_t>(i)] + vb[static_cast<size_t>(i)] -
                2.0 * std::sqrt(va[static_cast<size_t>(i)] * vb[static_cast<size_t>(i)]);
  CHECK(fid(a, b) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("fid is symmetric on random statistics") {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<std::vector<double>> fa, fb;
    for (int i = 0; i < 30; ++i) {
      std::vector<double> x(3), y(3);
      for (int c = 0; c < 3; ++c) {
        x[static_cast<size_t>(c)] = rng.normal();
        y[static_cast<size_t>(c)] = 0.5 * rng.normal() + 0.3;
      }
      fa.push_back(std::move(x));
      fb.push_back(std::move(y));
    }
    FeatureStats a = feature_stats(fa);
    FeatureStats b = feature_stats(fb);
    const double ab = fid(a, b);
    CHECK(std::abs(ab - fid(b, a)) < 1e-8);
    CHECK(ab > -1e-8);
  }
}

TEST_CASE("jacobi recovers the spectrum of a known symmetric matrix") {
  // eigenvalues of [[2,1],[1,2]] are 1 and 3
  std::vector<double> evecs;
  std::vector<double> eig = jacobi_eigen_symmetric({2, 1, 1, 2}, 2, &evecs);
  std::sort(eig.begin(), eig.end());
  CHECK(eig[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(eig[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("dtw of a motion with itself is the zero-cost diagonal") {
  Rng rng(13);
  Motion m = random_motion(3, 8, rng);
  AlignedPair ap = dtw_align(m, m);
  CHECK(ap.cost == 0.0);
  REQUIRE(ap.path.size() == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(ap.path[static_cast<size_t>(i)].first == i);
    CHECK(ap.path[static_cast<size_t>(i)].second == i);
  }
}

TEST_CASE("dtw finds the expected path on the worked example") {
  Motion a(1, 3, 30.0);
  a.frame(0)[0] = 0;
  a.frame(1)[0] = 0;
  a.frame(2)[0] = 1;
  Motion b(1, 2, 30.0);
  b.frame(0)[0] = 0;
  b.frame(1)[0] = 1;
  AlignedPair ap = dtw_align(a, b);
  CHECK(ap.cost == 0.0);
  REQUIRE(ap.path.size() == 3);
  CHECK(ap.path[0] == std::pair<int, int>{0, 0});
  CHECK(ap.path[1] == std::pair<int, int>{1, 0});
  CHECK(ap.path[2] == std::pair<int, int>{2, 1});
}

TEST_CASE("dtw cost is symmetric") {
  Rng rng(17);
  for (int trial = 0; trial < 10; ++trial) {
    Motion a = random_motion(2, 2 + rng.uniform_int(5), rng);
    Motion b = random_motion(2, 2 + rng.uniform_int(5), rng);
    CHECK(dtw_align(a, b).cost == doctest::Approx(dtw_align(b, a).cost).epsilon(1e-12));
  }
}

TEST_CASE("dtw cost equals brute-force enumeration on a hundred random pairs") {
  Rng rng(19);
  for (int trial = 0; trial < 100; ++trial) {
    Motion a = random_motion(2, 1 + rng.uniform_int(6), rng);
    Motion b = random_motion(2, 1 + rng.uniform_int(6), rng);
    const double brute = testutil::brute_force_dtw_cost(a, b);
    CHECK(dtw_align(a, b).cost == brute);
  }
}

TEST_CASE("path endpoints and steps satisfy the alignment invariants") {
  Rng rng(23);
  Motion a = random_motion(2, 7, rng);
  Motion b = random_motion(2, 5, rng);
  AlignedPair ap = dtw_align(a, b);
  CHECK(ap.path.front() == std::pair<int, int>{0, 0});
  CHECK(ap.path.back() == std::pair<int, int>{6, 4});
  for (size_t i = 1; i < ap.path.size(); ++i) {
    const int di = ap.path[i].first - ap.path[i - 1].first;
    const int dj = ap.path[i].second - ap.path[i - 1].second;
    CHECK(di >= 0);
    CHECK(dj >= 0);
    CHECK(di + dj >= 1);
    CHECK(di <= 1);
    CHECK(dj <= 1);
  }
  CHECK(ap.a_aligned.frames() == static_cast<int>(ap.path.size()));
  CHECK(ap.b_aligned.frames() == static_cast<int>(ap.path.size()));
}

TEST_CASE("identical samples have zero diversity") {
  Motion m = constant_motion(2, 10, 0.7);
  std::vector<Motion> samples{m, m, m};
  CHECK(diversity(samples) == 0.0);
  CHECK(diversity_dtw(samples) == 0.0);
}

TEST_CASE("two constant motions have diversity equal to their pose distance") {
  Motion a = constant_motion(2, 12, 1.0);
  Motion b = constant_motion(2, 12, 2.0);
  std::vector<Motion> samples{a, b};
  const double d = std::sqrt(2.0);  // per-frame distance between the two poses
  CHECK(diversity(samples) == doctest::Approx(d).epsilon(1e-12));
}

TEST_CASE("diversity requires at least two samples") {
  std::vector<Motion> one{constant_motion(2, 5, 0.0)};
  CHECK_THROWS(diversity(one));
  CHECK_THROWS(diversity_dtw(one));
}

TEST_CASE("aligned diversity never exceeds raw diversity on equal lengths") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<Motion> samples;
    const int t = 4 + rng.uniform_int(3);
    for (int s = 0; s < 4; ++s) samples.push_back(random_motion(2, t, rng));
    CHECK(diversity_dtw(samples) <= diversity(samples) + 1e-12);
  }
}

TEST_CASE("diversity is invariant under permuting the sample set") {
  Rng rng(31);
  std::vector<Motion> samples;
  for (int s = 0; s < 5; ++s) samples.push_back(random_motion(2, 6, rng));
  const double d = diversity(samples);
  const double dw = diversity_dtw(samples);
  std::reverse(samples.begin(), samples.end());
  CHECK(diversity(samples) == doctest::Approx(d).epsilon(1e-12));
  CHECK(diversity_dtw(samples) == doctest::Approx(dw).epsilon(1e-12));
}

TEST_CASE("ade is zero when a sample matches the ground truth") {
  Rng rng(37);
  Motion gt = random_motion(3, 9, rng);
  std::vector<Motion> samples{random_motion(3, 9, rng), gt};
  CHECK(ade(samples, gt) == 0.0);
  CHECK(ade_dtw(samples, gt) == 0.0);
}

TEST_CASE("adding a worse sample never increases ade") {
  Rng rng(41);
  Motion gt = random_motion(2, 7, rng);
  std::vector<Motion> samples{random_motion(2, 7, rng)};
  const double before = ade(samples, gt);
  samples.push_back(constant_motion(2, 7, 50.0));
  CHECK(ade(samples, gt) <= before);
}

TEST_CASE("a constant offset sample has ade equal to the offset norm") {
  Motion gt = constant_motion(2, 8, 0.0);
  Motion off = constant_motion(2, 8, 1.0);
  std::vector<Motion> samples{off};
  CHECK(ade(samples, gt) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("short samples are padded with their final pose in ade") {
  Motion gt(1, 4, 30.0);
  for (int t = 0; t < 4; ++t) gt.frame(t)[0] = 1.0;
  Motion shorter(1, 2, 30.0);
  shorter.frame(0)[0] = 0.0;
  shorter.frame(1)[0] = 1.0;  // final pose matches gt
  std::vector<Motion> samples{shorter};
  CHECK(ade(samples, gt) == doctest::Approx(0.25).epsilon(1e-12));
}
