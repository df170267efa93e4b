#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "mopred/dataset.hpp"
#include "mopred/harness.hpp"

using namespace mopred;

namespace {

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("zero jitter and zero noise force identical lengths per action") {
  SyntheticSpec spec = SyntheticSpec::default_toy(3);
  spec.noise_sigma = 0.0;
  for (ActionSpec& a : spec.actions) {
    a.jitter = 0.0;
    a.count = 5;
  }
  Dataset d = generate_synthetic(spec);
  for (int a = 0; a < spec.A; ++a) {
    std::set<int> lengths;
    for (const LabeledMotion& lm : d.samples)
      if (lm.action == a) lengths.insert(lm.motion.frames());
    CHECK(lengths.size() == 1);
  }
}

TEST_CASE("same seed reproduces the dataset bit for bit") {
  SyntheticSpec spec = SyntheticSpec::default_toy(17);
  Dataset d1 = generate_synthetic(spec);
  Dataset d2 = generate_synthetic(spec);
  REQUIRE(d1.size() == d2.size());
  for (int i = 0; i < d1.size(); ++i) {
    CHECK(d1.samples[i].sample_id == d2.samples[i].sample_id);
    CHECK(d1.samples[i].motion.data == d2.samples[i].motion.data);
  }
}

TEST_CASE("generated lengths stay within the jitter bound") {
  SyntheticSpec spec = SyntheticSpec::default_toy(11);
  Dataset d = generate_synthetic(spec);
  for (const LabeledMotion& lm : d.samples) {
    const ActionSpec& as = spec.actions[static_cast<size_t>(lm.action)];
    CHECK(std::abs(lm.motion.frames() - as.mean_len) <=
          as.jitter * as.mean_len + 0.5);
  }
}

TEST_CASE("generator is pure: degenerate ranges give identical samples") {
  SyntheticSpec spec = SyntheticSpec::default_toy(5);
  spec.noise_sigma = 0.0;
  for (ActionSpec& a : spec.actions) {
    a.jitter = 0.0;
    a.amp_hi = a.amp_lo;            // single possible amplitude
    a.phase_hi = a.phase_lo = 1.0;  // single possible phase
    a.count = 3;
  }
  Dataset d = generate_synthetic(spec);
  for (int a = 0; a < spec.A; ++a) {
    const Motion* first = nullptr;
    for (const LabeledMotion& lm : d.samples) {
      if (lm.action != a) continue;
      if (!first)
        first = &lm.motion;
      else
        CHECK(lm.motion.data == first->data);
    }
  }
}

TEST_CASE("distinct per-action mean lengths are required") {
  SyntheticSpec spec = SyntheticSpec::default_toy(1);
  spec.actions[1].mean_len = spec.actions[0].mean_len;
  CHECK_THROWS(generate_synthetic(spec));
}

TEST_CASE("save and load round-trip exactly") {
  SyntheticSpec spec = SyntheticSpec::default_toy(23);
  for (ActionSpec& a : spec.actions) a.count = 4;
  Dataset d = generate_synthetic(spec);
  const std::string path = temp_path("mopred_roundtrip.jsonl");
  save_dataset(d, path);
  Dataset loaded = load_dataset(path);
  REQUIRE(loaded.size() == d.size());
  CHECK(loaded.K == d.K);
  CHECK(loaded.A == d.A);
  CHECK(loaded.fps == d.fps);
  for (int i = 0; i < d.size(); ++i) {
    CHECK(loaded.samples[i].sample_id == d.samples[i].sample_id);
    CHECK(loaded.samples[i].action == d.samples[i].action);
    CHECK(loaded.samples[i].motion.data == d.samples[i].motion.data);
  }
  std::remove(path.c_str());
}

TEST_CASE("a record with the wrong frame width reports its line number") {
  const std::string path = temp_path("mopred_badwidth.jsonl");
  write_text_file(path,
                  "{\"version\":1,\"K\":2,\"A\":1,\"fps\":30.0}\n"
                  "{\"id\":\"ok\",\"action\":0,\"frames\":[[1.0,2.0]]}\n"
                  "{\"id\":\"bad\",\"action\":0,\"frames\":[[1.0,2.0,3.0]]}\n");
  CHECK_THROWS_WITH_AS(load_dataset(path), doctest::Contains(":3"),
                       std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("a header-only file loads as an empty dataset") {
  const std::string path = temp_path("mopred_empty.jsonl");
  write_text_file(path, "{\"version\":1,\"K\":3,\"A\":2,\"fps\":30.0}\n");
  Dataset d = load_dataset(path);
  CHECK(d.size() == 0);
  CHECK(d.K == 3);
  CHECK(d.A == 2);
  std::remove(path.c_str());
}

TEST_CASE("a zero-byte file is rejected") {
  const std::string path = temp_path("mopred_zero.jsonl");
  write_text_file(path, "");
  CHECK_THROWS(load_dataset(path));
  std::remove(path.c_str());
}

TEST_CASE("split with fraction 0.5 on two samples per action puts one on each side") {
  SyntheticSpec spec = SyntheticSpec::default_toy(7);
  for (ActionSpec& a : spec.actions) a.count = 2;
  Dataset d = generate_synthetic(spec);
  auto [train, test] = split_dataset(d, 0.5, 9);
  for (int a = 0; a < d.A; ++a) {
    int n_train = 0, n_test = 0;
    for (const LabeledMotion& lm : train.samples) n_train += lm.action == a;
    for (const LabeledMotion& lm : test.samples) n_test += lm.action == a;
    CHECK(n_train == 1);
    CHECK(n_test == 1);
  }
}

TEST_CASE("split is deterministic and partitions the sample ids") {
  SyntheticSpec spec = SyntheticSpec::default_toy(29);
  for (ActionSpec& a : spec.actions) a.count = 7;
  Dataset d = generate_synthetic(spec);

  auto [tr1, te1] = split_dataset(d, 0.3, 42);
  auto [tr2, te2] = split_dataset(d, 0.3, 42);
  REQUIRE(tr1.size() == tr2.size());
  for (int i = 0; i < tr1.size(); ++i)
    CHECK(tr1.samples[i].sample_id == tr2.samples[i].sample_id);

  std::multiset<std::string> all, split_union;
  for (const LabeledMotion& lm : d.samples) all.insert(lm.sample_id);
  for (const LabeledMotion& lm : tr1.samples) split_union.insert(lm.sample_id);
  for (const LabeledMotion& lm : te1.samples) split_union.insert(lm.sample_id);
  CHECK(all == split_union);
}

TEST_CASE("split rejects an action with fewer than two samples") {
  SyntheticSpec spec = SyntheticSpec::default_toy(1);
  for (ActionSpec& a : spec.actions) a.count = 3;
  spec.actions[2].count = 1;
  Dataset d = generate_synthetic(spec);
  CHECK_THROWS(split_dataset(d, 0.5, 1));
}

TEST_CASE("slice_history basics") {
  Motion m(2, 30, 30.0);
  for (int t = 0; t < 30; ++t) {
    m.frame(t)[0] = t;
    m.frame(t)[1] = -t;
  }
  Motion full = slice_history(m, 30);
  CHECK(full.data == m.data);

  Motion one = slice_history(m, 1);
  CHECK(one.frames() == 1);
  CHECK(one.frame(0)[0] == 0.0);

  CHECK_THROWS(slice_history(m, 31));
}

TEST_CASE("a 25-frame observation window slices from longer motions") {
  Motion m(3, 120, 30.0);
  for (int t = 0; t < 120; ++t)
    for (int c = 0; c < 3; ++c) m.frame(t)[c] = t * 3 + c;
  Motion h = slice_history(m, 25);
  CHECK(h.frames() == 25);
  for (int t = 0; t < 25; ++t)
    for (int c = 0; c < 3; ++c) CHECK(h.frame(t)[c] == m.frame(t)[c]);
}
