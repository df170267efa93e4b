#include "mopred/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace mopred {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

constexpr double kPi = 3.14159265358979323846;

}  // namespace

Motion Motion::window(int start, int count) const {
  if (start < 0 || count < 1 || start + count > frames())
    fail("motion window [" + std::to_string(start) + ", " +
         std::to_string(start + count) + ") out of range for T=" +
         std::to_string(frames()));
  Motion out(K, count, fps);
  std::copy(data.begin() + static_cast<size_t>(start) * K,
            data.begin() + static_cast<size_t>(start + count) * K,
            out.data.begin());
  return out;
}

void Motion::append_frame(std::span<const double> pose) {
  data.insert(data.end(), pose.begin(), pose.end());
}

void SyntheticSpec::validate() const {
  if (K < 1 || A < 1) fail("synthetic spec: K and A must be positive");
  if (fps <= 0) fail("synthetic spec: fps must be positive");
  if (noise_sigma < 0) fail("synthetic spec: noise sigma must be non-negative");
  if (static_cast<int>(actions.size()) != A)
    fail("synthetic spec: expected " + std::to_string(A) + " action entries, got " +
         std::to_string(actions.size()));
  for (const ActionSpec& a : actions) {
    if (a.count < 1) fail("synthetic spec: sample count must be positive");
    if (a.mean_len < 2) fail("synthetic spec: mean length must be at least 2");
    if (a.jitter < 0) fail("synthetic spec: jitter must be non-negative");
    if (a.amp_hi < a.amp_lo || a.phase_hi < a.phase_lo)
      fail("synthetic spec: empty amplitude or phase range");
    if (static_cast<int>(a.bias.size()) != K)
      fail("synthetic spec: bias vector length must equal K");
  }
  for (size_t i = 0; i < actions.size(); ++i)
    for (size_t j = i + 1; j < actions.size(); ++j)
      if (actions[i].mean_len == actions[j].mean_len)
        fail("synthetic spec: per-action mean lengths must be distinct");
}

SyntheticSpec SyntheticSpec::default_toy(std::uint64_t seed) {
  SyntheticSpec spec;
  spec.K = 6;
  spec.A = 4;
  spec.fps = 30.0;
  spec.noise_sigma = 0.03;
  spec.seed = seed;
  const double mean_lens[4] = {40, 60, 80, 100};
  const double freqs[4] = {1.1, 0.9, 1.3, 0.7};
  // 250 samples total; a 0.2 stratified split gives 200 train / 50 test
  const int counts[4] = {63, 63, 62, 62};
  for (int a = 0; a < 4; ++a) {
    ActionSpec as;
    as.freq = freqs[a];
    as.amp_lo = 0.5;
    as.amp_hi = 1.0;
    as.phase_lo = 0.0;
    as.phase_hi = 2.0 * kPi;
    as.mean_len = mean_lens[a];
    as.jitter = 0.1;
    as.count = counts[a];
    // orthogonal cosine patterns keep the actions linearly separable
    as.bias.resize(6);
    for (int c = 0; c < 6; ++c)
      as.bias[c] = 1.5 * std::cos(kPi * (2 * c + 1) * (a + 1) / 12.0);
    spec.actions.push_back(std::move(as));
  }
  return spec;
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Dataset d;
  d.A = spec.A;
  d.K = spec.K;
  d.fps = spec.fps;

  for (int a = 0; a < spec.A; ++a) {
    const ActionSpec& as = spec.actions[static_cast<size_t>(a)];
    for (int s = 0; s < as.count; ++s) {
      const double rel = rng.uniform(-as.jitter, as.jitter);
      const int t_len = std::max(2, static_cast<int>(std::llround(as.mean_len * (1.0 + rel))));
      std::vector<double> amp(static_cast<size_t>(spec.K));
      std::vector<double> phase(static_cast<size_t>(spec.K));
      for (int c = 0; c < spec.K; ++c) {
        amp[static_cast<size_t>(c)] = rng.uniform(as.amp_lo, as.amp_hi);
        phase[static_cast<size_t>(c)] = rng.uniform(as.phase_lo, as.phase_hi);
      }
      Motion m(spec.K, t_len, spec.fps);
      for (int j = 0; j < t_len; ++j) {
        auto f = m.frame(j);
        for (int c = 0; c < spec.K; ++c) {
          double v = amp[static_cast<size_t>(c)] *
                         std::sin(2.0 * kPi * as.freq * (j / spec.fps) +
                                  phase[static_cast<size_t>(c)]) +
                     as.bias[static_cast<size_t>(c)];
          if (spec.noise_sigma > 0) v += spec.noise_sigma * rng.normal();
          f[c] = v;
        }
      }
      LabeledMotion lm;
      lm.motion = std::move(m);
      lm.action = a;
      lm.sample_id = "a" + std::to_string(a) + "_s" + std::to_string(s);
      d.samples.push_back(std::move(lm));
    }
  }
  return d;
}

void save_dataset(const Dataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot open for writing: " + path);
  nlohmann::ordered_json header;
  header["version"] = 1;
  header["K"] = d.K;
  header["A"] = d.A;
  header["fps"] = d.fps;
  os << header.dump() << "\n";
  for (const LabeledMotion& lm : d.samples) {
    nlohmann::ordered_json rec;
    rec["id"] = lm.sample_id;
    rec["action"] = lm.action;
    nlohmann::json frames = nlohmann::json::array();
    for (int t = 0; t < lm.motion.frames(); ++t) {
      nlohmann::json row = nlohmann::json::array();
      for (double v : lm.motion.frame(t)) row.push_back(v);
      frames.push_back(std::move(row));
    }
    rec["frames"] = std::move(frames);
    os << rec.dump() << "\n";
  }
  if (!os) fail("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open for reading: " + path);
  std::string line;
  if (!std::getline(is, line)) fail(path + ": missing header line");

  Dataset d;
  int line_no = 1;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.value("version", 0) != 1) fail("unsupported version");
    d.K = header.at("K").get<int>();
    d.A = header.at("A").get<int>();
    d.fps = header.at("fps").get<double>();
    if (d.K < 1 || d.A < 1 || d.fps <= 0) fail("invalid header fields");
  } catch (const std::exception& e) {
    fail(path + ":1: bad header: " + e.what());
  }

  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto rec = nlohmann::json::parse(line);
      LabeledMotion lm;
      lm.sample_id = rec.at("id").get<std::string>();
      lm.action = rec.at("action").get<int>();
      if (lm.action < 0 || lm.action >= d.A) fail("action index out of range");
      const auto& frames = rec.at("frames");
      if (!frames.is_array() || frames.empty()) fail("frames must be a non-empty array");
      Motion m(d.K, static_cast<int>(frames.size()), d.fps);
      for (size_t t = 0; t < frames.size(); ++t) {
        const auto& row = frames[t];
        if (!row.is_array() || static_cast<int>(row.size()) != d.K)
          fail("frame width " + std::to_string(row.size()) + " does not match K=" +
               std::to_string(d.K));
        auto f = m.frame(static_cast<int>(t));
        for (int c = 0; c < d.K; ++c) {
          f[c] = row[static_cast<size_t>(c)].get<double>();
          if (!std::isfinite(f[c])) fail("non-finite value");
        }
      }
      lm.motion = std::move(m);
      d.samples.push_back(std::move(lm));
    } catch (const std::exception& e) {
      fail(path + ":" + std::to_string(line_no) + ": bad record: " + e.what());
    }
  }
  return d;
}

std::pair<Dataset, Dataset> split_dataset(const Dataset& d, double test_fraction,
                                          std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    fail("split: test fraction must lie strictly between 0 and 1");

  std::vector<std::vector<int>> by_action(static_cast<size_t>(d.A));
  for (int i = 0; i < d.size(); ++i)
    by_action[static_cast<size_t>(d.samples[static_cast<size_t>(i)].action)].push_back(i);

  Dataset train, test;
  train.A = test.A = d.A;
  train.K = test.K = d.K;
  train.fps = test.fps = d.fps;
  train.split_tag = "train";
  test.split_tag = "test";

  Rng rng(seed);
  for (int a = 0; a < d.A; ++a) {
    std::vector<int>& idx = by_action[static_cast<size_t>(a)];
    if (static_cast<int>(idx.size()) < 2)
      fail("split: action " + std::to_string(a) + " has fewer than 2 samples");
    // Fisher-Yates with the shared stream keeps the split deterministic.
    for (int i = static_cast<int>(idx.size()) - 1; i > 0; --i)
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.uniform_int(i + 1))]);
    int n_test = static_cast<int>(std::llround(test_fraction * static_cast<double>(idx.size())));
    n_test = std::clamp(n_test, 1, static_cast<int>(idx.size()) - 1);
    std::vector<int> te(idx.begin(), idx.begin() + n_test);
    std::vector<int> tr(idx.begin() + n_test, idx.end());
    std::sort(te.begin(), te.end());
    std::sort(tr.begin(), tr.end());
    for (int i : te) test.samples.push_back(d.samples[static_cast<size_t>(i)]);
    for (int i : tr) train.samples.push_back(d.samples[static_cast<size_t>(i)]);
  }
  return {train, test};
}

Motion slice_history(const Motion& m, int n) {
  if (n < 1 || n > m.frames())
    fail("slice_history: N=" + std::to_string(n) + " out of range for T=" +
         std::to_string(m.frames()));
  return m.window(0, n);
}

}  // namespace mopred
