#include "mopred/harness.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "mopred/transition.hpp"

namespace mopred {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

double max_adjacent_step(const Motion& m, int first_n = 0) {
  const int upto = first_n > 0 ? std::min(first_n, m.frames() - 1) : m.frames() - 1;
  double worst = 0.0;
  for (int t = 0; t < upto; ++t) {
    double d2 = 0.0;
    for (int c = 0; c < m.K; ++c) {
      const double d = m.frame(t + 1)[static_cast<size_t>(c)] -
                       m.frame(t)[static_cast<size_t>(c)];
      d2 += d * d;
    }
    worst = std::max(worst, std::sqrt(d2));
  }
  return worst;
}

double mean_of(const std::vector<double>& v) {
  double acc = 0.0;
  for (double x : v) acc += x;
  return v.empty() ? 0.0 : acc / static_cast<double>(v.size());
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

nlohmann::ordered_json synthetic_to_json(const SyntheticSpec& spec) {
  nlohmann::ordered_json j;
  j["K"] = spec.K;
  j["A"] = spec.A;
  j["fps"] = spec.fps;
  j["noise_sigma"] = spec.noise_sigma;
  j["seed"] = spec.seed;
  nlohmann::ordered_json actions = nlohmann::ordered_json::array();
  for (const ActionSpec& a : spec.actions) {
    nlohmann::ordered_json aj;
    aj["freq"] = a.freq;
    aj["amp"] = {a.amp_lo, a.amp_hi};
    aj["phase"] = {a.phase_lo, a.phase_hi};
    aj["mean_len"] = a.mean_len;
    aj["jitter"] = a.jitter;
    aj["count"] = a.count;
    aj["bias"] = a.bias;
    actions.push_back(std::move(aj));
  }
  j["actions"] = std::move(actions);
  return j;
}

SyntheticSpec synthetic_from_json(const nlohmann::json& j) {
  SyntheticSpec spec;
  spec.K = j.at("K").get<int>();
  spec.A = j.at("A").get<int>();
  spec.fps = j.value("fps", 30.0);
  spec.noise_sigma = j.value("noise_sigma", 0.0);
  spec.seed = j.value("seed", 0ULL);
  for (const auto& aj : j.at("actions")) {
    ActionSpec a;
    a.freq = aj.at("freq").get<double>();
    a.amp_lo = aj.at("amp").at(0).get<double>();
    a.amp_hi = aj.at("amp").at(1).get<double>();
    a.phase_lo = aj.at("phase").at(0).get<double>();
    a.phase_hi = aj.at("phase").at(1).get<double>();
    a.mean_len = aj.at("mean_len").get<double>();
    a.jitter = aj.at("jitter").get<double>();
    a.count = aj.at("count").get<int>();
    a.bias = aj.at("bias").get<std::vector<double>>();
    spec.actions.push_back(std::move(a));
  }
  spec.validate();
  return spec;
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  if (!j.contains("seed")) fail("config: seed is mandatory");
  c.seed = j.at("seed").get<std::uint64_t>();

  c.data_train = j.value("data_train", "");
  c.data_test = j.value("data_test", "");
  c.out = j.value("out", "");
  c.classifier_ckpt = j.value("classifier_ckpt", "");
  c.csv = j.value("csv", "");
  if (j.contains("synthetic")) {
    c.synthetic = synthetic_from_json(j.at("synthetic"));
    c.has_synthetic = true;
  }

  c.N = j.value("N", c.N);
  c.L = j.value("L", c.L);
  c.M = j.value("M", c.M);
  c.P = j.value("P", c.P);
  c.T0_max = j.value("T0_max", -1);
  c.T_max = j.value("T_max", 0);
  c.Q = j.value("Q", c.Q);
  c.delta = j.value("delta", c.delta);

  c.D_z = j.value("D_z", c.D_z);
  c.hidden = j.value("hidden", c.hidden);
  c.action_embed = j.value("action_embed", c.action_embed);
  if (j.contains("mlp")) c.mlp = j.at("mlp").get<std::vector<int>>();

  c.lambda_rec = j.value("lambda_rec", c.lambda_rec);
  c.lambda_smooth = j.value("lambda_smooth", c.lambda_smooth);
  c.lr = j.value("lr", c.lr);
  c.epochs = j.value("epochs", c.epochs);
  c.batch = j.value("batch", c.batch);
  c.S = j.value("S", c.S);

  c.cross_fraction = j.value("cross_fraction", c.cross_fraction);
  c.pair_budget = j.value("pair_budget", c.pair_budget);
  c.teacher_forcing = j.value("teacher_forcing", c.teacher_forcing);
  c.test_fraction = j.value("test_fraction", c.test_fraction);
  c.steps = j.value("steps", 0);
  c.precision = j.value("precision", "f64");

  if (j.contains("classifier")) {
    const auto& cj = j.at("classifier");
    c.classifier.hidden = cj.value("hidden", c.classifier.hidden);
    if (cj.contains("mlp")) c.classifier.mlp = cj.at("mlp").get<std::vector<int>>();
    c.classifier.lr = cj.value("lr", c.classifier.lr);
    c.classifier.epochs = cj.value("epochs", c.classifier.epochs);
    c.classifier.batch = cj.value("batch", c.classifier.batch);
  }
  if (c.T0_max < 0) c.T0_max = 2 * c.N;
  c.validate();
  return c;
}

nlohmann::ordered_json RunConfig::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["data_train"] = data_train;
  j["data_test"] = data_test;
  j["out"] = out;
  j["classifier_ckpt"] = classifier_ckpt;
  j["csv"] = csv;
  if (has_synthetic) j["synthetic"] = synthetic_to_json(synthetic);
  j["N"] = N;
  j["L"] = L;
  j["M"] = M;
  j["P"] = P;
  j["T0_max"] = T0_max;
  j["T_max"] = T_max;
  j["Q"] = Q;
  j["delta"] = delta;
  j["D_z"] = D_z;
  j["hidden"] = hidden;
  j["action_embed"] = action_embed;
  j["mlp"] = mlp;
  j["lambda_rec"] = lambda_rec;
  j["lambda_smooth"] = lambda_smooth;
  j["lr"] = lr;
  j["epochs"] = epochs;
  j["batch"] = batch;
  j["S"] = S;
  j["cross_fraction"] = cross_fraction;
  j["pair_budget"] = pair_budget;
  j["teacher_forcing"] = teacher_forcing;
  j["test_fraction"] = test_fraction;
  j["steps"] = steps;
  j["precision"] = precision;
  nlohmann::ordered_json cj;
  cj["hidden"] = classifier.hidden;
  cj["mlp"] = classifier.mlp;
  cj["lr"] = classifier.lr;
  cj["epochs"] = classifier.epochs;
  cj["batch"] = classifier.batch;
  j["classifier"] = std::move(cj);
  return j;
}

void RunConfig::validate() const {
  if (N < 1) fail("config: N must be positive");
  if (L < 1 || M < 1) fail("config: L and M must be positive");
  if (P < 0) fail("config: P must be non-negative");
  if (Q < 1) fail("config: Q must be positive");
  if (delta <= 0) fail("config: delta must be positive");
  if (T_max != 0 && T_max <= Q) fail("config: T_max must exceed Q");
  if (D_z < 1 || hidden < 1 || action_embed < 1 || mlp.empty())
    fail("config: invalid network dimensions");
  if (lambda_rec < 0 || lambda_smooth < 0) fail("config: negative loss weight");
  if (epochs < 0 || batch < 1 || S < 1) fail("config: invalid schedule");
  if (cross_fraction < 0 || cross_fraction > 1) fail("config: cross_fraction in [0,1]");
  if (test_fraction <= 0 || test_fraction >= 1)
    fail("config: test_fraction strictly between 0 and 1");
  if (precision != "f64" && precision != "f32")
    fail("config: precision must be f64 or f32");
}

CvaeConfig RunConfig::cvae_config(int k, int a) const {
  CvaeConfig mc;
  mc.K = k;
  mc.A = a;
  mc.N = N;
  mc.D_z = D_z;
  mc.hidden = hidden;
  mc.action_embed = action_embed;
  mc.mlp = mlp;
  mc.P = P;
  mc.T0_max = T0_max < 0 ? 2 * N : T0_max;
  mc.T_max = T_max;
  mc.L = std::min(L, N);
  mc.M = std::min(M, 2 * mc.L);
  mc.Q = Q;
  mc.delta = delta;
  mc.teacher_forcing = teacher_forcing;
  return mc;
}

StoppingConfig RunConfig::stopping() const {
  StoppingConfig s;
  s.Q = Q;
  s.delta = delta;
  s.T_max = T_max;
  return s;
}

RunConfig RunConfig::toy_defaults(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  c.N = 10;
  c.L = 10;
  c.M = 5;
  c.P = 20;
  c.T0_max = 5;
  c.Q = 5;
  c.delta = 0.02;
  c.D_z = 16;
  c.hidden = 32;
  c.action_embed = 8;
  c.mlp = {64, 48};
  c.lambda_rec = 100.0;
  c.lambda_smooth = 100.0;
  c.lr = 0.002;
  c.epochs = 200;
  c.batch = 16;
  c.S = 10;
  c.classifier.hidden = 24;
  c.classifier.mlp = {32, 24};
  c.classifier.lr = 0.002;
  c.classifier.epochs = 250;
  c.classifier.batch = 16;
  return c;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& path, const nlohmann::ordered_json& config,
                     const ParamMap& params, const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["config"] = config;
  if (!extra.empty()) j["extra"] = extra;
  nlohmann::ordered_json pj;
  for (const auto& [name, t] : params) {
    nlohmann::ordered_json tj;
    tj["shape"] = t.shape();
    tj["data"] = std::vector<double>(t.data().begin(), t.data().end());
    pj[name] = std::move(tj);
  }
  j["params"] = std::move(pj);
  write_text_file(path, j.dump());
}

Checkpoint load_checkpoint(const std::string& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const std::exception& e) {
    fail(path + ": cannot parse checkpoint: " + e.what());
  }
  if (j.value("version", 0) != 1) fail(path + ": unsupported checkpoint version");
  Checkpoint ckpt;
  ckpt.config = j.at("config");
  if (j.contains("extra")) ckpt.extra = j.at("extra");
  for (const auto& [name, tj] : j.at("params").items()) {
    Shape shape = tj.at("shape").get<Shape>();
    std::vector<double> data = tj.at("data").get<std::vector<double>>();
    ckpt.params[name] = Tensor(std::move(shape), std::move(data), true);
  }
  return ckpt;
}

CvaeModel model_from_checkpoint(const Checkpoint& ckpt) {
  RunConfig rc = RunConfig::from_json(ckpt.config);
  const int k = ckpt.extra.at("K").get<int>();
  const int a = ckpt.extra.at("A").get<int>();
  return CvaeModel::from_params(rc.cvae_config(k, a), ckpt.params);
}

nlohmann::ordered_json classifier_config_json(const ClassifierConfig& cfg) {
  nlohmann::ordered_json j;
  j["K"] = cfg.K;
  j["A"] = cfg.A;
  j["hidden"] = cfg.hidden;
  j["mlp"] = cfg.mlp;
  j["lr"] = cfg.lr;
  j["epochs"] = cfg.epochs;
  j["batch"] = cfg.batch;
  return j;
}

ClassifierModel classifier_from_checkpoint(const Checkpoint& ckpt,
                                           double* train_accuracy) {
  ClassifierConfig cfg;
  cfg.K = ckpt.config.at("K").get<int>();
  cfg.A = ckpt.config.at("A").get<int>();
  cfg.hidden = ckpt.config.at("hidden").get<int>();
  cfg.mlp = ckpt.config.at("mlp").get<std::vector<int>>();
  cfg.lr = ckpt.config.value("lr", 0.002);
  cfg.epochs = ckpt.config.value("epochs", 500);
  cfg.batch = ckpt.config.value("batch", 16);
  if (train_accuracy && ckpt.extra.contains("train_accuracy"))
    *train_accuracy = ckpt.extra.at("train_accuracy").get<double>();
  return ClassifierModel::from_params(cfg, ckpt.params);
}

// ---------------------------------------------------------------------------
// Training

TrainResult train(const RunConfig& raw_cfg, const Dataset& train_data,
                  const std::string& out_dir) {
  RunConfig cfg = raw_cfg;
  cfg.validate();
  if (train_data.size() == 0) fail("train: empty dataset");
  if (cfg.T0_max < 0) cfg.T0_max = 2 * cfg.N;

  set_compute_precision(cfg.precision == "f32" ? Precision::kF32 : Precision::kF64);

  const double k = estimate_k(train_data, cfg.pair_budget, derive_seed(cfg.seed, {0x6b}));

  int max_len = 0;
  for (const LabeledMotion& lm : train_data.samples)
    max_len = std::max(max_len, lm.motion.frames());
  if (cfg.T_max == 0)
    cfg.T_max = static_cast<int>(std::ceil(1.5 * (max_len + cfg.T0_max + cfg.P)));

  const CvaeConfig mcfg = cfg.cvae_config(train_data.K, train_data.A);
  CvaeModel model = CvaeModel::init(mcfg, derive_seed(cfg.seed, {1}));
  ParamMap params = model.params();
  AdamState adam;
  adam.cfg.lr = cfg.lr;

  const DctBasis basis = DctBasis::make(mcfg.L, mcfg.M);
  const LossWeights weights{cfg.lambda_rec, cfg.lambda_smooth};
  PairSampler sampler(train_data, cfg.N, cfg.cross_fraction);
  Rng rng(derive_seed(cfg.seed, {2}));

  auto checkpoint_json = [&](const std::string& path) {
    nlohmann::ordered_json extra;
    extra["K"] = train_data.K;
    extra["A"] = train_data.A;
    extra["fps"] = train_data.fps;
    extra["k"] = k;
    save_checkpoint(path, cfg.to_json(), params, extra);
  };

  TrainResult result;
  result.k = k;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto pairs = sampler.epoch_pairs(train_data.size(), rng);
    LossParts epoch_sum;
    int n_samples = 0;
    for (size_t b = 0; b < pairs.size(); b += static_cast<size_t>(cfg.batch)) {
      const size_t n = std::min<size_t>(static_cast<size_t>(cfg.batch), pairs.size() - b);
      GradValueMap grads;
      for (size_t i = 0; i < n; ++i) {
        const auto [hi, fi] = pairs[b + i];
        TransitionSample sample = assemble_sample(
            train_data.samples[static_cast<size_t>(hi)],
            train_data.samples[static_cast<size_t>(fi)], cfg.N, k, cfg.P,
            cfg.T0_max, rng, cfg.T_max);
        std::vector<double> eps(static_cast<size_t>(mcfg.D_z));
        for (double& e : eps) e = rng.normal();

        Tape tape;
        Tape::Scope scope(tape);
        auto [loss, parts] = total_loss(model, sample, weights, basis,
                                        Tensor({mcfg.D_z, 1}, std::move(eps)));
        if (!std::isfinite(parts.total))
          fail("train: non-finite loss at epoch " + std::to_string(epoch + 1));
        accumulate_grads(params, tape.backward(loss), grads);
        epoch_sum.rec += parts.rec;
        epoch_sum.smooth += parts.smooth;
        epoch_sum.kl += parts.kl;
        epoch_sum.total += parts.total;
        ++n_samples;
      }
      for (auto& [name, g] : grads)
        for (double& v : g) v /= static_cast<double>(n);
      adam_step(params, grads, adam);
    }
    TrainLogRow row;
    row.epoch = epoch + 1;
    row.rec = epoch_sum.rec / n_samples;
    row.smooth = epoch_sum.smooth / n_samples;
    row.kl = epoch_sum.kl / n_samples;
    row.total = epoch_sum.total / n_samples;
    result.log.push_back(row);

    if (!out_dir.empty() && (epoch + 1) % 50 == 0 && epoch + 1 != cfg.epochs) {
      std::filesystem::create_directories(out_dir);
      checkpoint_json(out_dir + "/checkpoint_epoch" + std::to_string(epoch + 1) +
                      ".json");
    }
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    checkpoint_json(out_dir + "/checkpoint.json");
  }
  result.model = std::move(model);
  result.resolved = cfg;
  return result;
}

// ---------------------------------------------------------------------------
// Evaluation

MetricReport evaluate(const CvaeModel& model, const ClassifierModel& clf,
                      double classifier_train_acc, const Dataset& train_data,
                      const Dataset& test_data, const RunConfig& cfg) {
  if (test_data.size() == 0) fail("evaluate: empty test set");
  const CvaeConfig& mcfg = model.cfg;
  const int n_actions = mcfg.A;
  const int n_steps = std::max(1, cfg.steps);
  const int s_count = cfg.S;

  StoppingConfig stop;
  stop.Q = cfg.Q;
  stop.delta = cfg.delta;
  stop.T_max = cfg.T_max > 0 ? cfg.T_max : mcfg.T_max;
  if (stop.T_max <= stop.Q) fail("evaluate: unresolved rollout budget");

  // Ground-truth feature statistics.
  std::vector<std::vector<double>> train_feats, test_feats;
  for (const LabeledMotion& lm : train_data.samples)
    train_feats.push_back(clf.features(lm.motion));
  for (const LabeledMotion& lm : test_data.samples)
    test_feats.push_back(clf.features(lm.motion));
  const FeatureStats train_stats = feature_stats(train_feats);
  const FeatureStats test_stats = feature_stats(test_feats);

  struct StepAccum {
    int hits = 0;
    int total = 0;
    std::vector<std::vector<double>> feats;
    std::vector<double> div, div_w;
  };
  std::vector<StepAccum> step_acc(static_cast<size_t>(n_steps));

  struct ActionAccum {
    int hits = 0;
    int total = 0;
    std::vector<double> div, div_w, ade_v, ade_w_v, lengths;
    int conditions = 0;
  };
  std::vector<ActionAccum> action_acc(static_cast<size_t>(n_actions));

  MetricReport report;
  report.sample_count = s_count;
  report.test_samples = test_data.size();
  report.classifier_train_acc = classifier_train_acc;

  double pred_transition_max = 0.0;

  for (const LabeledMotion& lm : test_data.samples) {
    if (lm.motion.frames() < mcfg.N + 1)
      fail("evaluate: test motion " + lm.sample_id + " shorter than N+1 frames");
    const Motion history = slice_history(lm.motion, mcfg.N);
    const Motion gt_future = lm.motion.window(mcfg.N, lm.motion.frames() - mcfg.N);

    for (int a = 0; a < n_actions; ++a) {
      std::vector<int> action_seq(static_cast<size_t>(n_steps));
      action_seq[0] = a;
      Rng seq_rng(derive_seed(cfg.seed, {0x5ec5, fnv1a(lm.sample_id),
                                         static_cast<std::uint64_t>(a)}));
      for (int m = 1; m < n_steps; ++m)
        action_seq[static_cast<size_t>(m)] = seq_rng.uniform_int(n_actions);

      std::vector<std::vector<Motion>> truncated(static_cast<size_t>(n_steps));
      std::vector<std::vector<Motion>> full(static_cast<size_t>(n_steps));
      for (int j = 0; j < s_count; ++j) {
        Rng rng(derive_seed(cfg.seed, {0xe7a1, fnv1a(lm.sample_id),
                                       static_cast<std::uint64_t>(a),
                                       static_cast<std::uint64_t>(j)}));
        auto rollouts = predict_sequence_rollouts(model, history, action_seq, stop, rng);
        for (int m = 0; m < n_steps; ++m) {
          truncated[static_cast<size_t>(m)].push_back(std::move(rollouts[static_cast<size_t>(m)].truncated));
          full[static_cast<size_t>(m)].push_back(std::move(rollouts[static_cast<size_t>(m)].full));
        }
      }

      std::optional<double> cond_ade, cond_ade_w;
      if (a == lm.action) {
        cond_ade = ade(truncated[0], gt_future);
        cond_ade_w = ade_dtw(truncated[0], gt_future);
      }

      for (int m = 0; m < n_steps; ++m) {
        StepAccum& sa = step_acc[static_cast<size_t>(m)];
        ConditionRow row;
        row.sample_id = lm.sample_id;
        row.action = action_seq[static_cast<size_t>(m)];
        row.step = m + 1;
        int row_hits = 0;
        double len_sum = 0.0;
        for (const Motion& mo : truncated[static_cast<size_t>(m)]) {
          if (clf.predict_label(mo) == action_seq[static_cast<size_t>(m)]) {
            ++sa.hits;
            ++row_hits;
          }
          ++sa.total;
          sa.feats.push_back(clf.features(mo));
          len_sum += mo.frames();
        }
        row.acc = static_cast<double>(row_hits) / s_count;
        row.mean_length = len_sum / s_count;
        if (s_count >= 2) {
          sa.div.push_back(diversity(full[static_cast<size_t>(m)]));
          sa.div_w.push_back(diversity_dtw(truncated[static_cast<size_t>(m)]));
          row.div = sa.div.back();
          row.div_w = sa.div_w.back();
        }
        if (m == 0 && cond_ade) {
          row.ade = cond_ade;
          row.ade_w = cond_ade_w;
        }
        report.rows.push_back(std::move(row));
      }

      ActionAccum& aa = action_acc[static_cast<size_t>(a)];
      ++aa.conditions;
      for (const Motion& mo : truncated[0]) {
        if (clf.predict_label(mo) == a) ++aa.hits;
        ++aa.total;
        aa.lengths.push_back(mo.frames());
        pred_transition_max =
            std::max(pred_transition_max, max_adjacent_step(mo, mcfg.T0_max));
      }
      const ConditionRow& row0 =
          report.rows[report.rows.size() - static_cast<size_t>(n_steps)];
      if (row0.div) {
        aa.div.push_back(*row0.div);
        aa.div_w.push_back(*row0.div_w);
      }
      if (cond_ade) {
        aa.ade_v.push_back(*cond_ade);
        aa.ade_w_v.push_back(*cond_ade_w);
      }
    }
  }

  // Per-step rows; step 1 is the standard single-action evaluation.
  for (int m = 0; m < n_steps; ++m) {
    const StepAccum& sa = step_acc[static_cast<size_t>(m)];
    StepMetrics row;
    row.step = m + 1;
    row.acc = sa.total ? static_cast<double>(sa.hits) / sa.total : 0.0;
    const FeatureStats gen_stats = feature_stats(sa.feats);
    row.fid_train = fid(gen_stats, train_stats);
    row.fid_test = fid(gen_stats, test_stats);
    if (!sa.div.empty()) row.div = mean_of(sa.div);
    if (!sa.div_w.empty()) row.div_w = mean_of(sa.div_w);
    report.steps.push_back(row);
  }

  report.acc = report.steps[0].acc;
  report.fid_train = report.steps[0].fid_train;
  report.fid_test = report.steps[0].fid_test;
  report.div = report.steps[0].div;
  report.div_w = report.steps[0].div_w;
  if (cfg.steps == 0) report.steps.clear();

  std::vector<double> all_ade, all_ade_w;
  for (int a = 0; a < n_actions; ++a) {
    const ActionAccum& aa = action_acc[static_cast<size_t>(a)];
    ActionMetrics am;
    am.action = a;
    am.acc = aa.total ? static_cast<double>(aa.hits) / aa.total : 0.0;
    if (!aa.div.empty()) am.div = mean_of(aa.div);
    if (!aa.div_w.empty()) am.div_w = mean_of(aa.div_w);
    if (!aa.ade_v.empty()) {
      am.ade = mean_of(aa.ade_v);
      am.ade_w = mean_of(aa.ade_w_v);
      all_ade.insert(all_ade.end(), aa.ade_v.begin(), aa.ade_v.end());
      all_ade_w.insert(all_ade_w.end(), aa.ade_w_v.begin(), aa.ade_w_v.end());
    }
    am.mean_length = mean_of(aa.lengths);
    double gt_len_sum = 0.0;
    int gt_len_n = 0;
    for (const LabeledMotion& lm : train_data.samples)
      if (lm.action == a) {
        gt_len_sum += lm.motion.frames();
        ++gt_len_n;
      }
    am.gt_mean_length = gt_len_n ? gt_len_sum / gt_len_n : 0.0;
    am.conditions = aa.conditions;
    report.per_action.push_back(am);
  }
  if (!all_ade.empty()) {
    report.ade = mean_of(all_ade);
    report.ade_w = mean_of(all_ade_w);
  }

  report.pred_transition_max_step = pred_transition_max;
  double gt_step = 0.0;
  for (const LabeledMotion& lm : train_data.samples)
    gt_step = std::max(gt_step, max_adjacent_step(lm.motion));
  for (const LabeledMotion& lm : test_data.samples)
    gt_step = std::max(gt_step, max_adjacent_step(lm.motion));
  report.gt_max_adjacent_step = gt_step;

  return report;
}

nlohmann::ordered_json report_to_json(const MetricReport& report,
                                      const RunConfig& cfg) {
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  nlohmann::ordered_json j;
  j["version"] = 1;
  j["acc"] = report.acc;
  j["fid_train"] = report.fid_train;
  j["fid_test"] = report.fid_test;
  j["div"] = opt(report.div);
  j["div_w"] = opt(report.div_w);
  j["ade"] = opt(report.ade);
  j["ade_w"] = opt(report.ade_w);
  j["classifier_train_acc"] = report.classifier_train_acc;
  j["pred_transition_max_step"] = report.pred_transition_max_step;
  j["gt_max_adjacent_step"] = report.gt_max_adjacent_step;
  j["test_samples"] = report.test_samples;
  j["S"] = report.sample_count;

  nlohmann::ordered_json actions = nlohmann::ordered_json::array();
  for (const ActionMetrics& am : report.per_action) {
    nlohmann::ordered_json aj;
    aj["action"] = am.action;
    aj["acc"] = am.acc;
    aj["div"] = opt(am.div);
    aj["div_w"] = opt(am.div_w);
    aj["ade"] = opt(am.ade);
    aj["ade_w"] = opt(am.ade_w);
    aj["mean_length"] = am.mean_length;
    aj["gt_mean_length"] = am.gt_mean_length;
    aj["conditions"] = am.conditions;
    actions.push_back(std::move(aj));
  }
  j["per_action"] = std::move(actions);

  if (!report.steps.empty()) {
    nlohmann::ordered_json steps = nlohmann::ordered_json::array();
    for (const StepMetrics& sm : report.steps) {
      nlohmann::ordered_json sj;
      sj["step"] = sm.step;
      sj["acc"] = sm.acc;
      sj["fid_train"] = sm.fid_train;
      sj["fid_test"] = sm.fid_test;
      sj["div"] = opt(sm.div);
      sj["div_w"] = opt(sm.div_w);
      steps.push_back(std::move(sj));
    }
    j["steps"] = std::move(steps);
  }
  j["config"] = cfg.to_json();
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail("cannot open for writing: " + path);
  os << content;
  if (!os) fail("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail("cannot open for reading: " + path);
  std::string content((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());
  return content;
}

}  // namespace mopred
