#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "mopred/cvae.hpp"
#include "mopred/dataset.hpp"
#include "mopred/metrics.hpp"

namespace mopred {

struct ClassifierSettings {
  int hidden = 24;
  std::vector<int> mlp = {32, 24};
  double lr = 0.002;
  int epochs = 500;
  int batch = 16;
};

// One run's full configuration. JSON config files mirror these field names;
// the seed is mandatory though, everything else has defaults.
struct RunConfig {
  std::uint64_t seed = 0;

  std::string data_train;
  std::string data_test;
  std::string out;
  std::string classifier_ckpt;
  std::string csv;
  bool has_synthetic = false;
  SyntheticSpec synthetic;

  int N = 10;
  int L = 10;
  int M = 5;
  int P = 50;
  int T0_max = -1;  // -1 resolves to 2N
  int T_max = 0;    // 0 resolves to 1.5 * (max train length + T0_max + P)
  int Q = 5;
  double delta = 0.015;

  int D_z = 64;
  int hidden = 128;
  int action_embed = 16;
  std::vector<int> mlp = {300, 200, 128};

  double lambda_rec = 100.0;
  double lambda_smooth = 100.0;
  double lr = 0.002;
  int epochs = 500;
  int batch = 16;
  int S = 10;

  double cross_fraction = 0.5;
  int pair_budget = 20000;
  bool teacher_forcing = true;
  double test_fraction = 0.2;
  int steps = 0;
  std::string precision = "f64";

  ClassifierSettings classifier;

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
  void validate() const;

  CvaeConfig cvae_config(int k, int a) const;
  StoppingConfig stopping() const;
  // The scaled-down end-to-end configuration used by the toy corpus runs.
  static RunConfig toy_defaults(std::uint64_t seed);
};

nlohmann::ordered_json synthetic_to_json(const SyntheticSpec& spec);
SyntheticSpec synthetic_from_json(const nlohmann::json& j);

struct TrainLogRow {
  int epoch = 0;
  double rec = 0;
  double smooth = 0;
  double kl = 0;
  double total = 0;
};

struct TrainResult {
  CvaeModel model;
  std::vector<TrainLogRow> log;
  double k = 0.0;
  RunConfig resolved;  // T0_max / T_max resolved against the data
};

// Estimates k once, then trains the generator over transition samples with
// batch-averaged gradients. Deterministic in (config, seed). When out_dir is
// non-empty a checkpoint is written every 50 epochs and at the end.
TrainResult train(const RunConfig& cfg, const Dataset& train_data,
                  const std::string& out_dir = "");

struct Checkpoint {
  nlohmann::json config;
  nlohmann::json extra;
  ParamMap params;
};

void save_checkpoint(const std::string& path, const nlohmann::ordered_json& config,
                     const ParamMap& params,
                     const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());
Checkpoint load_checkpoint(const std::string& path);

CvaeModel model_from_checkpoint(const Checkpoint& ckpt);
ClassifierModel classifier_from_checkpoint(const Checkpoint& ckpt,
                                           double* train_accuracy = nullptr);
nlohmann::ordered_json classifier_config_json(const ClassifierConfig& cfg);

// Full evaluation pass: S stochastic predictions per (test history, action)
// condition, classified and summarized. When cfg.steps > 1 the recursive
// multi-action protocol runs and per-step rows are reported.
MetricReport evaluate(const CvaeModel& model, const ClassifierModel& clf,
                      double classifier_train_acc, const Dataset& train_data,
                      const Dataset& test_data, const RunConfig& cfg);

nlohmann::ordered_json report_to_json(const MetricReport& report,
                                      const RunConfig& cfg);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace mopred
