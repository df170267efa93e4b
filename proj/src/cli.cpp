#include "mopred/cli.hpp"

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mopred/harness.hpp"

namespace mopred {

namespace {

std::vector<int> parse_action_list(const std::string& text, int n_actions) {
  std::vector<int> actions;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const int a = std::stoi(item);
    if (a < 0 || a >= n_actions)
      throw std::runtime_error("action " + item + " out of range [0, " +
                               std::to_string(n_actions) + ")");
    actions.push_back(a);
  }
  if (actions.empty()) throw std::runtime_error("empty action list");
  return actions;
}

RunConfig config_from_file(const std::string& path) {
  return RunConfig::from_json(nlohmann::json::parse(read_text_file(path)));
}

Dataset training_data_for(const RunConfig& cfg) {
  if (!cfg.data_train.empty()) return load_dataset(cfg.data_train);
  if (cfg.has_synthetic) {
    Dataset full = generate_synthetic(cfg.synthetic);
    auto [train, test] = split_dataset(full, cfg.test_fraction, cfg.seed);
    return train;
  }
  throw std::runtime_error("config: set data_train or synthetic");
}

ClassifierModel classifier_for(const RunConfig& cfg, const Dataset& train,
                               double* train_acc) {
  if (!cfg.classifier_ckpt.empty())
    return classifier_from_checkpoint(load_checkpoint(cfg.classifier_ckpt), train_acc);
  ClassifierConfig cc;
  cc.K = train.K;
  cc.A = train.A;
  cc.hidden = cfg.classifier.hidden;
  cc.mlp = cfg.classifier.mlp;
  cc.lr = cfg.classifier.lr;
  cc.epochs = cfg.classifier.epochs;
  cc.batch = cfg.classifier.batch;
  ClassifierTrainResult r = train_classifier(train, cc, derive_seed(cfg.seed, {0xc1f}));
  if (train_acc) *train_acc = r.train_accuracy;
  return r.model;
}

void write_csv(const std::string& path, const MetricReport& report) {
  std::ostringstream os;
  os << "sample_id,action,step,acc,mean_length,div,div_w,ade,ade_w\n";
  auto cell = [](const std::optional<double>& v) {
    return v ? std::to_string(*v) : std::string();
  };
  for (const ConditionRow& r : report.rows)
    os << r.sample_id << "," << r.action << "," << r.step << "," << r.acc << ","
       << r.mean_length << "," << cell(r.div) << "," << cell(r.div_w) << ","
       << cell(r.ade) << "," << cell(r.ade_w) << "\n";
  write_text_file(path, os.str());
}

int run_gen_data(const std::string& spec_arg, const std::string& out,
                 std::optional<std::uint64_t> seed) {
  SyntheticSpec spec;
  if (spec_arg == "default") {
    spec = SyntheticSpec::default_toy(seed.value_or(0));
  } else {
    spec = synthetic_from_json(nlohmann::json::parse(read_text_file(spec_arg)));
  }
  if (seed) spec.seed = *seed;
  Dataset d = generate_synthetic(spec);
  save_dataset(d, out);
  std::cout << "wrote " << d.size() << " motions (K=" << d.K << ", A=" << d.A
            << ") to " << out << "\n";
  return 0;
}

int run_split(const std::string& data, const std::string& out_prefix,
              std::uint64_t seed, const std::string& config_path) {
  double fraction = 0.2;
  if (!config_path.empty()) fraction = config_from_file(config_path).test_fraction;
  Dataset d = load_dataset(data);
  auto [train, test] = split_dataset(d, fraction, seed);
  save_dataset(train, out_prefix + ".train.jsonl");
  save_dataset(test, out_prefix + ".test.jsonl");
  std::cout << "split " << d.size() << " -> " << train.size() << " train / "
            << test.size() << " test\n";
  return 0;
}

int run_train(const std::string& config_path, std::optional<std::uint64_t> seed,
              const std::string& out_override, const std::string& data_override) {
  RunConfig cfg = config_from_file(config_path);
  if (seed) cfg.seed = *seed;
  if (!out_override.empty()) cfg.out = out_override;
  if (!data_override.empty()) cfg.data_train = data_override;
  if (cfg.out.empty()) throw std::runtime_error("train: no output directory configured");

  Dataset train_data = training_data_for(cfg);
  TrainResult result = train(cfg, train_data, cfg.out);

  nlohmann::ordered_json log = nlohmann::ordered_json::array();
  for (const TrainLogRow& row : result.log) {
    nlohmann::ordered_json rj;
    rj["epoch"] = row.epoch;
    rj["rec"] = row.rec;
    rj["smooth"] = row.smooth;
    rj["kl"] = row.kl;
    rj["total"] = row.total;
    log.push_back(std::move(rj));
  }
  write_text_file(cfg.out + "/trainlog.json", log.dump());

  if (!result.log.empty())
    std::cout << "trained " << result.log.size() << " epochs, final loss "
              << result.log.back().total << " (k=" << result.k << ")\n";
  else
    std::cout << "trained 0 epochs (checkpoint is the seeded initialization)\n";
  std::cout << "checkpoint: " << cfg.out << "/checkpoint.json\n";
  return 0;
}

int run_train_classifier(const std::string& config_path, const std::string& data,
                         const std::string& out, std::optional<std::uint64_t> seed) {
  RunConfig cfg = config_from_file(config_path);
  if (seed) cfg.seed = *seed;
  Dataset train = data.empty() ? training_data_for(cfg) : load_dataset(data);

  ClassifierConfig cc;
  cc.K = train.K;
  cc.A = train.A;
  cc.hidden = cfg.classifier.hidden;
  cc.mlp = cfg.classifier.mlp;
  cc.lr = cfg.classifier.lr;
  cc.epochs = cfg.classifier.epochs;
  cc.batch = cfg.classifier.batch;
  ClassifierTrainResult r = train_classifier(train, cc, derive_seed(cfg.seed, {0xc1f}));

  nlohmann::ordered_json extra;
  extra["train_accuracy"] = r.train_accuracy;
  save_checkpoint(out, classifier_config_json(cc), r.model.params(), extra);
  std::cout << "classifier train accuracy " << r.train_accuracy << ", checkpoint "
            << out << "\n";
  return 0;
}

int run_predict(const std::string& ckpt_path, const std::string& data,
                const std::string& actions_arg, const std::string& out,
                std::uint64_t seed) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  CvaeModel model = model_from_checkpoint(ckpt);
  Dataset inputs = load_dataset(data);
  if (inputs.K != model.cfg.K)
    throw std::runtime_error("predict: input pose dimension does not match checkpoint");
  const std::vector<int> actions = parse_action_list(actions_arg, model.cfg.A);

  RunConfig rc = RunConfig::from_json(ckpt.config);
  StoppingConfig stop = rc.stopping();
  if (stop.T_max <= stop.Q) stop.T_max = model.cfg.T_max;

  Dataset outputs;
  outputs.K = model.cfg.K;
  outputs.A = model.cfg.A;
  outputs.fps = inputs.fps;
  for (const LabeledMotion& lm : inputs.samples) {
    Motion history = slice_history(lm.motion, std::min(model.cfg.N, lm.motion.frames()));
    Rng rng(derive_seed(seed, {0x9ced, fnv1a(lm.sample_id)}));
    std::vector<Motion> preds = predict_sequence(model, history, actions, stop, rng);
    for (size_t i = 0; i < preds.size(); ++i) {
      LabeledMotion out_lm;
      out_lm.motion = std::move(preds[i]);
      out_lm.action = actions[i];
      out_lm.sample_id = lm.sample_id + "_step" + std::to_string(i + 1);
      outputs.samples.push_back(std::move(out_lm));
    }
  }
  save_dataset(outputs, out);
  std::cout << "wrote " << outputs.size() << " predictions to " << out << "\n";
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& data,
             const std::string& report_path, const std::string& config_path,
             std::optional<std::uint64_t> seed, std::optional<int> steps) {
  Checkpoint ckpt = load_checkpoint(ckpt_path);
  CvaeModel model = model_from_checkpoint(ckpt);
  RunConfig cfg = config_path.empty() ? RunConfig::from_json(ckpt.config)
                                      : config_from_file(config_path);
  if (seed) cfg.seed = *seed;
  if (steps) cfg.steps = *steps;

  Dataset test = load_dataset(data);
  Dataset train = training_data_for(cfg);

  double clf_acc = 0.0;
  ClassifierModel clf = classifier_for(cfg, train, &clf_acc);

  MetricReport report = evaluate(model, clf, clf_acc, train, test, cfg);
  write_text_file(report_path, report_to_json(report, cfg).dump());
  if (!cfg.csv.empty()) write_csv(cfg.csv, report);

  std::cout << "acc " << report.acc << ", fid_tr " << report.fid_train << ", fid_te "
            << report.fid_test;
  if (report.div) std::cout << ", div " << *report.div;
  if (report.div_w) std::cout << ", div_w " << *report.div_w;
  if (report.ade) std::cout << ", ade " << *report.ade;
  std::cout << "\nreport: " << report_path << "\n";
  return 0;
}

}  // namespace

int cli_dispatch(int argc, const char* const* argv) {
  CLI::App app{"action-conditioned stochastic motion sequence prediction"};
  app.require_subcommand(1);

  std::string spec_arg = "default";
  std::string data, out, config_path, ckpt_path, report_path, actions_arg;
  std::optional<std::uint64_t> seed_opt;
  std::optional<int> steps_opt;

  auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { seed_opt = v; },
        "run seed (all randomness derives from it)");
  };

  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic motion corpus");
  gen->add_option("--spec", spec_arg, "'default' or a spec JSON path");
  gen->add_option("--out", out, "output JSONL path")->required();
  add_seed(gen);

  CLI::App* split = app.add_subcommand("split", "stratified train/test split");
  split->add_option("--data", data, "input JSONL path")->required();
  split->add_option("--out", out, "output prefix")->required();
  split->add_option("--config", config_path, "config JSON (test_fraction)");
  add_seed(split);

  CLI::App* train_cmd = app.add_subcommand("train", "train the sequence model");
  train_cmd->add_option("--config", config_path, "config JSON path")->required();
  train_cmd->add_option("--out", out, "output directory override");
  train_cmd->add_option("--data", data, "training JSONL override");
  add_seed(train_cmd);

  CLI::App* clf_cmd = app.add_subcommand("train-classifier",
                                         "train the action-recognition classifier");
  clf_cmd->add_option("--config", config_path, "config JSON path")->required();
  clf_cmd->add_option("--data", data, "training JSONL path");
  clf_cmd->add_option("--out", out, "classifier checkpoint path")->required();
  add_seed(clf_cmd);

  CLI::App* pred = app.add_subcommand("predict", "predict futures for an action list");
  pred->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  pred->add_option("--data", data, "histories JSONL")->required();
  pred->add_option("--actions", actions_arg, "comma-separated action indices")->required();
  pred->add_option("--out", out, "output JSONL path")->required();
  add_seed(pred);

  CLI::App* eval_cmd = app.add_subcommand("eval", "run the evaluation suite");
  eval_cmd->add_option("--ckpt", ckpt_path, "model checkpoint")->required();
  eval_cmd->add_option("--data", data, "test JSONL path")->required();
  eval_cmd->add_option("--report", report_path, "report JSON output path")->required();
  eval_cmd->add_option("--config", config_path, "config JSON path");
  eval_cmd->add_option_function<int>(
      "--steps", [&](const int& v) { steps_opt = v; },
      "recursive protocol steps");
  add_seed(eval_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return run_gen_data(spec_arg, out, seed_opt);
    if (split->parsed()) return run_split(data, out, seed_opt.value_or(0), config_path);
    if (train_cmd->parsed()) return run_train(config_path, seed_opt, out, data);
    if (clf_cmd->parsed()) return run_train_classifier(config_path, data, out, seed_opt);
    if (pred->parsed())
      return run_predict(ckpt_path, data, actions_arg, out, seed_opt.value_or(0));
    if (eval_cmd->parsed())
      return run_eval(ckpt_path, data, report_path, config_path, seed_opt, steps_opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace mopred
