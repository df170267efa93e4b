#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mopred/dataset.hpp"
#include "mopred/nn.hpp"
#include "mopred/tensor.hpp"

namespace mopred {

// Action-recognition network: one GRU layer over the pose sequence, then a
// 3-layer MLP (ReLU between layers). The penultimate activation is the
// perception feature used for distribution metrics.
struct ClassifierConfig {
  int K = 0;
  int A = 0;
  int hidden = 24;
  std::vector<int> mlp = {32, 24};  // trunk widths; the head maps to A
  double lr = 0.002;
  int epochs = 500;
  int batch = 16;
};

struct ClassifierModel {
  ClassifierConfig cfg;
  GruParams gru;
  MlpParams trunk;
  LinearParams head;

  static ClassifierModel init(const ClassifierConfig& cfg, std::uint64_t seed);
  static ClassifierModel from_params(const ClassifierConfig& cfg, const ParamMap& p);
  ParamMap params() const;

  int feature_dim() const { return cfg.mlp.back(); }
  Tensor logits(const Motion& m) const;
  std::vector<double> features(const Motion& m) const;
  int predict_label(const Motion& m) const;
};

struct ClassifierTrainResult {
  ClassifierModel model;
  double train_accuracy = 0.0;
};

// Softmax cross-entropy training with ADAM; deterministic in seed.
ClassifierTrainResult train_classifier(const Dataset& train,
                                       const ClassifierConfig& cfg,
                                       std::uint64_t seed);

double classify_accuracy(std::span<const Motion> motions, std::span<const int> labels,
                         const ClassifierModel& clf);

// Gaussian summary of a feature set: sample mean and unbiased covariance,
// ridged with 1e-6 I when the sample count does not exceed the dimension.
struct FeatureStats {
  int F = 0;
  int count = 0;
  std::vector<double> mu;     // F
  std::vector<double> sigma;  // F x F row-major, symmetric
};

FeatureStats feature_stats(const std::vector<std::vector<double>>& features);

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvectors, when
// requested, are returned as columns of a row-major n x n matrix.
std::vector<double> jacobi_eigen_symmetric(std::vector<double> a, int n,
                                           std::vector<double>* eigvecs = nullptr);

// ||mu_a - mu_b||^2 + Tr(Sa + Sb - 2 (Sa Sb)^{1/2}), with the trace term
// computed from the symmetric form Sa^{1/2} Sb Sa^{1/2}. Eigenvalues below
// -1e-10 * lambda_max are an error; small negatives clamp to zero.
double fid(const FeatureStats& a, const FeatureStats& b);

// Dynamic time warping with steps {(1,0),(0,1),(1,1)} and per-cell Euclidean
// pose distance; ties prefer the diagonal. Aligned motions are the
// path-expanded frame sequences.
struct AlignedPair {
  std::vector<std::pair<int, int>> path;  // 0-based, (0,0) .. (Ta-1, Tb-1)
  double cost = 0.0;
  Motion a_aligned;
  Motion b_aligned;
};

AlignedPair dtw_align(const Motion& a, const Motion& b);

// Mean pairwise per-frame distance among S samples. diversity() expects all
// samples at the full rollout length; diversity_dtw() aligns each pair first.
double diversity(std::span<const Motion> samples);
double diversity_dtw(std::span<const Motion> samples);

// Minimum over samples of the mean per-frame distance to the ground truth.
// Samples shorter than the ground truth are padded with their final pose.
double ade(std::span<const Motion> samples, const Motion& gt);
double ade_dtw(std::span<const Motion> samples, const Motion& gt);

struct ActionMetrics {
  int action = 0;
  double acc = 0.0;
  std::optional<double> div;
  std::optional<double> div_w;
  std::optional<double> ade;
  std::optional<double> ade_w;
  double mean_length = 0.0;
  double gt_mean_length = 0.0;
  int conditions = 0;
};

struct StepMetrics {
  int step = 0;
  double acc = 0.0;
  double fid_train = 0.0;
  double fid_test = 0.0;
  std::optional<double> div;
  std::optional<double> div_w;
};

// One evaluated condition at one prediction step, for CSV export.
struct ConditionRow {
  std::string sample_id;
  int action = 0;
  int step = 0;
  double acc = 0.0;
  double mean_length = 0.0;
  std::optional<double> div;
  std::optional<double> div_w;
  std::optional<double> ade;
  std::optional<double> ade_w;
};

struct MetricReport {
  double acc = 0.0;
  double fid_train = 0.0;
  double fid_test = 0.0;
  std::optional<double> div;
  std::optional<double> div_w;
  std::optional<double> ade;
  std::optional<double> ade_w;
  std::vector<ActionMetrics> per_action;
  std::vector<StepMetrics> steps;
  std::vector<ConditionRow> rows;
  double classifier_train_acc = 0.0;
  double pred_transition_max_step = 0.0;
  double gt_max_adjacent_step = 0.0;
  int test_samples = 0;
  int sample_count = 0;  // S
};

}  // namespace mopred
