#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pairdistill/corpus.hpp"
#include "pairdistill/dataset.hpp"
#include "pairdistill/scores.hpp"

namespace pairdistill {

enum class Arch { linear, mlp1 };

// Small per-utterance classifier over pooled segment features.
//   linear: theta = [w (d), b]
//   mlp1:   theta = [W (h x d, row-major), b (h), v (h), c], tanh hidden layer
struct StudentModel {
  Arch arch = Arch::linear;
  int d = 0;
  int h = 0;  // hidden width, 0 for linear
  std::vector<double> theta;

  static std::size_t param_count(Arch arch, int d, int h);
  // Zero-initialized parameters.
  static StudentModel zeros(Arch arch, int d, int h = 0);
  // Small random init (normal, scaled); required for mlp1 to break symmetry.
  static StudentModel random_init(Arch arch, int d, int h, std::uint64_t seed,
                                  double scale = 0.1);
};

double predict_logit(const StudentModel& model, std::span<const double> x);
// Adds scale * d(logit)/d(theta) into grad (length theta.size()).
void accum_logit_grad(const StudentModel& model, std::span<const double> x,
                      double scale, double* grad);

// Cross-entropy of sigmoid(logit) against a soft target in [0,1]. The
// probability is clamped away from {0,1} inside the logs only; the gradient
// factor sigmoid(logit) - target is exact.
double pointwise_loss(double logit, double target);
double pointwise_loss_dlogit(double logit, double target);

// Ranking loss for a pair with logit gap df = f_a - f_b and score gap
// delta_s > 0: -log sigmoid(df - alpha * delta_s). Invariant under a common
// shift of both logits.
double pairwise_loss(double df, double delta_s, double alpha);
// d(loss)/d(f_a); d/d(f_b) is the negation.
double pairwise_loss_dfa(double df, double delta_s, double alpha);

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 200;
  int batch_size = 32;
  double alpha = 0.5;  // margin scale in [0,1], pairwise loss only
  double l2 = 0.0;
  std::uint64_t seed = 42;
};

struct TrainResult {
  StudentModel model;
  std::vector<double> epoch_loss;  // mean loss per epoch
};

// Mini-batch gradient descent with per-epoch seeded shuffling. Batch
// gradients are summed with a fixed-order pairwise tree reduction, so the
// parallel and serial variants produce bit-identical parameters.
TrainResult train_pointwise(const StudentModel& init, const PointwiseData& data,
                            const TrainConfig& cfg);
TrainResult train_pointwise_serial(const StudentModel& init,
                                   const PointwiseData& data,
                                   const TrainConfig& cfg);
TrainResult train_pairwise(const StudentModel& init, const PairwiseData& data,
                           const TrainConfig& cfg);
TrainResult train_pairwise_serial(const StudentModel& init,
                                  const PairwiseData& data,
                                  const TrainConfig& cfg);

double mean_pointwise_loss(const StudentModel& model, const PointwiseData& data);
// Fraction of rows where (logit > 0) matches the binary target.
double accuracy(const StudentModel& model, const PointwiseData& data);

void save_model(const StudentModel& model, const std::string& path);
StudentModel load_model(const std::string& path);
void save_loss_trace(const std::vector<double>& epoch_loss, const std::string& path);

enum class Arm { finetune_only, pointwise_pretrain, pairwise_pretrain };

struct PipelineConfig {
  Arch arch = Arch::linear;
  int hidden = 8;
  int window = 4;
  double gamma = 0.6;
  int pairs_per_dialogue = 6;
  double holdout_fraction = 0.3;
  double threshold = 0.5;  // concordance threshold for pair sampling
  TrainConfig pretrain;
  TrainConfig finetune;
  std::uint64_t seed = 42;
};

struct PipelineResult {
  double holdout_accuracy = 0.0;
  int n_gold_dialogues = 0;
  int n_holdout_segments = 0;
  StudentModel model;
};

// Distillation pipeline: split dialogues into train pool and holdout,
// subsample gold at dialogue granularity from the pool, optionally pretrain
// on ensemble scores (pointwise or pairwise), finetune on the gold subset,
// report holdout accuracy. The split, subsample and init are shared across
// arms for a given seed, so arm comparisons are paired.
PipelineResult run_pipeline(const Corpus& corpus,
                            const std::vector<ScoreVector>& scores,
                            double gold_fraction, Arm arm,
                            const PipelineConfig& cfg);

struct FdCheckResult {
  double max_rel_err = 0.0;  // worst per-instance relative gradient error
  int worst_instance = -1;
  int worst_component = -1;        // param index of largest abs deviation
  double worst_component_err = 0.0;  // abs deviation at that component
};

// Compares analytic gradients against central finite differences (step
// `step`) on n_instances random (theta, input) draws; the per-instance
// relative error is ||g - g_fd|| / max(||g||, ||g_fd||). flip_sign negates
// the analytic gradient first — a mutation hook proving the check can fail.
FdCheckResult fd_check_pointwise(Arch arch, int d, int h, int n_instances,
                                 std::uint64_t seed, double step = 1e-5,
                                 bool flip_sign = false);
FdCheckResult fd_check_pairwise(Arch arch, int d, int h, int n_instances,
                                std::uint64_t seed, double step = 1e-5,
                                bool flip_sign = false);

struct UnbiasedCheckReport {
  int n_draws = 0;
  std::vector<double> z;  // per-component z-score, soft-vs-gold mean gradient
  int worst_component = 0;
  double worst_abs_z = 0.0;
};

// Draws (x, p) with p ~ U(0,1), y ~ Bernoulli(p) and compares the mean
// pointwise gradient under the soft target clamp(p + miscalibration, 0, 1)
// against the mean gradient under y, at a fixed random linear parameter
// vector. With miscalibration = 0 the two means agree in expectation.
// Refuses to run below 1000 draws.
UnbiasedCheckReport unbiased_gradient_check(int d, int n_draws,
                                            std::uint64_t seed,
                                            double miscalibration = 0.0);

struct OneVsRestModel {
  std::vector<StudentModel> models;  // one per class
  // Argmax of per-class logits; ties resolve to the lowest class index.
  int predict(std::span<const double> x) const;
};

// Trains one binary student per class on that class's ensemble scores.
OneVsRestModel train_one_vs_rest(const Corpus& corpus,
                                 const std::vector<ScoreVector>& scores,
                                 const PipelineConfig& cfg);

}  // namespace pairdistill
