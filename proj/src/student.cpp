#include "pairdistill/student.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "pairdistill/pairing.hpp"
#include "pairdistill/rng.hpp"
#include "pairdistill/simulator.hpp"

namespace pairdistill {

namespace {

constexpr double kProbFloor = 1e-12;

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

void check_dim(const StudentModel& model, std::span<const double> x) {
  if (static_cast<int>(x.size()) != model.d) {
    throw std::runtime_error("feature dimension " + std::to_string(x.size()) +
                             " does not match model d=" + std::to_string(model.d));
  }
}

}  // namespace

std::size_t StudentModel::param_count(Arch arch, int d, int h) {
  if (d < 1) throw std::runtime_error("model needs d >= 1");
  if (arch == Arch::linear) return static_cast<std::size_t>(d) + 1;
  if (h < 1) throw std::runtime_error("mlp1 needs h >= 1");
  return static_cast<std::size_t>(h) * d + 2 * static_cast<std::size_t>(h) + 1;
}

StudentModel StudentModel::zeros(Arch arch, int d, int h) {
  StudentModel m;
  m.arch = arch;
  m.d = d;
  m.h = arch == Arch::mlp1 ? h : 0;
  m.theta.assign(param_count(arch, d, h), 0.0);
  return m;
}

StudentModel StudentModel::random_init(Arch arch, int d, int h,
                                       std::uint64_t seed, double scale) {
  StudentModel m = zeros(arch, d, h);
  Rng rng(seed);
  for (double& t : m.theta) t = rng.normal() * scale;
  return m;
}

double predict_logit(const StudentModel& model, std::span<const double> x) {
  check_dim(model, x);
  const double* th = model.theta.data();
  if (model.arch == Arch::linear) {
    double acc = th[model.d];
    for (int j = 0; j < model.d; ++j) acc += th[j] * x[static_cast<std::size_t>(j)];
    return acc;
  }
  const int d = model.d, h = model.h;
  const double* W = th;
  const double* b = th + static_cast<std::size_t>(h) * d;
  const double* v = b + h;
  double acc = v[h];  // c sits right after v
  for (int m = 0; m < h; ++m) {
    double z = b[m];
    const double* row = W + static_cast<std::size_t>(m) * d;
    for (int j = 0; j < d; ++j) z += row[j] * x[static_cast<std::size_t>(j)];
    acc += v[m] * std::tanh(z);
  }
  return acc;
}

void accum_logit_grad(const StudentModel& model, std::span<const double> x,
                      double scale, double* grad) {
  check_dim(model, x);
  const double* th = model.theta.data();
  if (model.arch == Arch::linear) {
    for (int j = 0; j < model.d; ++j) grad[j] += scale * x[static_cast<std::size_t>(j)];
    grad[model.d] += scale;
    return;
  }
  const int d = model.d, h = model.h;
  const double* W = th;
  const double* b = th + static_cast<std::size_t>(h) * d;
  const double* v = b + h;
  double* gW = grad;
  double* gb = grad + static_cast<std::size_t>(h) * d;
  double* gv = gb + h;
  for (int m = 0; m < h; ++m) {
    double z = b[m];
    const double* row = W + static_cast<std::size_t>(m) * d;
    for (int j = 0; j < d; ++j) z += row[j] * x[static_cast<std::size_t>(j)];
    double hm = std::tanh(z);
    double back = scale * v[m] * (1.0 - hm * hm);
    double* grow = gW + static_cast<std::size_t>(m) * d;
    for (int j = 0; j < d; ++j) grow[j] += back * x[static_cast<std::size_t>(j)];
    gb[m] += back;
    gv[m] += scale * hm;
  }
  gv[h] += scale;  // c
}

double pointwise_loss(double logit, double target) {
  double p = stable_sigmoid(logit);
  double pc = std::clamp(p, kProbFloor, 1.0 - kProbFloor);
  return -(target * std::log(pc) + (1.0 - target) * std::log(1.0 - pc));
}

double pointwise_loss_dlogit(double logit, double target) {
  return stable_sigmoid(logit) - target;
}

double pairwise_loss(double df, double delta_s, double alpha) {
  return softplus(-(df - alpha * delta_s));
}

double pairwise_loss_dfa(double df, double delta_s, double alpha) {
  double q = stable_sigmoid(df - alpha * delta_s);
  return -(1.0 - q);
}

namespace {

// In-place fixed-order pairwise reduction over `rows` rows of `width`
// doubles: row 0 ends up holding the sum. The schedule does not depend on
// thread count, so parallel and serial runs agree bitwise.
void tree_reduce_rows(double* buf, std::size_t rows, std::size_t width,
                      bool parallel) {
  for (std::size_t stride = 1; stride < rows; stride *= 2) {
    const std::size_t step = 2 * stride;
    const long long n_groups = static_cast<long long>((rows + step - 1) / step);
#pragma omp parallel for schedule(static) if (parallel)
    for (long long g = 0; g < n_groups; ++g) {
      std::size_t base = static_cast<std::size_t>(g) * step;
      std::size_t other = base + stride;
      if (other < rows) {
        double* dst = buf + base * width;
        const double* src = buf + other * width;
        for (std::size_t c = 0; c < width; ++c) dst[c] += src[c];
      }
    }
  }
}

// item_fn(model, item_index, grad_row) -> loss; grad_row is zeroed beforehand.
template <typename ItemFn>
TrainResult train_impl(const StudentModel& init, std::size_t n,
                       const TrainConfig& cfg, bool parallel, ItemFn&& item_fn) {
  if (n == 0) throw std::runtime_error("empty training set");
  if (cfg.batch_size < 1) throw std::runtime_error("batch_size must be >= 1");
  if (cfg.epochs < 0) throw std::runtime_error("epochs must be >= 0");
  if (!(cfg.learning_rate > 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw std::runtime_error("learning_rate must be positive");
  }
  if (cfg.l2 < 0.0) throw std::runtime_error("l2 must be >= 0");

  StudentModel model = init;
  const std::size_t P = model.theta.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(cfg.seed, stream::train, 0));
  std::vector<double> grad_rows;
  std::vector<double> loss_rows;

  TrainResult result;
  result.epoch_loss.reserve(static_cast<std::size_t>(cfg.epochs));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_sum = 0.0;
    int batch = 0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size), ++batch) {
      const std::size_t bn = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n - start);
      grad_rows.assign(bn * P, 0.0);
      loss_rows.assign(bn, 0.0);
      const std::size_t* idx = order.data() + start;
#pragma omp parallel for schedule(static) if (parallel)
      for (long long i = 0; i < static_cast<long long>(bn); ++i) {
        loss_rows[static_cast<std::size_t>(i)] =
            item_fn(model, idx[i], grad_rows.data() + static_cast<std::size_t>(i) * P);
      }
      tree_reduce_rows(grad_rows.data(), bn, P, parallel);
      tree_reduce_rows(loss_rows.data(), bn, 1, parallel);
      const double batch_loss = loss_rows[0];
      if (!std::isfinite(batch_loss)) {
        throw std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) +
                                 " batch " + std::to_string(batch));
      }
      const double inv = 1.0 / static_cast<double>(bn);
      for (std::size_t c = 0; c < P; ++c) {
        model.theta[c] -= cfg.learning_rate * (grad_rows[c] * inv + cfg.l2 * model.theta[c]);
      }
      epoch_sum += batch_loss;
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(n));
  }
  result.model = std::move(model);
  return result;
}

double pointwise_item(const StudentModel& model, const PointwiseData& data,
                      std::size_t i, double* grad) {
  auto x = data.row(i);
  const double t = data.target[i];
  const double logit = predict_logit(model, x);
  accum_logit_grad(model, x, pointwise_loss_dlogit(logit, t), grad);
  return pointwise_loss(logit, t);
}

double pairwise_item(const StudentModel& model, const PairwiseData& data,
                     double alpha, std::size_t i, double* grad) {
  auto xa = data.row_a(i);
  auto xb = data.row_b(i);
  const double fa = predict_logit(model, xa);
  const double fb = predict_logit(model, xb);
  const double ds = data.delta_s[i];
  const double dfa = pairwise_loss_dfa(fa - fb, ds, alpha);
  accum_logit_grad(model, xa, dfa, grad);
  accum_logit_grad(model, xb, -dfa, grad);
  return pairwise_loss(fa - fb, ds, alpha);
}

void check_data_dim(int data_d, const StudentModel& init) {
  if (data_d != init.d) {
    throw std::runtime_error("training data d=" + std::to_string(data_d) +
                             " does not match model d=" + std::to_string(init.d));
  }
}

}  // namespace

TrainResult train_pointwise(const StudentModel& init, const PointwiseData& data,
                            const TrainConfig& cfg) {
  check_data_dim(data.d, init);
  return train_impl(init, data.size(), cfg, true,
                    [&data](const StudentModel& m, std::size_t i, double* g) {
                      return pointwise_item(m, data, i, g);
                    });
}

TrainResult train_pointwise_serial(const StudentModel& init,
                                   const PointwiseData& data,
                                   const TrainConfig& cfg) {
  check_data_dim(data.d, init);
  return train_impl(init, data.size(), cfg, false,
                    [&data](const StudentModel& m, std::size_t i, double* g) {
                      return pointwise_item(m, data, i, g);
                    });
}

namespace {

void check_alpha(double alpha) {
  if (alpha < 0.0 || alpha > 1.0) {
    throw std::runtime_error("alpha must be in [0, 1], got " + std::to_string(alpha));
  }
}

}  // namespace

TrainResult train_pairwise(const StudentModel& init, const PairwiseData& data,
                           const TrainConfig& cfg) {
  check_data_dim(data.d, init);
  check_alpha(cfg.alpha);
  const double alpha = cfg.alpha;
  return train_impl(init, data.size(), cfg, true,
                    [&data, alpha](const StudentModel& m, std::size_t i, double* g) {
                      return pairwise_item(m, data, alpha, i, g);
                    });
}

TrainResult train_pairwise_serial(const StudentModel& init,
                                  const PairwiseData& data,
                                  const TrainConfig& cfg) {
  check_data_dim(data.d, init);
  check_alpha(cfg.alpha);
  const double alpha = cfg.alpha;
  return train_impl(init, data.size(), cfg, false,
                    [&data, alpha](const StudentModel& m, std::size_t i, double* g) {
                      return pairwise_item(m, data, alpha, i, g);
                    });
}

double mean_pointwise_loss(const StudentModel& model, const PointwiseData& data) {
  if (data.size() == 0) throw std::runtime_error("empty data");
  double sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    sum += pointwise_loss(predict_logit(model, data.row(i)), data.target[i]);
  }
  return sum / static_cast<double>(data.size());
}

double accuracy(const StudentModel& model, const PointwiseData& data) {
  if (data.size() == 0) throw std::runtime_error("empty data");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const bool pred = predict_logit(model, data.row(i)) > 0.0;
    const bool truth = data.target[i] >= 0.5;
    if (pred == truth) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void save_model(const StudentModel& model, const std::string& path) {
  nlohmann::json j;
  j["arch"] = model.arch == Arch::linear ? "linear" : "mlp1";
  j["d"] = model.d;
  if (model.arch == Arch::mlp1) j["h"] = model.h;
  j["theta"] = model.theta;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << "\n";
}

StudentModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  StudentModel m;
  const std::string arch = j.at("arch").get<std::string>();
  if (arch == "linear") {
    m.arch = Arch::linear;
  } else if (arch == "mlp1") {
    m.arch = Arch::mlp1;
  } else {
    throw std::runtime_error(path + ": unknown arch '" + arch + "'");
  }
  m.d = j.at("d").get<int>();
  m.h = m.arch == Arch::mlp1 ? j.at("h").get<int>() : 0;
  m.theta = j.at("theta").get<std::vector<double>>();
  if (m.theta.size() != StudentModel::param_count(m.arch, m.d, m.h)) {
    throw std::runtime_error(path + ": theta has " + std::to_string(m.theta.size()) +
                             " entries, expected " +
                             std::to_string(StudentModel::param_count(m.arch, m.d, m.h)));
  }
  return m;
}

void save_loss_trace(const std::vector<double>& epoch_loss, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "epoch,mean_loss\n";
  char buf[64];
  for (std::size_t e = 0; e < epoch_loss.size(); ++e) {
    std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", e, epoch_loss[e]);
    out << buf;
  }
}

namespace {

Corpus subcorpus_of(const Corpus& corpus, std::vector<int> indices) {
  std::sort(indices.begin(), indices.end());
  Corpus sub;
  sub.d = corpus.d;
  sub.C = corpus.C;
  sub.dialogues.reserve(indices.size());
  for (int i : indices) sub.dialogues.push_back(corpus.dialogues[static_cast<std::size_t>(i)]);
  return sub;
}

PointwiseData gold_rows(const SegmentTable& table, const std::vector<int>& dlg_indices) {
  PointwiseData data;
  data.d = table.d;
  for (int di : dlg_indices) {
    std::size_t lo = table.dialogue_offset[static_cast<std::size_t>(di)];
    std::size_t hi = static_cast<std::size_t>(di) + 1 < table.dialogue_offset.size()
                         ? table.dialogue_offset[static_cast<std::size_t>(di) + 1]
                         : table.size();
    for (std::size_t r = lo; r < hi; ++r) {
      if (table.gold[r] < 0) continue;
      auto row = table.row(r);
      data.x.insert(data.x.end(), row.begin(), row.end());
      data.target.push_back(static_cast<double>(table.gold[r]));
    }
  }
  return data;
}

PointwiseData score_rows(const SegmentTable& table, const std::vector<int>& dlg_indices) {
  PointwiseData data;
  data.d = table.d;
  for (int di : dlg_indices) {
    std::size_t lo = table.dialogue_offset[static_cast<std::size_t>(di)];
    std::size_t hi = static_cast<std::size_t>(di) + 1 < table.dialogue_offset.size()
                         ? table.dialogue_offset[static_cast<std::size_t>(di) + 1]
                         : table.size();
    for (std::size_t r = lo; r < hi; ++r) {
      if (std::isnan(table.score[r])) {
        throw std::runtime_error("segment without a score in pretraining pool");
      }
      auto row = table.row(r);
      data.x.insert(data.x.end(), row.begin(), row.end());
      data.target.push_back(table.score[r]);
    }
  }
  return data;
}

}  // namespace

PipelineResult run_pipeline(const Corpus& corpus,
                            const std::vector<ScoreVector>& scores,
                            double gold_fraction, Arm arm,
                            const PipelineConfig& cfg) {
  if (gold_fraction <= 0.0 || gold_fraction > 1.0) {
    throw std::runtime_error("gold_fraction must be in (0, 1]");
  }
  if (cfg.holdout_fraction <= 0.0 || cfg.holdout_fraction >= 1.0) {
    throw std::runtime_error("holdout_fraction must be in (0, 1)");
  }
  const int D = static_cast<int>(corpus.dialogues.size());
  if (D < 2) throw std::runtime_error("pipeline needs at least 2 dialogues");

  SegmentTable table = build_segment_table(corpus, scores, 0, cfg.window, cfg.gamma);

  std::vector<int> order(static_cast<std::size_t>(D));
  std::iota(order.begin(), order.end(), 0);
  Rng split_rng(derive_seed(cfg.seed, stream::split, 0));
  split_rng.shuffle(order);

  int n_hold = static_cast<int>(std::lround(cfg.holdout_fraction * D));
  n_hold = std::clamp(n_hold, 1, D - 1);
  std::vector<int> holdout(order.begin(), order.begin() + n_hold);
  std::vector<int> pool(order.begin() + n_hold, order.end());

  int n_gold = static_cast<int>(std::lround(gold_fraction * static_cast<double>(pool.size())));
  n_gold = std::clamp(n_gold, 1, static_cast<int>(pool.size()));
  std::vector<int> gold_dialogues(pool.begin(), pool.begin() + n_gold);

  std::sort(holdout.begin(), holdout.end());
  std::sort(pool.begin(), pool.end());
  std::sort(gold_dialogues.begin(), gold_dialogues.end());

  PointwiseData gold_data = gold_rows(table, gold_dialogues);
  if (gold_data.size() == 0) {
    throw std::runtime_error("gold subsample contains no labeled utterances");
  }
  PointwiseData eval_data = gold_rows(table, holdout);
  if (eval_data.size() == 0) {
    throw std::runtime_error("holdout contains no labeled utterances");
  }

  StudentModel init = StudentModel::random_init(
      cfg.arch, table.d, cfg.hidden,
      derive_seed(cfg.seed, stream::train, fnv1a64("init")), 0.1);

  TrainConfig pre_cfg = cfg.pretrain;
  pre_cfg.seed = derive_seed(cfg.seed, stream::train, fnv1a64("pretrain"));
  TrainConfig fin_cfg = cfg.finetune;
  fin_cfg.seed = derive_seed(cfg.seed, stream::train, fnv1a64("finetune"));

  StudentModel model = init;
  if (arm == Arm::pointwise_pretrain) {
    PointwiseData pretrain_data = score_rows(table, pool);
    model = train_pointwise(model, pretrain_data, pre_cfg).model;
  } else if (arm == Arm::pairwise_pretrain) {
    Corpus sub = subcorpus_of(corpus, pool);
    auto pairs = sample_pairs(sub, scores, PairMode::intra, cfg.pairs_per_dialogue,
                              cfg.seed, cfg.threshold);
    if (pairs.empty()) throw std::runtime_error("no preference pairs sampled");
    SegmentTable sub_table = build_segment_table(sub, scores, 0, cfg.window, cfg.gamma);
    PairwiseData pair_data = build_pairwise_data(sub, sub_table, pairs);
    model = train_pairwise(model, pair_data, pre_cfg).model;
  }
  model = train_pointwise(model, gold_data, fin_cfg).model;

  PipelineResult result;
  result.holdout_accuracy = accuracy(model, eval_data);
  result.n_gold_dialogues = n_gold;
  result.n_holdout_segments = static_cast<int>(eval_data.size());
  result.model = std::move(model);
  return result;
}

namespace {

struct FdAccum {
  FdCheckResult result;

  void feed(int instance, const std::vector<double>& analytic,
            const std::vector<double>& fd) {
    double diff2 = 0.0, a2 = 0.0, f2 = 0.0;
    std::size_t argmax = 0;
    double maxabs = -1.0;
    for (std::size_t c = 0; c < analytic.size(); ++c) {
      const double dd = analytic[c] - fd[c];
      diff2 += dd * dd;
      a2 += analytic[c] * analytic[c];
      f2 += fd[c] * fd[c];
      if (std::abs(dd) > maxabs) {
        maxabs = std::abs(dd);
        argmax = c;
      }
    }
    const double denom = std::max({std::sqrt(a2), std::sqrt(f2), 1e-12});
    const double rel = std::sqrt(diff2) / denom;
    if (rel > result.max_rel_err || result.worst_instance < 0) {
      result.max_rel_err = rel;
      result.worst_instance = instance;
      result.worst_component = static_cast<int>(argmax);
      result.worst_component_err = maxabs;
    }
  }
};

StudentModel random_fd_model(Arch arch, int d, int h, Rng& rng) {
  StudentModel m = StudentModel::zeros(arch, d, h);
  for (double& t : m.theta) t = rng.normal() * 0.7;
  return m;
}

template <typename LossFn>
void central_differences(StudentModel& model, double step, LossFn&& loss,
                         std::vector<double>& fd) {
  const std::size_t P = model.theta.size();
  fd.assign(P, 0.0);
  for (std::size_t c = 0; c < P; ++c) {
    const double saved = model.theta[c];
    model.theta[c] = saved + step;
    const double up = loss(model);
    model.theta[c] = saved - step;
    const double down = loss(model);
    model.theta[c] = saved;
    fd[c] = (up - down) / (2.0 * step);
  }
}

}  // namespace

FdCheckResult fd_check_pointwise(Arch arch, int d, int h, int n_instances,
                                 std::uint64_t seed, double step,
                                 bool flip_sign) {
  if (n_instances < 1) throw std::runtime_error("fd check needs n_instances >= 1");
  Rng rng(derive_seed(seed, stream::gradcheck, fnv1a64("fd_pointwise")));
  FdAccum acc;
  std::vector<double> x(static_cast<std::size_t>(d));
  std::vector<double> analytic, fd;
  for (int t = 0; t < n_instances; ++t) {
    StudentModel model = random_fd_model(arch, d, h, rng);
    for (double& xj : x) xj = rng.normal();
    const double target = rng.uniform();
    analytic.assign(model.theta.size(), 0.0);
    const double logit = predict_logit(model, x);
    accum_logit_grad(model, x, pointwise_loss_dlogit(logit, target), analytic.data());
    if (flip_sign) {
      for (double& g : analytic) g = -g;
    }
    central_differences(model, step,
                        [&x, target](const StudentModel& m) {
                          return pointwise_loss(predict_logit(m, x), target);
                        },
                        fd);
    acc.feed(t, analytic, fd);
  }
  return acc.result;
}

FdCheckResult fd_check_pairwise(Arch arch, int d, int h, int n_instances,
                                std::uint64_t seed, double step,
                                bool flip_sign) {
  if (n_instances < 1) throw std::runtime_error("fd check needs n_instances >= 1");
  Rng rng(derive_seed(seed, stream::gradcheck, fnv1a64("fd_pairwise")));
  FdAccum acc;
  std::vector<double> xa(static_cast<std::size_t>(d));
  std::vector<double> xb(static_cast<std::size_t>(d));
  std::vector<double> analytic, fd;
  for (int t = 0; t < n_instances; ++t) {
    StudentModel model = random_fd_model(arch, d, h, rng);
    for (double& xj : xa) xj = rng.normal();
    for (double& xj : xb) xj = rng.normal();
    const double ds = 1.0 - rng.uniform();  // (0, 1]
    const double alpha = rng.uniform();
    analytic.assign(model.theta.size(), 0.0);
    const double fa = predict_logit(model, xa);
    const double fb = predict_logit(model, xb);
    const double dfa = pairwise_loss_dfa(fa - fb, ds, alpha);
    accum_logit_grad(model, xa, dfa, analytic.data());
    accum_logit_grad(model, xb, -dfa, analytic.data());
    if (flip_sign) {
      for (double& g : analytic) g = -g;
    }
    central_differences(model, step,
                        [&xa, &xb, ds, alpha](const StudentModel& m) {
                          return pairwise_loss(
                              predict_logit(m, xa) - predict_logit(m, xb), ds, alpha);
                        },
                        fd);
    acc.feed(t, analytic, fd);
  }
  return acc.result;
}

UnbiasedCheckReport unbiased_gradient_check(int d, int n_draws,
                                            std::uint64_t seed,
                                            double miscalibration) {
  if (n_draws < 1000) {
    throw std::runtime_error("unbiased gradient check needs at least 1000 draws, got " +
                             std::to_string(n_draws));
  }
  if (d < 1) throw std::runtime_error("gradient check needs d >= 1");

  Rng rng(derive_seed(seed, stream::gradcheck, 0));
  const std::size_t P = static_cast<std::size_t>(d) + 1;
  std::vector<double> theta(P);
  for (double& t : theta) t = rng.normal() * 0.5;

  std::vector<double> mean_s(P, 0.0), m2_s(P, 0.0);
  std::vector<double> mean_g(P, 0.0), m2_g(P, 0.0);
  std::vector<double> x(static_cast<std::size_t>(d));
  for (int t = 0; t < n_draws; ++t) {
    for (double& xj : x) xj = rng.normal();
    const double p = rng.uniform();
    const double yhat = std::clamp(p + miscalibration, 0.0, 1.0);
    const double y = rng.bernoulli(p) ? 1.0 : 0.0;
    double z = theta[P - 1];
    for (int j = 0; j < d; ++j) z += theta[static_cast<std::size_t>(j)] * x[static_cast<std::size_t>(j)];
    const double f = stable_sigmoid(z);
    const double n_inv = 1.0 / static_cast<double>(t + 1);
    for (std::size_t c = 0; c < P; ++c) {
      const double xc = c < P - 1 ? x[c] : 1.0;
      const double gs = (f - yhat) * xc;
      const double gg = (f - y) * xc;
      double delta = gs - mean_s[c];
      mean_s[c] += delta * n_inv;
      m2_s[c] += delta * (gs - mean_s[c]);
      delta = gg - mean_g[c];
      mean_g[c] += delta * n_inv;
      m2_g[c] += delta * (gg - mean_g[c]);
    }
  }

  UnbiasedCheckReport report;
  report.n_draws = n_draws;
  report.z.resize(P);
  const double n = static_cast<double>(n_draws);
  for (std::size_t c = 0; c < P; ++c) {
    const double var_s = m2_s[c] / (n - 1.0);
    const double var_g = m2_g[c] / (n - 1.0);
    const double se = std::sqrt(var_s / n + var_g / n);
    report.z[c] = se > 0.0 ? (mean_s[c] - mean_g[c]) / se : 0.0;
    if (std::abs(report.z[c]) >= report.worst_abs_z) {
      report.worst_abs_z = std::abs(report.z[c]);
      report.worst_component = static_cast<int>(c);
    }
  }
  return report;
}

int OneVsRestModel::predict(std::span<const double> x) const {
  if (models.empty()) throw std::runtime_error("one-vs-rest model has no classes");
  int best = 0;
  double best_logit = predict_logit(models[0], x);
  for (std::size_t c = 1; c < models.size(); ++c) {
    const double f = predict_logit(models[c], x);
    if (f > best_logit) {
      best_logit = f;
      best = static_cast<int>(c);
    }
  }
  return best;
}

OneVsRestModel train_one_vs_rest(const Corpus& corpus,
                                 const std::vector<ScoreVector>& scores,
                                 const PipelineConfig& cfg) {
  if (corpus.C < 2) {
    throw std::runtime_error("one-vs-rest needs C >= 2 classes, corpus has " +
                             std::to_string(corpus.C));
  }
  OneVsRestModel ovr;
  ovr.models.reserve(static_cast<std::size_t>(corpus.C));
  std::vector<int> all(corpus.dialogues.size());
  std::iota(all.begin(), all.end(), 0);
  for (int c = 0; c < corpus.C; ++c) {
    SegmentTable table = build_segment_table(corpus, scores, c, cfg.window, cfg.gamma);
    PointwiseData data;
    try {
      data = score_rows(table, all);
    } catch (const std::exception&) {
      throw std::runtime_error("missing scores for class " + std::to_string(c));
    }
    StudentModel init = StudentModel::random_init(
        cfg.arch, table.d, cfg.hidden,
        derive_seed(cfg.seed, stream::train, fnv1a64("ovr") ^ static_cast<std::uint64_t>(c)),
        0.1);
    TrainConfig tc = cfg.pretrain;
    tc.seed = derive_seed(cfg.seed, stream::train,
                          fnv1a64("ovr_train") ^ static_cast<std::uint64_t>(c));
    ovr.models.push_back(train_pointwise(init, data, tc).model);
  }
  return ovr;
}

}  // namespace pairdistill
