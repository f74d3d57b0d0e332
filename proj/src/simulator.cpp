#include "pairdistill/simulator.hpp"

#include <cmath>
#include <stdexcept>

#include "pairdistill/rng.hpp"

namespace pairdistill {

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamped_logit(double p) {
  if (p <= 0.0) return -30.0;
  if (p >= 1.0) return 30.0;
  const double z = std::log(p / (1.0 - p));
  if (z > 30.0) return 30.0;
  if (z < -30.0) return -30.0;
  return z;
}

std::vector<double> resolve_w_star(const WorldConfig& config) {
  if (!config.w_star.empty()) {
    if (static_cast<int>(config.w_star.size()) != config.d) {
      throw std::runtime_error("w_star length != d");
    }
    return config.w_star;
  }
  Rng gen(derive_seed(config.seed, stream::world, fnv1a64("w_star")));
  std::vector<double> w(config.d);
  double norm2 = 0.0;
  for (double& v : w) {
    v = gen.normal();
    norm2 += v * v;
  }
  const double norm = std::sqrt(norm2);
  if (norm > 0.0) {
    for (double& v : w) v *= config.w_star_norm / norm;
  }
  return w;
}

namespace {

void check_world_config(const WorldConfig& config) {
  if (config.d < 1) throw std::runtime_error("world config: d must be >= 1");
  if (config.n_dialogues < 1) throw std::runtime_error("empty world");
  if (config.min_utterances < 1 ||
      config.max_utterances < config.min_utterances) {
    throw std::runtime_error("world config: bad utterance range");
  }
  if (config.sigma_session < 0.0 || config.sigma_prompt < 0.0 ||
      config.sigma_draw < 0.0) {
    throw std::runtime_error("world config: sigmas must be >= 0");
  }
}

std::string dialogue_name(int idx) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "d%05d", idx);
  return buf;
}

Dialogue make_dialogue(int idx, const WorldConfig& config,
                       const std::vector<double>& w) {
  Dialogue dlg;
  dlg.id = dialogue_name(idx);
  Rng gen(derive_seed(config.seed, stream::world, fnv1a64(dlg.id)));
  const int span = config.max_utterances - config.min_utterances + 1;
  const int n = config.min_utterances +
                static_cast<int>(gen.below(static_cast<std::uint64_t>(span)));
  dlg.utterances.reserve(n);
  for (int i = 1; i <= n; ++i) {
    Utterance u;
    u.index = i;
    u.speaker = (i % 2 == 1) ? "customer" : "agent";
    std::vector<double> x(config.d);
    double dot = 0.0;
    for (int m = 0; m < config.d; ++m) {
      x[m] = gen.normal();
      dot += w[m] * x[m];
    }
    u.features = std::move(x);
    const double p = sigmoid(dot);
    u.gold = std::vector<int>{gen.bernoulli(p) ? 1 : 0};
    dlg.utterances.push_back(std::move(u));
  }
  return dlg;
}

// True positive-probabilities for one dialogue: model-based when features
// and w* are available, otherwise the hard gold label.
std::vector<double> true_probs(const Dialogue& dlg,
                               const std::vector<double>& w) {
  std::vector<double> p(dlg.utterances.size());
  for (std::size_t i = 0; i < dlg.utterances.size(); ++i) {
    const Utterance& u = dlg.utterances[i];
    if (!w.empty() && u.features) {
      double dot = 0.0;
      for (std::size_t m = 0; m < w.size(); ++m) dot += w[m] * (*u.features)[m];
      p[i] = sigmoid(dot);
    } else if (u.gold && !u.gold->empty()) {
      p[i] = static_cast<double>((*u.gold)[0]);
    } else {
      throw std::runtime_error("dialogue '" + dlg.id + "' utterance " +
                               std::to_string(u.index) +
                               ": neither features+w* nor gold available");
    }
  }
  return p;
}

LabelerDraws draw_dialogue(const Dialogue& dlg, int k,
                           const WorldConfig& config,
                           const std::vector<double>& w,
                           const std::vector<double>& member_bias) {
  LabelerDraws out;
  out.dialogue_id = dlg.id;
  out.n = dlg.n();
  out.k = k;
  out.s.assign(static_cast<std::size_t>(out.n) * k, 0);

  Rng gen(derive_seed(config.seed, stream::draws, fnv1a64(dlg.id)));
  out.session_bias = gen.normal(config.sigma_session);
  const std::vector<double> p = true_probs(dlg, w);
  for (int i = 0; i < out.n; ++i) {
    const double eta = clamped_logit(p[i]) + out.session_bias;
    for (int j = 0; j < k; ++j) {
      const double noise = gen.logistic(config.sigma_draw);
      out.s[static_cast<std::size_t>(i) * k + j] =
          (eta + member_bias[j] + noise > 0.0) ? 1 : 0;
    }
  }
  return out;
}

std::vector<double> member_biases(int k, const WorldConfig& config) {
  Rng gen(derive_seed(config.seed, stream::prompt));
  std::vector<double> c(k);
  for (double& v : c) v = gen.normal(config.sigma_prompt);
  return c;
}

std::vector<double> resolve_w_for_corpus(const Corpus& corpus,
                                         const WorldConfig& config) {
  if (corpus.d == 0) return {};
  if (config.d != corpus.d) {
    throw std::runtime_error("world config d=" + std::to_string(config.d) +
                             " does not match corpus d=" +
                             std::to_string(corpus.d));
  }
  return resolve_w_star(config);
}

}  // namespace

Corpus generate_world_serial(const WorldConfig& config) {
  check_world_config(config);
  const std::vector<double> w = resolve_w_star(config);
  Corpus corpus;
  corpus.d = config.d;
  corpus.C = 1;
  corpus.dialogues.resize(config.n_dialogues);
  for (int idx = 0; idx < config.n_dialogues; ++idx) {
    corpus.dialogues[idx] = make_dialogue(idx, config, w);
  }
  validate_corpus(corpus);
  return corpus;
}

Corpus generate_world(const WorldConfig& config) {
  check_world_config(config);
  const std::vector<double> w = resolve_w_star(config);
  Corpus corpus;
  corpus.d = config.d;
  corpus.C = 1;
  corpus.dialogues.resize(config.n_dialogues);
#pragma omp parallel for schedule(static)
  for (int idx = 0; idx < config.n_dialogues; ++idx) {
    corpus.dialogues[idx] = make_dialogue(idx, config, w);
  }
  validate_corpus(corpus);
  return corpus;
}

std::vector<LabelerDraws> simulate_draws_serial(const Corpus& corpus, int k,
                                                const WorldConfig& config) {
  if (k < 1) throw std::runtime_error("ensemble size k must be >= 1");
  const std::vector<double> w = resolve_w_for_corpus(corpus, config);
  const std::vector<double> c = member_biases(k, config);
  std::vector<LabelerDraws> out(corpus.dialogues.size());
  for (std::size_t idx = 0; idx < corpus.dialogues.size(); ++idx) {
    out[idx] = draw_dialogue(corpus.dialogues[idx], k, config, w, c);
  }
  return out;
}

std::vector<LabelerDraws> simulate_draws(const Corpus& corpus, int k,
                                         const WorldConfig& config) {
  if (k < 1) throw std::runtime_error("ensemble size k must be >= 1");
  const std::vector<double> w = resolve_w_for_corpus(corpus, config);
  const std::vector<double> c = member_biases(k, config);
  std::vector<LabelerDraws> out(corpus.dialogues.size());
  const std::int64_t count = static_cast<std::int64_t>(corpus.dialogues.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t idx = 0; idx < count; ++idx) {
    out[idx] = draw_dialogue(corpus.dialogues[idx], k, config, w, c);
  }
  return out;
}

}  // namespace pairdistill
