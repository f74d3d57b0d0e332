#pragma once

#include <cstdint>
#include <vector>

#include "pairdistill/corpus.hpp"

namespace pairdistill {

// Synthetic world: utterance features are standard normal, the gold label
// is Bernoulli(sigmoid(w*.x)), and the ensemble labeler corrupts the true
// logit with additive biases at three scopes before thresholding:
//
//   S_ij = 1  iff  clamp(logit p_i) + b_D + c_j + sigma_draw * eps_ij > 0
//
// b_D ~ N(0, sigma_session^2) once per dialogue (the session shift of H2),
// c_j ~ N(0, sigma_prompt^2) once per ensemble member, eps_ij ~ Logistic(0,1)
// per call. With sigma_draw = 1 and the biases off, P(S_ij=1) = p_i exactly,
// i.e. the labeler is calibrated; sigma_draw acts as a temperature.
struct WorldConfig {
  int d = 24;
  int n_dialogues = 600;
  int min_utterances = 8;
  int max_utterances = 20;
  // Latent concept. Empty means: draw a direction from the seed and scale
  // it to norm w_star_norm.
  std::vector<double> w_star;
  double w_star_norm = 2.0;
  double sigma_session = 0.5;
  double sigma_prompt = 0.25;
  double sigma_draw = 1.0;
  std::uint64_t seed = 42;
};

// Hard ensemble labels for one dialogue: n x k row-major bits, plus the
// session bias retained for diagnostics only (never fed to training).
struct LabelerDraws {
  std::string dialogue_id;
  int n = 0;
  int k = 0;
  std::vector<std::uint8_t> s;  // s[i*k + j]
  double session_bias = 0.0;

  std::uint8_t at(int i, int j) const { return s[static_cast<std::size_t>(i) * k + j]; }
};

// The concrete w* a config denotes (explicit vector, or drawn from seed).
std::vector<double> resolve_w_star(const WorldConfig& config);

Corpus generate_world(const WorldConfig& config);
Corpus generate_world_serial(const WorldConfig& config);

// One LabelerDraws per dialogue, in corpus order. Per-dialogue generators
// are derived from (config.seed, dialogue id), so the parallel and serial
// versions produce bit-identical output. The per-utterance true probability
// is sigmoid(w*.x) when the corpus carries features and the config a
// resolvable w*; a dialogue whose utterances carry only gold labels falls
// back to p_i = gold (logit clamped to +-30).
std::vector<LabelerDraws> simulate_draws(const Corpus& corpus, int k,
                                         const WorldConfig& config);
std::vector<LabelerDraws> simulate_draws_serial(const Corpus& corpus, int k,
                                                const WorldConfig& config);

// sigmoid with the +-30 logit clamp used throughout the simulator.
double clamped_logit(double p);
double sigmoid(double z);

}  // namespace pairdistill
