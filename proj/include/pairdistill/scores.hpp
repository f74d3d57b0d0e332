#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pairdistill/corpus.hpp"
#include "pairdistill/simulator.hpp"

namespace pairdistill {

// Per-utterance ensemble confidences for one dialogue and one
// one-vs-rest problem.
struct ScoreVector {
  std::string dialogue_id;
  std::vector<double> s;  // in [0,1], length n
  int k = 0;              // ensemble size that produced s
  int class_index = 0;
};

enum class HardLabel : std::uint8_t { negative = 0, positive = 1, abstain = 2 };

struct HardLabels {
  std::string dialogue_id;
  std::vector<HardLabel> y_hat;
};

// Score interval (lo, hi]; the first bucket also contains lo, giving s = 0
// a home. acc/conf are 0 for empty buckets by convention.
struct ReliabilityBucket {
  double lo = 0.0;
  double hi = 0.0;
  std::int64_t count = 0;
  double acc = 0.0;   // fraction of gold-positive items
  double conf = 0.0;  // mean score
};

// Row mean along the ensemble dimension: s_i = (1/k) sum_j S_ij.
ScoreVector aggregate(const LabelerDraws& draws, int class_index = 0);

// Majority vote at `threshold`: 1 above, 0 below, abstain on exact ties.
HardLabels hard_labels(const ScoreVector& scores, double threshold = 0.5);

// Score file, JSONL, one record per (dialogue, class):
//   {"id": str, "class": int, "k": int, "s": [float]}
// Ids must resolve against `corpus` and the score length must match the
// dialogue's utterance count; entries must lie in [0,1].
std::vector<ScoreVector> load_external_scores(const std::string& path,
                                              const Corpus& corpus);
void save_scores(const std::vector<ScoreVector>& scores,
                 const std::string& path);

// (score, gold) pairs for one one-vs-rest class, joining score vectors with
// the corpus gold labels. Utterances without gold are skipped.
std::vector<std::pair<double, int>> join_scores_with_gold(
    const Corpus& corpus, const std::vector<ScoreVector>& scores,
    int class_index = 0);

// M equal-width buckets over (0,1]; empty buckets are retained.
std::vector<ReliabilityBucket> bucketize(
    const std::vector<std::pair<double, int>>& items, int m_buckets);

// ECE = sum_m (|B_m|/N) |acc(B_m) - conf(B_m)|.
double ece(const std::vector<ReliabilityBucket>& buckets);

struct EcePoint {
  int k = 0;
  double ece = 0.0;
};

// Simulates draws at each ensemble size over a fixed world, aggregates, and
// measures ECE with m_buckets buckets.
std::vector<EcePoint> ece_curve(const Corpus& corpus, const WorldConfig& config,
                                const std::vector<int>& k_values,
                                int m_buckets = 5);

void save_ece_curve(const std::vector<EcePoint>& curve,
                    const std::string& path);

}  // namespace pairdistill
