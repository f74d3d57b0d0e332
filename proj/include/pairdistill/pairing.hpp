#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pairdistill/corpus.hpp"
#include "pairdistill/scores.hpp"

namespace pairdistill {

// A sampled segment pair, orientation-normalized: segment a is the one the
// labeler prefers (y_hat_a = 1, y_hat_b = 0), so delta_s = s_a - s_b > 0
// whenever the hard-label threshold is 0.5.
struct PreferencePair {
  std::string dialogue_a;
  int end_a = 0;
  std::string dialogue_b;
  int end_b = 0;
  double delta_s = 0.0;
  bool same_session = false;
};

enum class PairMode { intra, cross };

// Rejection-samples discordant segment pairs. intra mode draws the two
// segments without replacement from one dialogue, up to
// 50*pairs_per_dialogue attempts per dialogue; cross mode draws them from
// two distinct dialogues, one slot per (dialogue, pair) with 50 attempts
// each. Concordant and abstaining pairs are rejected. Deterministic in
// (seed); per-dialogue (or per-slot) generators make the parallel and
// serial versions identical.
std::vector<PreferencePair> sample_pairs(const Corpus& corpus,
                                         const std::vector<ScoreVector>& scores,
                                         PairMode mode, int pairs_per_dialogue,
                                         std::uint64_t seed,
                                         double threshold = 0.5);
std::vector<PreferencePair> sample_pairs_serial(
    const Corpus& corpus, const std::vector<ScoreVector>& scores,
    PairMode mode, int pairs_per_dialogue, std::uint64_t seed,
    double threshold = 0.5);

struct CorrelationBucket {
  double lo = 0.0;
  double hi = 0.0;
  double mean_ds = 0.0;
  double p_gold = 0.0;  // empirical P(gold_a = 1 and gold_b = 0)
  std::int64_t count = 0;
};

struct CorrelationTable {
  std::vector<CorrelationBucket> buckets;
  double slope = 0.0;
  double intercept = 0.0;
  bool slope_defined = false;  // needs >= 2 nonempty buckets
};

struct OlsFit {
  double slope = 0.0;
  double intercept = 0.0;
};

// Least-squares line through (x_i, y_i); requires >= 2 points.
OlsFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// Buckets pairs by delta_s into m_buckets equal-width buckets over (0,1],
// computes the per-bucket probability that the gold labels agree with the
// preference, and fits OLS of that probability on the bucket-mean delta_s.
CorrelationTable correlation_experiment(const Corpus& corpus,
                                        const std::vector<PreferencePair>& pairs,
                                        int m_buckets = 5,
                                        int class_index = 0);

struct SlopeDiff {
  double diff = 0.0;  // slope(intra) - slope(cross) on the full samples
  double se = 0.0;    // bootstrap standard error of the difference
  int n_boot = 0;     // resamples that produced a defined slope pair
};

// Bootstrap over pair resampling (within each group independently).
SlopeDiff bootstrap_slope_diff(const Corpus& corpus,
                               const std::vector<PreferencePair>& intra,
                               const std::vector<PreferencePair>& cross,
                               int m_buckets, int n_boot, std::uint64_t seed,
                               int class_index = 0);

// CSV: dialogue_a,end_a,dialogue_b,end_b,delta_s,same_session
void save_pairs(const std::vector<PreferencePair>& pairs,
                const std::string& path);

// CSV: group,bucket_lo,bucket_hi,mean_ds,p_gold,count
void save_correlation_table(const CorrelationTable& table,
                            const std::string& group, const std::string& path);
void save_correlation_tables(const CorrelationTable& intra,
                             const CorrelationTable& cross,
                             const std::string& path);

// CSV: group,slope,intercept
void save_slopes(const CorrelationTable& intra, const CorrelationTable& cross,
                 const std::string& path);

}  // namespace pairdistill
