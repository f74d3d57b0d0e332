#include "pairdistill/pairing.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "pairdistill/rng.hpp"

namespace pairdistill {

namespace {

constexpr int kAttemptFactor = 50;

// Scores in corpus dialogue order for one one-vs-rest class.
std::vector<const ScoreVector*> align_scores(
    const Corpus& corpus, const std::vector<ScoreVector>& scores,
    int class_index) {
  std::unordered_map<std::string, const ScoreVector*> by_id;
  for (const auto& sv : scores) {
    if (sv.class_index == class_index) by_id[sv.dialogue_id] = &sv;
  }
  std::vector<const ScoreVector*> aligned;
  aligned.reserve(corpus.dialogues.size());
  for (const auto& dlg : corpus.dialogues) {
    auto it = by_id.find(dlg.id);
    if (it == by_id.end()) {
      throw std::runtime_error("no scores for dialogue '" + dlg.id + "'");
    }
    if (it->second->s.size() != dlg.utterances.size()) {
      throw std::runtime_error("score length mismatch for '" + dlg.id + "'");
    }
    aligned.push_back(it->second);
  }
  return aligned;
}

HardLabel hard_of(double s, double threshold) {
  return s > threshold   ? HardLabel::positive
         : s < threshold ? HardLabel::negative
                         : HardLabel::abstain;
}

// Emits at most pairs_per_dialogue intra pairs for dialogue `idx`.
void intra_pairs_for_dialogue(const Corpus& corpus,
                              const std::vector<const ScoreVector*>& scores,
                              int idx, int pairs_per_dialogue,
                              std::uint64_t seed, double threshold,
                              std::vector<PreferencePair>& out) {
  const Dialogue& dlg = corpus.dialogues[idx];
  const ScoreVector& sv = *scores[idx];
  const int n = dlg.n();
  if (n < 2) return;

  Rng gen(derive_seed(seed, stream::pairs, fnv1a64(dlg.id)));
  int budget = kAttemptFactor * pairs_per_dialogue;
  int made = 0;
  while (made < pairs_per_dialogue && budget > 0) {
    --budget;
    const int i = static_cast<int>(gen.below(n));
    int j = static_cast<int>(gen.below(n - 1));
    if (j >= i) ++j;  // without replacement
    const HardLabel yi = hard_of(sv.s[i], threshold);
    const HardLabel yj = hard_of(sv.s[j], threshold);
    if (yi == yj || yi == HardLabel::abstain || yj == HardLabel::abstain) {
      continue;
    }
    const int a = yi == HardLabel::positive ? i : j;
    const int b = yi == HardLabel::positive ? j : i;
    out.push_back({dlg.id, a + 1, dlg.id, b + 1, sv.s[a] - sv.s[b], true});
    ++made;
  }
}

// Emits at most one cross pair for slot `slot`.
void cross_pair_for_slot(const Corpus& corpus,
                         const std::vector<const ScoreVector*>& scores,
                         std::int64_t slot, std::uint64_t seed,
                         double threshold, std::vector<PreferencePair>& out) {
  const std::size_t n_dialogues = corpus.dialogues.size();
  if (n_dialogues < 2) return;
  Rng gen(derive_seed(seed, stream::cross_pairs,
                      static_cast<std::uint64_t>(slot)));
  for (int attempt = 0; attempt < kAttemptFactor; ++attempt) {
    const auto da = gen.below(n_dialogues);
    auto db = gen.below(n_dialogues - 1);
    if (db >= da) ++db;
    const Dialogue& dlga = corpus.dialogues[da];
    const Dialogue& dlgb = corpus.dialogues[db];
    const ScoreVector& sva = *scores[da];
    const ScoreVector& svb = *scores[db];
    const int i = static_cast<int>(gen.below(dlga.n()));
    const int j = static_cast<int>(gen.below(dlgb.n()));
    const HardLabel yi = hard_of(sva.s[i], threshold);
    const HardLabel yj = hard_of(svb.s[j], threshold);
    if (yi == yj || yi == HardLabel::abstain || yj == HardLabel::abstain) {
      continue;
    }
    if (yi == HardLabel::positive) {
      out.push_back(
          {dlga.id, i + 1, dlgb.id, j + 1, sva.s[i] - svb.s[j], false});
    } else {
      out.push_back(
          {dlgb.id, j + 1, dlga.id, i + 1, svb.s[j] - sva.s[i], false});
    }
    return;
  }
}

void check_pair_args(int pairs_per_dialogue, double threshold) {
  if (pairs_per_dialogue < 1) {
    throw std::runtime_error("pairs_per_dialogue must be >= 1");
  }
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw std::runtime_error("threshold must be in (0,1)");
  }
}

}  // namespace

std::vector<PreferencePair> sample_pairs_serial(
    const Corpus& corpus, const std::vector<ScoreVector>& scores,
    PairMode mode, int pairs_per_dialogue, std::uint64_t seed,
    double threshold) {
  check_pair_args(pairs_per_dialogue, threshold);
  const auto aligned = align_scores(corpus, scores, 0);
  const std::int64_t n_dialogues =
      static_cast<std::int64_t>(corpus.dialogues.size());
  std::vector<PreferencePair> out;
  if (mode == PairMode::intra) {
    for (std::int64_t idx = 0; idx < n_dialogues; ++idx) {
      intra_pairs_for_dialogue(corpus, aligned, static_cast<int>(idx),
                               pairs_per_dialogue, seed, threshold, out);
    }
  } else {
    const std::int64_t slots = n_dialogues * pairs_per_dialogue;
    for (std::int64_t slot = 0; slot < slots; ++slot) {
      cross_pair_for_slot(corpus, aligned, slot, seed, threshold, out);
    }
  }
  return out;
}

std::vector<PreferencePair> sample_pairs(const Corpus& corpus,
                                         const std::vector<ScoreVector>& scores,
                                         PairMode mode, int pairs_per_dialogue,
                                         std::uint64_t seed, double threshold) {
  check_pair_args(pairs_per_dialogue, threshold);
  const auto aligned = align_scores(corpus, scores, 0);
  const std::int64_t n_dialogues =
      static_cast<std::int64_t>(corpus.dialogues.size());

  if (mode == PairMode::intra) {
    std::vector<std::vector<PreferencePair>> per_dialogue(n_dialogues);
#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < n_dialogues; ++idx) {
      intra_pairs_for_dialogue(corpus, aligned, static_cast<int>(idx),
                               pairs_per_dialogue, seed, threshold,
                               per_dialogue[idx]);
    }
    std::vector<PreferencePair> out;
    for (auto& chunk : per_dialogue) {
      out.insert(out.end(), chunk.begin(), chunk.end());
    }
    return out;
  }

  const std::int64_t slots = n_dialogues * pairs_per_dialogue;
  std::vector<std::vector<PreferencePair>> per_slot(slots);
#pragma omp parallel for schedule(static)
  for (std::int64_t slot = 0; slot < slots; ++slot) {
    cross_pair_for_slot(corpus, aligned, slot, seed, threshold,
                        per_slot[slot]);
  }
  std::vector<PreferencePair> out;
  for (auto& chunk : per_slot) {
    out.insert(out.end(), chunk.begin(), chunk.end());
  }
  return out;
}

OlsFit ols_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2) {
    throw std::runtime_error("ols_fit needs >= 2 points");
  }
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  if (sxx == 0.0) throw std::runtime_error("ols_fit: degenerate x values");
  OlsFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

namespace {

struct GoldIndex {
  std::unordered_map<std::string, const Dialogue*> by_id;

  explicit GoldIndex(const Corpus& corpus) {
    for (const auto& dlg : corpus.dialogues) by_id[dlg.id] = &dlg;
  }

  int gold(const std::string& id, int end_index, int class_index) const {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw std::runtime_error("unknown dialogue id '" + id + "'");
    }
    const auto& gold = it->second->utterances.at(end_index - 1).gold;
    if (!gold) {
      throw std::runtime_error("dialogue '" + id + "' utterance " +
                               std::to_string(end_index) + " has no gold label");
    }
    return (*gold)[class_index];
  }
};

CorrelationTable table_from_outcomes(const std::vector<double>& ds,
                                     const std::vector<int>& success,
                                     int m_buckets) {
  CorrelationTable table;
  table.buckets.resize(m_buckets);
  std::vector<double> ds_sum(m_buckets, 0.0);
  std::vector<std::int64_t> wins(m_buckets, 0);
  for (int m = 0; m < m_buckets; ++m) {
    table.buckets[m].lo = static_cast<double>(m) / m_buckets;
    table.buckets[m].hi = static_cast<double>(m + 1) / m_buckets;
  }
  for (std::size_t t = 0; t < ds.size(); ++t) {
    const double x = ds[t];
    int m = static_cast<int>(std::ceil(x * m_buckets)) - 1;
    if (m < 0) m = 0;
    if (m >= m_buckets) m = m_buckets - 1;
    table.buckets[m].count += 1;
    ds_sum[m] += x;
    wins[m] += success[t];
  }
  std::vector<double> xs, ys;
  for (int m = 0; m < m_buckets; ++m) {
    auto& b = table.buckets[m];
    if (b.count == 0) continue;
    b.mean_ds = ds_sum[m] / b.count;
    b.p_gold = static_cast<double>(wins[m]) / b.count;
    xs.push_back(b.mean_ds);
    ys.push_back(b.p_gold);
  }
  if (xs.size() >= 2) {
    const OlsFit fit = ols_fit(xs, ys);
    table.slope = fit.slope;
    table.intercept = fit.intercept;
    table.slope_defined = true;
  }
  return table;
}

}  // namespace

CorrelationTable correlation_experiment(
    const Corpus& corpus, const std::vector<PreferencePair>& pairs,
    int m_buckets, int class_index) {
  if (m_buckets < 2) throw std::runtime_error("m_buckets must be >= 2");
  const GoldIndex gold(corpus);
  std::vector<double> ds;
  std::vector<int> success;
  ds.reserve(pairs.size());
  success.reserve(pairs.size());
  for (const auto& p : pairs) {
    ds.push_back(p.delta_s);
    const int ya = gold.gold(p.dialogue_a, p.end_a, class_index);
    const int yb = gold.gold(p.dialogue_b, p.end_b, class_index);
    success.push_back(ya == 1 && yb == 0 ? 1 : 0);
  }
  return table_from_outcomes(ds, success, m_buckets);
}

SlopeDiff bootstrap_slope_diff(const Corpus& corpus,
                               const std::vector<PreferencePair>& intra,
                               const std::vector<PreferencePair>& cross,
                               int m_buckets, int n_boot, std::uint64_t seed,
                               int class_index) {
  const GoldIndex gold(corpus);
  auto outcomes = [&](const std::vector<PreferencePair>& pairs,
                      std::vector<double>& ds, std::vector<int>& success) {
    ds.clear();
    success.clear();
    for (const auto& p : pairs) {
      ds.push_back(p.delta_s);
      const int ya = gold.gold(p.dialogue_a, p.end_a, class_index);
      const int yb = gold.gold(p.dialogue_b, p.end_b, class_index);
      success.push_back(ya == 1 && yb == 0 ? 1 : 0);
    }
  };
  std::vector<double> ds_i, ds_c;
  std::vector<int> win_i, win_c;
  outcomes(intra, ds_i, win_i);
  outcomes(cross, ds_c, win_c);

  const CorrelationTable ti = table_from_outcomes(ds_i, win_i, m_buckets);
  const CorrelationTable tc = table_from_outcomes(ds_c, win_c, m_buckets);
  if (!ti.slope_defined || !tc.slope_defined) {
    throw std::runtime_error("bootstrap: undefined slope on full sample");
  }

  SlopeDiff result;
  result.diff = ti.slope - tc.slope;

  Rng gen(derive_seed(seed, stream::bootstrap));
  std::vector<double> diffs;
  diffs.reserve(n_boot);
  std::vector<double> rds;
  std::vector<int> rwin;
  for (int b = 0; b < n_boot; ++b) {
    auto resample_slope = [&](const std::vector<double>& ds,
                              const std::vector<int>& win) {
      rds.resize(ds.size());
      rwin.resize(win.size());
      for (std::size_t t = 0; t < ds.size(); ++t) {
        const std::size_t r = gen.below(ds.size());
        rds[t] = ds[r];
        rwin[t] = win[r];
      }
      return table_from_outcomes(rds, rwin, m_buckets);
    };
    const CorrelationTable bi = resample_slope(ds_i, win_i);
    const CorrelationTable bc = resample_slope(ds_c, win_c);
    if (bi.slope_defined && bc.slope_defined) {
      diffs.push_back(bi.slope - bc.slope);
    }
  }
  if (diffs.size() < 10) {
    throw std::runtime_error("bootstrap: too few defined resamples");
  }
  double mean = 0.0;
  for (double v : diffs) mean += v;
  mean /= static_cast<double>(diffs.size());
  double var = 0.0;
  for (double v : diffs) var += (v - mean) * (v - mean);
  var /= static_cast<double>(diffs.size() - 1);
  result.se = std::sqrt(var);
  result.n_boot = static_cast<int>(diffs.size());
  return result;
}

void save_pairs(const std::vector<PreferencePair>& pairs,
                const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "dialogue_a,end_a,dialogue_b,end_b,delta_s,same_session\n";
  char buf[256];
  for (const auto& p : pairs) {
    std::snprintf(buf, sizeof(buf), "%s,%d,%s,%d,%.6f,%d\n",
                  p.dialogue_a.c_str(), p.end_a, p.dialogue_b.c_str(), p.end_b,
                  p.delta_s, p.same_session ? 1 : 0);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

namespace {

void write_table_rows(std::ofstream& out, const char* group,
                      const CorrelationTable& table) {
  char buf[160];
  for (const auto& b : table.buckets) {
    std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f,%.6f,%lld\n", group,
                  b.lo, b.hi, b.mean_ds, b.p_gold,
                  static_cast<long long>(b.count));
    out << buf;
  }
}

}  // namespace

void save_correlation_table(const CorrelationTable& table,
                            const std::string& group, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "group,bucket_lo,bucket_hi,mean_ds,p_gold,count\n";
  write_table_rows(out, group.c_str(), table);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void save_correlation_tables(const CorrelationTable& intra,
                             const CorrelationTable& cross,
                             const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "group,bucket_lo,bucket_hi,mean_ds,p_gold,count\n";
  write_table_rows(out, "intra", intra);
  write_table_rows(out, "cross", cross);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void save_slopes(const CorrelationTable& intra, const CorrelationTable& cross,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "group,slope,intercept\n";
  char buf[128];
  auto line = [&](const char* group, const CorrelationTable& t) {
    if (t.slope_defined) {
      std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f\n", group, t.slope,
                    t.intercept);
    } else {
      std::snprintf(buf, sizeof(buf), "%s,undefined,undefined\n", group);
    }
    out << buf;
  };
  line("intra", intra);
  line("cross", cross);
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace pairdistill
