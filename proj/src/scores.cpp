#include "pairdistill/scores.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include <json.hpp>

namespace pairdistill {

using nlohmann::json;

ScoreVector aggregate(const LabelerDraws& draws, int class_index) {
  if (draws.k < 1) throw std::runtime_error("aggregate: empty ensemble row");
  ScoreVector out;
  out.dialogue_id = draws.dialogue_id;
  out.k = draws.k;
  out.class_index = class_index;
  out.s.resize(draws.n);
  for (int i = 0; i < draws.n; ++i) {
    double sum = 0.0;
    for (int j = 0; j < draws.k; ++j) sum += draws.at(i, j);
    out.s[i] = sum / draws.k;
  }
  return out;
}

HardLabels hard_labels(const ScoreVector& scores, double threshold) {
  if (threshold <= 0.0 || threshold >= 1.0) {
    throw std::runtime_error("threshold must be in (0,1)");
  }
  HardLabels out;
  out.dialogue_id = scores.dialogue_id;
  out.y_hat.resize(scores.s.size());
  for (std::size_t i = 0; i < scores.s.size(); ++i) {
    const double s = scores.s[i];
    out.y_hat[i] = s > threshold   ? HardLabel::positive
                   : s < threshold ? HardLabel::negative
                                   : HardLabel::abstain;
  }
  return out;
}

std::vector<ScoreVector> load_external_scores(const std::string& path,
                                              const Corpus& corpus) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open score file '" + path + "'");

  std::unordered_map<std::string, int> n_of;
  for (const auto& dlg : corpus.dialogues) n_of[dlg.id] = dlg.n();

  std::vector<ScoreVector> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": malformed JSON: " + e.what());
    }
    try {
      ScoreVector sv;
      sv.dialogue_id = j.at("id").get<std::string>();
      sv.class_index = j.at("class").get<int>();
      sv.k = j.at("k").get<int>();
      sv.s = j.at("s").get<std::vector<double>>();
      auto it = n_of.find(sv.dialogue_id);
      if (it == n_of.end()) {
        throw std::runtime_error("unknown dialogue id '" + sv.dialogue_id +
                                 "'");
      }
      if (static_cast<int>(sv.s.size()) != it->second) {
        throw std::runtime_error(
            "score length " + std::to_string(sv.s.size()) + " for '" +
            sv.dialogue_id + "' != dialogue n=" + std::to_string(it->second));
      }
      if (sv.k < 1) throw std::runtime_error("k must be >= 1");
      for (double v : sv.s) {
        if (!(v >= 0.0 && v <= 1.0)) {
          throw std::runtime_error("score outside [0,1] for '" +
                                   sv.dialogue_id + "'");
        }
      }
      out.push_back(std::move(sv));
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  return out;
}

void save_scores(const std::vector<ScoreVector>& scores,
                 const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write score file '" + path + "'");
  for (const auto& sv : scores) {
    json j;
    j["id"] = sv.dialogue_id;
    j["class"] = sv.class_index;
    j["k"] = sv.k;
    j["s"] = sv.s;
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<std::pair<double, int>> join_scores_with_gold(
    const Corpus& corpus, const std::vector<ScoreVector>& scores,
    int class_index) {
  std::unordered_map<std::string, const Dialogue*> by_id;
  for (const auto& dlg : corpus.dialogues) by_id[dlg.id] = &dlg;

  std::vector<std::pair<double, int>> items;
  for (const auto& sv : scores) {
    if (sv.class_index != class_index) continue;
    auto it = by_id.find(sv.dialogue_id);
    if (it == by_id.end()) {
      throw std::runtime_error("unknown dialogue id '" + sv.dialogue_id + "'");
    }
    const Dialogue& dlg = *it->second;
    if (sv.s.size() != dlg.utterances.size()) {
      throw std::runtime_error("score length mismatch for '" + sv.dialogue_id +
                               "'");
    }
    for (std::size_t i = 0; i < sv.s.size(); ++i) {
      const auto& gold = dlg.utterances[i].gold;
      if (!gold) continue;
      items.emplace_back(sv.s[i], (*gold)[class_index]);
    }
  }
  return items;
}

std::vector<ReliabilityBucket> bucketize(
    const std::vector<std::pair<double, int>>& items, int m_buckets) {
  if (m_buckets < 2) throw std::runtime_error("bucketize: M must be >= 2");
  if (items.empty()) throw std::runtime_error("bucketize: no labeled items");

  std::vector<ReliabilityBucket> buckets(m_buckets);
  for (int m = 0; m < m_buckets; ++m) {
    buckets[m].lo = static_cast<double>(m) / m_buckets;
    buckets[m].hi = static_cast<double>(m + 1) / m_buckets;
  }
  std::vector<double> conf_sum(m_buckets, 0.0);
  std::vector<std::int64_t> pos(m_buckets, 0);
  for (const auto& [s, y] : items) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw std::runtime_error("bucketize: score outside [0,1]");
    }
    // ceil(s*M) - 1 maps (m/M, (m+1)/M] to m; s == 0 joins the first bucket.
    int m = static_cast<int>(std::ceil(s * m_buckets)) - 1;
    if (m < 0) m = 0;
    if (m >= m_buckets) m = m_buckets - 1;
    buckets[m].count += 1;
    conf_sum[m] += s;
    pos[m] += y;
  }
  for (int m = 0; m < m_buckets; ++m) {
    if (buckets[m].count > 0) {
      buckets[m].acc = static_cast<double>(pos[m]) / buckets[m].count;
      buckets[m].conf = conf_sum[m] / buckets[m].count;
    }
  }
  return buckets;
}

double ece(const std::vector<ReliabilityBucket>& buckets) {
  std::int64_t n = 0;
  for (const auto& b : buckets) n += b.count;
  if (n == 0) throw std::runtime_error("ece: all buckets empty");
  double sum = 0.0;
  for (const auto& b : buckets) {
    if (b.count == 0) continue;
    sum += static_cast<double>(b.count) / n * std::fabs(b.acc - b.conf);
  }
  return sum;
}

std::vector<EcePoint> ece_curve(const Corpus& corpus, const WorldConfig& config,
                                const std::vector<int>& k_values,
                                int m_buckets) {
  std::vector<EcePoint> curve;
  curve.reserve(k_values.size());
  for (int k : k_values) {
    const auto draws = simulate_draws(corpus, k, config);
    std::vector<ScoreVector> scores;
    scores.reserve(draws.size());
    for (const auto& d : draws) scores.push_back(aggregate(d));
    const auto items = join_scores_with_gold(corpus, scores);
    curve.push_back({k, ece(bucketize(items, m_buckets))});
  }
  return curve;
}

void save_ece_curve(const std::vector<EcePoint>& curve,
                    const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "k,ece\n";
  char buf[64];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof(buf), "%d,%.6f\n", p.k, p.ece);
    out << buf;
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace pairdistill
