#include "pairdistill/dataset.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace pairdistill {

SegmentTable build_segment_table(const Corpus& corpus,
                                 const std::vector<ScoreVector>& scores,
                                 int class_index, int window, double gamma) {
  if (corpus.d == 0) {
    throw std::runtime_error("segment table requires feature vectors on every utterance");
  }
  std::unordered_map<std::string, const ScoreVector*> by_id;
  for (const auto& sv : scores) {
    if (sv.class_index == class_index) by_id[sv.dialogue_id] = &sv;
  }

  SegmentTable table;
  table.d = corpus.d;
  table.dialogue_offset.reserve(corpus.dialogues.size());
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t di = 0; di < corpus.dialogues.size(); ++di) {
    const Dialogue& dlg = corpus.dialogues[di];
    table.dialogue_offset.push_back(table.size());
    const ScoreVector* sv = nullptr;
    if (!scores.empty()) {
      auto it = by_id.find(dlg.id);
      if (it == by_id.end()) {
        throw std::runtime_error("no class " + std::to_string(class_index) +
                                 " scores for dialogue " + dlg.id);
      }
      sv = it->second;
      if (sv->s.size() != static_cast<std::size_t>(dlg.n())) {
        throw std::runtime_error("score length mismatch for dialogue " + dlg.id);
      }
    }
    auto segments = segment_dialogue(dlg, window, gamma);
    for (int i = 0; i < dlg.n(); ++i) {
      const Segment& seg = segments[static_cast<std::size_t>(i)];
      table.features.insert(table.features.end(), seg.features.begin(),
                            seg.features.end());
      table.dialogue_index.push_back(static_cast<int>(di));
      table.end_index.push_back(seg.end_index);
      table.score.push_back(sv ? sv->s[static_cast<std::size_t>(i)] : nan);
      const Utterance& utt = dlg.utterances[static_cast<std::size_t>(i)];
      int g = -1;
      if (utt.gold) {
        const auto& vec = *utt.gold;
        if (class_index < 0 || class_index >= static_cast<int>(vec.size())) {
          throw std::runtime_error("class index out of range for dialogue " + dlg.id);
        }
        g = vec[static_cast<std::size_t>(class_index)];
      }
      table.gold.push_back(g);
    }
  }
  return table;
}

PairwiseData build_pairwise_data(const Corpus& corpus, const SegmentTable& table,
                                 const std::vector<PreferencePair>& pairs) {
  std::unordered_map<std::string, int> dlg_index;
  for (std::size_t i = 0; i < corpus.dialogues.size(); ++i) {
    dlg_index[corpus.dialogues[i].id] = static_cast<int>(i);
  }
  PairwiseData data;
  data.d = table.d;
  data.xa.reserve(pairs.size() * static_cast<std::size_t>(table.d));
  data.xb.reserve(pairs.size() * static_cast<std::size_t>(table.d));
  data.delta_s.reserve(pairs.size());
  for (const PreferencePair& pr : pairs) {
    auto ia = dlg_index.find(pr.dialogue_a);
    auto ib = dlg_index.find(pr.dialogue_b);
    if (ia == dlg_index.end() || ib == dlg_index.end()) {
      throw std::runtime_error("pair references unknown dialogue " +
                               (ia == dlg_index.end() ? pr.dialogue_a : pr.dialogue_b));
    }
    auto ra = table.row(table.row_of(ia->second, pr.end_a));
    auto rb = table.row(table.row_of(ib->second, pr.end_b));
    data.xa.insert(data.xa.end(), ra.begin(), ra.end());
    data.xb.insert(data.xb.end(), rb.begin(), rb.end());
    data.delta_s.push_back(pr.delta_s);
  }
  return data;
}

}  // namespace pairdistill
