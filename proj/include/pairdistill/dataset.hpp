#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pairdistill/corpus.hpp"
#include "pairdistill/pairing.hpp"
#include "pairdistill/scores.hpp"

namespace pairdistill {

// Flat view of every segment of a corpus: pooled features, the ensemble
// score and gold label of the segment's end utterance. Row order is
// (dialogue, end_index) in corpus order.
struct SegmentTable {
  int d = 0;
  std::vector<double> features;       // size() x d, row-major
  std::vector<int> dialogue_index;    // into corpus.dialogues
  std::vector<int> end_index;         // 1-based
  std::vector<double> score;          // s of end utterance, NaN when absent
  std::vector<int> gold;              // class label, -1 when absent
  std::vector<std::size_t> dialogue_offset;  // first row of each dialogue

  std::size_t size() const { return dialogue_index.size(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * d, static_cast<std::size_t>(d)};
  }
  std::size_t row_of(int dlg_idx, int end) const {
    return dialogue_offset[dlg_idx] + static_cast<std::size_t>(end) - 1;
  }
};

// `scores` may be empty (score column left NaN); gold may be absent per
// utterance (-1).
SegmentTable build_segment_table(const Corpus& corpus,
                                 const std::vector<ScoreVector>& scores,
                                 int class_index, int window, double gamma);

// Pointwise training set: feature rows with soft or hard targets in [0,1].
struct PointwiseData {
  int d = 0;
  std::vector<double> x;       // n x d
  std::vector<double> target;  // n

  std::size_t size() const { return target.size(); }
  std::span<const double> row(std::size_t i) const {
    return {x.data() + i * d, static_cast<std::size_t>(d)};
  }
};

// Pairwise training set, orientation-normalized (a preferred over b).
struct PairwiseData {
  int d = 0;
  std::vector<double> xa;       // n x d
  std::vector<double> xb;       // n x d
  std::vector<double> delta_s;  // n

  std::size_t size() const { return delta_s.size(); }
  std::span<const double> row_a(std::size_t i) const {
    return {xa.data() + i * d, static_cast<std::size_t>(d)};
  }
  std::span<const double> row_b(std::size_t i) const {
    return {xb.data() + i * d, static_cast<std::size_t>(d)};
  }
};

// Resolves pair member features against a segment table.
PairwiseData build_pairwise_data(const Corpus& corpus, const SegmentTable& table,
                                 const std::vector<PreferencePair>& pairs);

}  // namespace pairdistill
