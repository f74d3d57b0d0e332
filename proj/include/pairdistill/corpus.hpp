#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pairdistill {

// One uninterrupted speaker turn. `index` is 1-based within its dialogue.
struct Utterance {
  int index = 0;
  std::string speaker;
  std::optional<std::string> text;
  std::optional<std::vector<double>> features;
  std::optional<std::vector<int>> gold;  // one-vs-rest 0/1 labels, length C
};

struct Dialogue {
  std::string id;
  std::vector<Utterance> utterances;

  int n() const { return static_cast<int>(utterances.size()); }
};

// Prefix slice of a dialogue ending at `end_index`, truncated on the left
// to `window_start`. Carries the pooled feature vector used as model input.
struct Segment {
  std::string dialogue_id;
  int end_index = 0;
  int window_start = 0;
  std::vector<double> features;
};

struct Corpus {
  std::vector<Dialogue> dialogues;
  int d = 0;  // feature dimensionality, 0 when no utterance carries features
  int C = 0;  // label vector length, 0 when no utterance carries gold labels

  const Dialogue* find(const std::string& id) const;
  std::size_t total_utterances() const;
};

// Reads a JSONL corpus, one dialogue object per line:
//   {"id": str, "utterances": [{"speaker": str, "text": str?,
//                               "features": [float]?, "gold": [0|1]?}]}
// Unknown keys are ignored. Throws std::runtime_error naming the offending
// line on malformed input, duplicate dialogue ids, or inconsistent
// feature/gold dimensions.
Corpus load_corpus(const std::string& path);

// Inverse of load_corpus; a save/load round trip reproduces the corpus
// field by field.
void save_corpus(const Corpus& corpus, const std::string& path);

// Validates dialogue/corpus invariants; used by load_corpus and by the
// simulator before handing a generated corpus out.
void validate_corpus(const Corpus& corpus);

// Pooled feature vector of utterances start..end (1-based, inclusive):
// mean of their feature vectors weighted by recency, weight gamma^(end-j)
// for utterance j, normalized by the weight sum. gamma in (0,1]; gamma == 1
// is the plain arithmetic mean. Throws when an utterance in range has no
// features.
std::vector<double> feature_of_segment(const Dialogue& dialogue, int start,
                                       int end, double gamma = 1.0);

// Sliding-window segmentation: one segment per utterance, segment i
// covering max(1, i-window+1)..i. window == 0 means unbounded.
std::vector<Segment> segment_dialogue(const Dialogue& dialogue, int window = 0,
                                      double gamma = 1.0);

}  // namespace pairdistill
