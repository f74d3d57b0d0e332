#include "pairdistill/corpus.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

namespace pairdistill {

using nlohmann::json;

const Dialogue* Corpus::find(const std::string& id) const {
  for (const auto& d : dialogues) {
    if (d.id == id) return &d;
  }
  return nullptr;
}

std::size_t Corpus::total_utterances() const {
  std::size_t n = 0;
  for (const auto& d : dialogues) n += d.utterances.size();
  return n;
}

void validate_corpus(const Corpus& corpus) {
  std::unordered_set<std::string> seen;
  for (const auto& dlg : corpus.dialogues) {
    if (dlg.utterances.empty()) {
      throw std::runtime_error("dialogue '" + dlg.id + "' has no utterances");
    }
    if (!seen.insert(dlg.id).second) {
      throw std::runtime_error("duplicate dialogue id '" + dlg.id + "'");
    }
    for (std::size_t i = 0; i < dlg.utterances.size(); ++i) {
      const Utterance& u = dlg.utterances[i];
      if (u.index != static_cast<int>(i) + 1) {
        throw std::runtime_error("dialogue '" + dlg.id +
                                 "': utterance indices must be 1..n in order");
      }
      if (u.features && static_cast<int>(u.features->size()) != corpus.d) {
        throw std::runtime_error(
            "dialogue '" + dlg.id + "' utterance " + std::to_string(u.index) +
            ": feature dimension " + std::to_string(u.features->size()) +
            " != corpus d=" + std::to_string(corpus.d));
      }
      if (u.gold) {
        if (static_cast<int>(u.gold->size()) != corpus.C) {
          throw std::runtime_error(
              "dialogue '" + dlg.id + "' utterance " +
              std::to_string(u.index) + ": gold length " +
              std::to_string(u.gold->size()) +
              " != corpus C=" + std::to_string(corpus.C));
        }
        for (int g : *u.gold) {
          if (g != 0 && g != 1) {
            throw std::runtime_error("dialogue '" + dlg.id + "' utterance " +
                                     std::to_string(u.index) +
                                     ": gold entries must be 0 or 1");
          }
        }
      }
    }
  }
}

namespace {

Utterance parse_utterance(const json& j, int index) {
  if (!j.is_object()) throw std::runtime_error("utterance is not an object");
  Utterance u;
  u.index = index;
  if (!j.contains("speaker") || !j.at("speaker").is_string()) {
    throw std::runtime_error("utterance missing string field 'speaker'");
  }
  u.speaker = j.at("speaker").get<std::string>();
  if (j.contains("text")) u.text = j.at("text").get<std::string>();
  if (j.contains("features")) {
    u.features = j.at("features").get<std::vector<double>>();
  }
  if (j.contains("gold")) {
    u.gold = j.at("gold").get<std::vector<int>>();
  }
  return u;
}

}  // namespace

Corpus load_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open corpus file '" + path + "'");

  Corpus corpus;
  std::unordered_set<std::string> seen;
  std::string line;
  int lineno = 0;
  int d = -1;  // -1 until first feature vector fixes it
  int C = -1;
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
      Dialogue dlg;
      if (!j.contains("id") || !j.at("id").is_string()) {
        throw std::runtime_error("dialogue missing string field 'id'");
      }
      dlg.id = j.at("id").get<std::string>();
      if (!seen.insert(dlg.id).second) {
        throw std::runtime_error("duplicate dialogue id '" + dlg.id + "'");
      }
      if (!j.contains("utterances") || !j.at("utterances").is_array() ||
          j.at("utterances").empty()) {
        throw std::runtime_error("dialogue '" + dlg.id +
                                 "' needs a non-empty 'utterances' array");
      }
      int idx = 0;
      for (const auto& ju : j.at("utterances")) {
        Utterance u = parse_utterance(ju, ++idx);
        if (u.features) {
          const int dim = static_cast<int>(u.features->size());
          if (d < 0) d = dim;
          if (dim != d) {
            throw std::runtime_error("dialogue '" + dlg.id + "' utterance " +
                                     std::to_string(idx) +
                                     ": feature dimension " +
                                     std::to_string(dim) + " != corpus d=" +
                                     std::to_string(d));
          }
        }
        if (u.gold) {
          const int c = static_cast<int>(u.gold->size());
          if (C < 0) C = c;
          if (c != C) {
            throw std::runtime_error(
                "dialogue '" + dlg.id + "' utterance " + std::to_string(idx) +
                ": gold length " + std::to_string(c) + " != corpus C=" +
                std::to_string(C));
          }
          for (int g : *u.gold) {
            if (g != 0 && g != 1) {
              throw std::runtime_error("dialogue '" + dlg.id + "' utterance " +
                                       std::to_string(idx) +
                                       ": gold entries must be 0 or 1");
            }
          }
        }
        dlg.utterances.push_back(std::move(u));
      }
      corpus.dialogues.push_back(std::move(dlg));
    } catch (const json::exception& e) {
      throw std::runtime_error(where + ": " + e.what());
    } catch (const std::runtime_error& e) {
      throw std::runtime_error(where + ": " + e.what());
    }
  }
  corpus.d = d < 0 ? 0 : d;
  corpus.C = C < 0 ? 0 : C;
  validate_corpus(corpus);
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write corpus file '" + path + "'");
  for (const auto& dlg : corpus.dialogues) {
    json j;
    j["id"] = dlg.id;
    json arr = json::array();
    for (const auto& u : dlg.utterances) {
      json ju;
      ju["speaker"] = u.speaker;
      if (u.text) ju["text"] = *u.text;
      if (u.features) ju["features"] = *u.features;
      if (u.gold) ju["gold"] = *u.gold;
      arr.push_back(std::move(ju));
    }
    j["utterances"] = std::move(arr);
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<double> feature_of_segment(const Dialogue& dialogue, int start,
                                       int end, double gamma) {
  if (start < 1 || end > dialogue.n() || start > end) {
    throw std::runtime_error("segment range [" + std::to_string(start) + "," +
                             std::to_string(end) + "] invalid for dialogue '" +
                             dialogue.id + "'");
  }
  if (gamma <= 0.0 || gamma > 1.0) {
    throw std::runtime_error("gamma must be in (0,1]");
  }
  const Utterance& last = dialogue.utterances[end - 1];
  if (!last.features) {
    throw std::runtime_error("dialogue '" + dialogue.id + "' utterance " +
                             std::to_string(end) + " has no features");
  }
  const std::size_t dim = last.features->size();
  std::vector<double> acc(dim, 0.0);
  double wsum = 0.0;
  for (int j = start; j <= end; ++j) {
    const Utterance& u = dialogue.utterances[j - 1];
    if (!u.features) {
      throw std::runtime_error("dialogue '" + dialogue.id + "' utterance " +
                               std::to_string(j) + " has no features");
    }
    const double w = std::pow(gamma, static_cast<double>(end - j));
    for (std::size_t m = 0; m < dim; ++m) acc[m] += w * (*u.features)[m];
    wsum += w;
  }
  for (double& v : acc) v /= wsum;
  return acc;
}

std::vector<Segment> segment_dialogue(const Dialogue& dialogue, int window,
                                      double gamma) {
  if (window < 0) throw std::runtime_error("window must be >= 0");
  std::vector<Segment> segments;
  segments.reserve(dialogue.utterances.size());
  for (int i = 1; i <= dialogue.n(); ++i) {
    Segment seg;
    seg.dialogue_id = dialogue.id;
    seg.end_index = i;
    seg.window_start = window == 0 ? 1 : std::max(1, i - window + 1);
    seg.features =
        feature_of_segment(dialogue, seg.window_start, i, gamma);
    segments.push_back(std::move(seg));
  }
  return segments;
}

}  // namespace pairdistill
