#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "pairdistill/scores.hpp"
#include "pairdistill/simulator.hpp"
#include "test_util.hpp"

using namespace pairdistill;
using testutil::TempDir;
using testutil::read_file;
using testutil::write_file;

namespace {

LabelerDraws make_draws(const std::vector<std::vector<int>>& rows) {
  LabelerDraws d;
  d.dialogue_id = "d";
  d.n = static_cast<int>(rows.size());
  d.k = rows.empty() ? 0 : static_cast<int>(rows[0].size());
  for (const auto& row : rows) {
    for (int v : row) d.s.push_back(static_cast<std::uint8_t>(v));
  }
  return d;
}

Corpus one_dialogue_corpus(const std::string& id, int n) {
  Corpus c;
  c.C = 1;
  Dialogue dlg;
  dlg.id = id;
  for (int i = 0; i < n; ++i) {
    Utterance u;
    u.index = i + 1;
    u.speaker = "x";
    u.gold = std::vector<int>{i % 2};
    dlg.utterances.push_back(std::move(u));
  }
  c.dialogues.push_back(std::move(dlg));
  return c;
}

}  // namespace

TEST_CASE("aggregate is the exact row mean") {
  auto d = make_draws({{1, 0, 1, 0, 1}});
  auto s = aggregate(d);
  REQUIRE(s.s.size() == 1);
  CHECK(s.s[0] == 0.6);
  CHECK(s.k == 5);
  CHECK(s.dialogue_id == "d");

  auto ones = make_draws({{1, 1, 1, 1, 1, 1, 1}});
  CHECK(aggregate(ones).s[0] == 1.0);

  auto thirds = make_draws({{1, 1, 0}});
  CHECK(aggregate(thirds).s[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  CHECK_THROWS_AS(aggregate(LabelerDraws{}), std::runtime_error);
}

TEST_CASE("aggregate is invariant to ensemble-member order") {
  auto a = make_draws({{1, 0, 0, 1, 1, 0}, {0, 0, 1, 0, 0, 0}});
  auto b = make_draws({{0, 1, 1, 0, 0, 1}, {0, 0, 0, 0, 1, 0}});
  auto sa = aggregate(a);
  auto sb = aggregate(b);
  CHECK(sa.s[0] == sb.s[0]);
  CHECK(sa.s[1] == sb.s[1]);
}

TEST_CASE("hard_labels thresholds with abstain on exact ties") {
  ScoreVector sv;
  sv.dialogue_id = "d";
  sv.s = {0.6, 0.5, 0.4999, 1.0, 0.0};
  auto h = hard_labels(sv, 0.5);
  REQUIRE(h.y_hat.size() == 5);
  CHECK(h.y_hat[0] == HardLabel::positive);
  CHECK(h.y_hat[1] == HardLabel::abstain);
  CHECK(h.y_hat[2] == HardLabel::negative);
  CHECK(h.y_hat[3] == HardLabel::positive);
  CHECK(h.y_hat[4] == HardLabel::negative);
  CHECK_THROWS_AS(hard_labels(sv, 0.0), std::runtime_error);
  CHECK_THROWS_AS(hard_labels(sv, 1.0), std::runtime_error);
}

TEST_CASE("hard_labels of a k=1 aggregate reproduce the draws") {
  std::mt19937_64 gen(3);
  std::vector<std::vector<int>> rows;
  for (int i = 0; i < 50; ++i) rows.push_back({static_cast<int>(gen() & 1)});
  auto d = make_draws(rows);
  auto h = hard_labels(aggregate(d), 0.5);
  for (int i = 0; i < d.n; ++i) {
    CHECK(h.y_hat[i] == (d.at(i, 0) ? HardLabel::positive : HardLabel::negative));
  }
}

TEST_CASE("score file round trip and validation") {
  Corpus c = one_dialogue_corpus("d1", 2);
  TempDir tmp;
  const std::string path = tmp.file("scores.jsonl");

  std::vector<ScoreVector> scores;
  ScoreVector sv;
  sv.dialogue_id = "d1";
  sv.s = {0.25, 0.75};
  sv.k = 4;
  sv.class_index = 0;
  scores.push_back(sv);
  save_scores(scores, path);

  auto loaded = load_external_scores(path, c);
  REQUIRE(loaded.size() == 1);
  CHECK(loaded[0].dialogue_id == "d1");
  CHECK(loaded[0].k == 4);
  CHECK(loaded[0].class_index == 0);
  CHECK(loaded[0].s == std::vector<double>{0.25, 0.75});
}

TEST_CASE("load_external_scores rejects bad records with line info") {
  Corpus c = one_dialogue_corpus("d1", 2);
  TempDir tmp;

  const std::string wrong_len = tmp.file("len.jsonl");
  write_file(wrong_len, R"({"id": "d1", "class": 0, "k": 3, "s": [0.5]})" "\n");
  CHECK_THROWS_WITH_AS(load_external_scores(wrong_len, c),
                       doctest::Contains("score length 1"), std::runtime_error);
  CHECK_THROWS_WITH_AS(load_external_scores(wrong_len, c),
                       doctest::Contains(":1"), std::runtime_error);

  const std::string range = tmp.file("range.jsonl");
  write_file(range, R"({"id": "d1", "class": 0, "k": 3, "s": [0.5, 1.2]})" "\n");
  CHECK_THROWS_WITH_AS(load_external_scores(range, c),
                       doctest::Contains("outside [0,1]"), std::runtime_error);

  const std::string unknown = tmp.file("unknown.jsonl");
  write_file(unknown, R"({"id": "zz", "class": 0, "k": 3, "s": [0.5, 0.5]})" "\n");
  CHECK_THROWS_WITH_AS(load_external_scores(unknown, c),
                       doctest::Contains("unknown dialogue id 'zz'"),
                       std::runtime_error);

  const std::string bad_k = tmp.file("k.jsonl");
  write_file(bad_k, R"({"id": "d1", "class": 0, "k": 0, "s": [0.5, 0.5]})" "\n");
  CHECK_THROWS_AS(load_external_scores(bad_k, c), std::runtime_error);
}

TEST_CASE("bucketize places items by ceil(s*M)-1 and keeps empty buckets") {
  std::vector<std::pair<double, int>> items = {{0.1, 0}, {0.9, 1}};
  auto buckets = bucketize(items, 5);
  REQUIRE(buckets.size() == 5);
  CHECK(buckets[0].count == 1);
  CHECK(buckets[0].acc == 0.0);
  CHECK(buckets[0].conf == 0.1);
  CHECK(buckets[0].lo == 0.0);
  CHECK(buckets[0].hi == 0.2);
  for (int m = 1; m < 4; ++m) {
    CHECK(buckets[m].count == 0);
    CHECK(buckets[m].acc == 0.0);
    CHECK(buckets[m].conf == 0.0);
  }
  CHECK(buckets[4].count == 1);
  CHECK(buckets[4].acc == 1.0);
  CHECK(buckets[4].conf == 0.9);

  // s = 0 joins the first bucket; bucket edges go to the upper bucket
  auto edge = bucketize({{0.0, 0}, {0.2, 1}, {0.2000001, 1}}, 5);
  CHECK(edge[0].count == 2);
  CHECK(edge[1].count == 1);

  CHECK_THROWS_AS(bucketize({}, 5), std::runtime_error);
  CHECK_THROWS_AS(bucketize(items, 1), std::runtime_error);
  CHECK_THROWS_AS(bucketize({{1.5, 1}}, 5), std::runtime_error);
}

TEST_CASE("ece: two-bucket fixture equals 0.25") {
  // bucket (0,0.5]: conf 0.25, acc 0.5, count 2
  // bucket (0.5,1]: conf 0.75, acc 1.0, count 2
  // ECE = 0.5*0.25 + 0.5*0.25 = 0.25
  std::vector<std::pair<double, int>> items = {
      {0.25, 1}, {0.25, 0}, {0.75, 1}, {0.75, 1}};
  auto buckets = bucketize(items, 2);
  CHECK(std::fabs(ece(buckets) - 0.25) <= 1e-12);
}

TEST_CASE("ece: single occupied bucket fixture equals 0.6") {
  // 10 items at s = 0.9, 3 gold-positive: |0.3 - 0.9| = 0.6
  std::vector<std::pair<double, int>> items;
  for (int i = 0; i < 10; ++i) items.push_back({0.9, i < 3 ? 1 : 0});
  auto buckets = bucketize(items, 2);
  CHECK(std::fabs(ece(buckets) - 0.6) <= 1e-12);
}

TEST_CASE("ece is zero on a perfectly calibrated set and stays zero on refinement") {
  // scores picked exactly representable so acc == conf holds bit for bit
  std::vector<std::pair<double, int>> items;
  for (int i = 0; i < 4; ++i) items.push_back({0.25, i < 1 ? 1 : 0});
  for (int i = 0; i < 4; ++i) items.push_back({0.75, i < 3 ? 1 : 0});
  CHECK(ece(bucketize(items, 4)) == 0.0);
  CHECK(ece(bucketize(items, 8)) == 0.0);  // finer buckets keep acc == conf
}

TEST_CASE("ece stays in [0,1] on random score/label sets") {
  std::mt19937_64 gen(17);
  auto unif = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::pair<double, int>> items;
    const int n = 50 + static_cast<int>(gen() % 100);
    for (int i = 0; i < n; ++i) {
      items.push_back({unif(), static_cast<int>(gen() & 1)});
    }
    const double e = ece(bucketize(items, 2 + static_cast<int>(gen() % 10)));
    CHECK(e >= 0.0);
    CHECK(e <= 1.0);
  }
  CHECK_THROWS_AS(ece(std::vector<ReliabilityBucket>(3)), std::runtime_error);
}

TEST_CASE("join_scores_with_gold skips utterances without gold") {
  Corpus c = one_dialogue_corpus("d1", 3);
  c.dialogues[0].utterances[1].gold.reset();
  std::vector<ScoreVector> scores(1);
  scores[0].dialogue_id = "d1";
  scores[0].s = {0.1, 0.2, 0.3};
  scores[0].k = 1;
  auto items = join_scores_with_gold(c, scores);
  REQUIRE(items.size() == 2);
  CHECK(items[0].first == 0.1);
  CHECK(items[0].second == 0);
  CHECK(items[1].first == 0.3);
  CHECK(items[1].second == 0);
}

TEST_CASE("noise-free world gives (near) zero ECE at every k") {
  // gold-only corpus: p_i is the gold label itself, so with all noise off
  // every score is exactly 0 or 1 and matches gold.
  Corpus c;
  c.C = 1;
  std::mt19937_64 gen(5);
  for (int d = 0; d < 40; ++d) {
    Dialogue dlg;
    dlg.id = "n" + std::to_string(d);
    for (int i = 0; i < 8; ++i) {
      Utterance u;
      u.index = i + 1;
      u.speaker = "x";
      u.gold = std::vector<int>{static_cast<int>(gen() & 1)};
      dlg.utterances.push_back(std::move(u));
    }
    c.dialogues.push_back(std::move(dlg));
  }
  WorldConfig wc;
  wc.sigma_session = 0.0;
  wc.sigma_prompt = 0.0;
  wc.sigma_draw = 0.0;
  wc.seed = 2;
  auto curve = ece_curve(c, wc, {1, 2, 5, 10, 30}, 5);
  REQUIRE(curve.size() == 5);
  for (const auto& pt : curve) CHECK(pt.ece <= 1e-9);
}

TEST_CASE("calibrated labeler: bucket accuracy grows with confidence") {
  // sigma_session = 0 removes the only systematic bias shared across a
  // bucket; at k = 30 the reliability diagram should be monotone except
  // possibly in sparsely populated buckets.
  WorldConfig wc;
  wc.sigma_session = 0.0;
  wc.seed = 42;
  Corpus c = generate_world(wc);
  auto draws = simulate_draws(c, 30, wc);
  std::vector<ScoreVector> scores;
  for (const auto& d : draws) scores.push_back(aggregate(d));
  auto buckets = bucketize(join_scores_with_gold(c, scores), 5);
  double prev = -1.0;
  for (const auto& b : buckets) {
    if (b.count < 30) continue;
    CHECK(b.acc >= prev);
    prev = b.acc;
  }
}

TEST_CASE("ece_curve trends down on the default world") {
  WorldConfig wc;  // defaults: sigma_session 0.5, calibrated draw noise
  Corpus c = generate_world(wc);
  auto curve = ece_curve(c, wc, {1, 30}, 5);
  REQUIRE(curve.size() == 2);
  CHECK(curve[1].ece < curve[0].ece);
}

TEST_CASE("save_ece_curve writes the k,ece table with six decimals") {
  TempDir tmp;
  const std::string path = tmp.file("ece.csv");
  save_ece_curve({{1, 0.25}, {30, 0.0123456789}}, path);
  CHECK(read_file(path) == "k,ece\n1,0.250000\n30,0.012346\n");
}
