#include <cmath>
#include <cstdlib>
#include <numeric>
#include <random>
#include <stdexcept>
#include <omp.h>

#include "doctest.h"
#include "pairdistill/corpus.hpp"
#include "pairdistill/scores.hpp"
#include "pairdistill/simulator.hpp"

using namespace pairdistill;

namespace {

bool same_corpus(const Corpus& a, const Corpus& b) {
  if (a.d != b.d || a.C != b.C || a.dialogues.size() != b.dialogues.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.dialogues.size(); ++i) {
    const Dialogue& da = a.dialogues[i];
    const Dialogue& db = b.dialogues[i];
    if (da.id != db.id || da.n() != db.n()) return false;
    for (int u = 0; u < da.n(); ++u) {
      if (da.utterances[u].features != db.utterances[u].features) return false;
      if (da.utterances[u].gold != db.utterances[u].gold) return false;
    }
  }
  return true;
}

bool same_draws(const std::vector<LabelerDraws>& a,
                const std::vector<LabelerDraws>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].dialogue_id != b[i].dialogue_id || a[i].n != b[i].n ||
        a[i].k != b[i].k || a[i].s != b[i].s ||
        a[i].session_bias != b[i].session_bias) {
      return false;
    }
  }
  return true;
}

// Corpus with gold labels but no features: the labeler's true probability
// falls back to the gold label itself.
Corpus gold_only_corpus(int n_dialogues, int n_utt, std::uint64_t seed) {
  Corpus c;
  c.C = 1;
  std::mt19937_64 gen(seed);
  for (int d = 0; d < n_dialogues; ++d) {
    Dialogue dlg;
    dlg.id = "g" + std::to_string(d);
    for (int i = 0; i < n_utt; ++i) {
      Utterance u;
      u.index = i + 1;
      u.speaker = "x";
      u.gold = std::vector<int>{static_cast<int>(gen() & 1)};
      dlg.utterances.push_back(std::move(u));
    }
    c.dialogues.push_back(std::move(dlg));
  }
  return c;
}

}  // namespace

TEST_CASE("generate_world respects the config shape") {
  WorldConfig wc;
  wc.n_dialogues = 40;
  wc.d = 6;
  wc.min_utterances = 3;
  wc.max_utterances = 9;
  wc.seed = 7;
  Corpus c = generate_world(wc);
  REQUIRE(c.dialogues.size() == 40);
  CHECK(c.d == 6);
  CHECK(c.C == 1);
  for (const auto& dlg : c.dialogues) {
    CHECK(dlg.n() >= 3);
    CHECK(dlg.n() <= 9);
    for (const auto& u : dlg.utterances) {
      REQUIRE(u.features.has_value());
      CHECK(u.features->size() == 6);
      REQUIRE(u.gold.has_value());
      CHECK(u.gold->size() == 1);
    }
  }
  CHECK_NOTHROW(validate_corpus(c));
}

TEST_CASE("generate_world is deterministic in the seed") {
  WorldConfig wc;
  wc.n_dialogues = 25;
  wc.seed = 123;
  Corpus a = generate_world(wc);
  Corpus b = generate_world(wc);
  CHECK(same_corpus(a, b));

  wc.seed = 124;
  Corpus c = generate_world(wc);
  CHECK_FALSE(same_corpus(a, c));
}

TEST_CASE("generate_world parallel matches serial bit for bit") {
  WorldConfig wc;
  wc.n_dialogues = 60;
  wc.seed = 5;
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  Corpus par = generate_world(wc);
  omp_set_num_threads(saved);
  Corpus ser = generate_world_serial(wc);
  CHECK(same_corpus(par, ser));
}

TEST_CASE("generate_world rejects degenerate configs") {
  WorldConfig wc;
  wc.n_dialogues = 0;
  CHECK_THROWS_WITH_AS(generate_world(wc), doctest::Contains("empty world"),
                       std::runtime_error);

  WorldConfig bad;
  bad.min_utterances = 5;
  bad.max_utterances = 4;
  CHECK_THROWS_AS(generate_world(bad), std::runtime_error);
}

TEST_CASE("resolve_w_star checks an explicit vector against d") {
  WorldConfig wc;
  wc.d = 3;
  wc.w_star = {1.0, 2.0};
  CHECK_THROWS_AS(resolve_w_star(wc), std::runtime_error);

  wc.w_star = {1.0, 2.0, 2.0};
  auto w = resolve_w_star(wc);
  REQUIRE(w.size() == 3);
  CHECK(w[0] == 1.0);

  // drawn direction is scaled to the requested norm
  WorldConfig drawn;
  drawn.d = 10;
  drawn.w_star_norm = 2.5;
  auto v = resolve_w_star(drawn);
  double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  CHECK(norm == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("w* = 0 makes gold labels fair coin flips") {
  WorldConfig wc;
  wc.n_dialogues = 400;
  wc.w_star = std::vector<double>(24, 0.0);
  wc.seed = 11;
  Corpus c = generate_world(wc);
  std::size_t pos = 0, total = 0;
  for (const auto& dlg : c.dialogues) {
    for (const auto& u : dlg.utterances) {
      pos += (*u.gold)[0];
      ++total;
    }
  }
  const double rate = static_cast<double>(pos) / total;
  // ~5600 draws; a fair coin stays within 0.03 of 0.5 with huge probability
  CHECK(rate > 0.45);
  CHECK(rate < 0.55);
}

TEST_CASE("huge w* norm saturates the gold labels") {
  WorldConfig wc;
  wc.n_dialogues = 200;
  wc.w_star_norm = 100.0;
  wc.seed = 3;
  Corpus c = generate_world(wc);
  const auto w = resolve_w_star(wc);
  std::size_t agree = 0, total = 0;
  for (const auto& dlg : c.dialogues) {
    for (const auto& u : dlg.utterances) {
      double z = 0.0;
      for (int j = 0; j < c.d; ++j) z += w[j] * (*u.features)[j];
      agree += (*u.gold)[0] == (z > 0.0 ? 1 : 0);
      ++total;
    }
  }
  CHECK(static_cast<double>(agree) / total > 0.99);
}

TEST_CASE("simulate_draws is deterministic and shape-correct") {
  WorldConfig wc;
  wc.n_dialogues = 30;
  wc.seed = 17;
  Corpus c = generate_world(wc);
  auto a = simulate_draws(c, 7, wc);
  auto b = simulate_draws(c, 7, wc);
  REQUIRE(a.size() == c.dialogues.size());
  CHECK(same_draws(a, b));
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].dialogue_id == c.dialogues[i].id);
    CHECK(a[i].n == c.dialogues[i].n());
    CHECK(a[i].k == 7);
    CHECK(a[i].s.size() == static_cast<std::size_t>(a[i].n) * 7);
  }
  CHECK_THROWS_AS(simulate_draws(c, 0, wc), std::runtime_error);
}

TEST_CASE("simulate_draws parallel matches serial bit for bit") {
  WorldConfig wc;
  wc.n_dialogues = 50;
  wc.seed = 29;
  Corpus c = generate_world(wc);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(4);
  auto par = simulate_draws(c, 10, wc);
  omp_set_num_threads(saved);
  auto ser = simulate_draws_serial(c, 10, wc);
  CHECK(same_draws(par, ser));
}

TEST_CASE("noise-free labeler reproduces the gold labels exactly") {
  Corpus c = gold_only_corpus(20, 6, 42);
  WorldConfig wc;
  wc.sigma_session = 0.0;
  wc.sigma_prompt = 0.0;
  wc.sigma_draw = 0.0;
  wc.seed = 1;
  auto draws = simulate_draws(c, 5, wc);
  for (std::size_t d = 0; d < draws.size(); ++d) {
    for (int i = 0; i < draws[d].n; ++i) {
      const int y = (*c.dialogues[d].utterances[i].gold)[0];
      for (int j = 0; j < draws[d].k; ++j) {
        CHECK(draws[d].at(i, j) == y);
      }
    }
  }
}

TEST_CASE("session bias is one draw per dialogue, shared across k") {
  WorldConfig wc;
  wc.n_dialogues = 15;
  wc.sigma_session = 2.0;
  wc.seed = 8;
  Corpus c = generate_world(wc);
  auto k1 = simulate_draws(c, 1, wc);
  auto k30 = simulate_draws(c, 30, wc);
  bool any_nonzero = false;
  for (std::size_t d = 0; d < k1.size(); ++d) {
    CHECK(k1[d].session_bias == k30[d].session_bias);
    if (k1[d].session_bias != 0.0) any_nonzero = true;
  }
  CHECK(any_nonzero);
  // distinct dialogues get distinct biases
  CHECK(k1[0].session_bias != k1[1].session_bias);
}

TEST_CASE("score shift within a dialogue shares the sign of its session bias") {
  // strong session bias, no prompt bias: the expected score of utterance i
  // is mean_j sigmoid(logit p_i + b_D), so every shift from sigmoid(logit p_i)
  // inherits sign(b_D) in expectation; k=30 sampling noise flips a few.
  WorldConfig wc;
  wc.n_dialogues = 100;
  wc.sigma_session = 3.0;
  wc.sigma_prompt = 0.0;
  wc.seed = 7;
  Corpus c = generate_world(wc);
  const auto w = resolve_w_star(wc);
  auto draws = simulate_draws(c, 30, wc);
  std::size_t agree = 0, total = 0;
  for (std::size_t d = 0; d < draws.size(); ++d) {
    const auto& dlg = c.dialogues[d];
    const auto score = aggregate(draws[d]);
    for (int i = 0; i < dlg.n(); ++i) {
      double z = 0.0;
      for (int j = 0; j < c.d; ++j) z += w[j] * (*dlg.utterances[i].features)[j];
      const double shift = score.s[i] - sigmoid(z);
      if (shift == 0.0) continue;
      ++total;
      agree += (shift > 0.0) == (draws[d].session_bias > 0.0);
    }
  }
  CHECK(static_cast<double>(agree) / total >= 0.90);
}

TEST_CASE("score variance shrinks as the ensemble grows") {
  WorldConfig wc;
  wc.n_dialogues = 200;
  wc.seed = 7;
  Corpus c = generate_world(wc);
  auto replicate_variance = [&](int k) {
    WorldConfig wa = wc, wb = wc;
    wa.seed = 1001;
    wb.seed = 2002;
    auto da = simulate_draws(c, k, wa);
    auto db = simulate_draws(c, k, wb);
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t d = 0; d < da.size(); ++d) {
      const auto sa = aggregate(da[d]);
      const auto sb = aggregate(db[d]);
      for (std::size_t i = 0; i < sa.s.size(); ++i) {
        const double diff = sa.s[i] - sb.s[i];
        acc += diff * diff / 2.0;  // unbiased per-utterance variance estimate
        ++n;
      }
    }
    return acc / static_cast<double>(n);
  };
  CHECK(replicate_variance(30) < replicate_variance(5));
}

TEST_CASE("clamped_logit and sigmoid are inverses inside the clamp") {
  CHECK(clamped_logit(0.5) == 0.0);
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(clamped_logit(1.0) == 30.0);
  CHECK(clamped_logit(0.0) == -30.0);
  for (double p : {0.1, 0.25, 0.5, 0.9, 0.999}) {
    CHECK(sigmoid(clamped_logit(p)) == doctest::Approx(p).epsilon(1e-12));
  }
}
