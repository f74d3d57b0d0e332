// Acceptance gate: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria run against library entry points with the default
// configuration unless a criterion pins its own world.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pairdistill/config.hpp"
#include "pairdistill/experiments.hpp"
#include "pairdistill/pairing.hpp"
#include "pairdistill/rng.hpp"
#include "pairdistill/scores.hpp"
#include "pairdistill/simulator.hpp"
#include "pairdistill/student.hpp"

using namespace pairdistill;
namespace fs = std::filesystem;

namespace {

int failures = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

void criterion(int number, const std::string& name, double budget_s,
               const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome outcome;
  try {
    outcome = body();
  } catch (const std::exception& e) {
    outcome.pass = false;
    outcome.detail = std::string("exception: ") + e.what();
  }
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  bool pass = outcome.pass;
  std::string note = outcome.detail;
  if (budget_s > 0.0 && elapsed > budget_s) {
    pass = false;
    note += " [over budget]";
  }
  char timing[64];
  if (budget_s > 0.0) {
    std::snprintf(timing, sizeof(timing), "%.1fs/%.0fs", elapsed, budget_s);
  } else {
    std::snprintf(timing, sizeof(timing), "%.1fs", elapsed);
  }
  std::printf("[%s] criterion %d (%s): %s (%s)\n", pass ? "PASS" : "FAIL",
              number, name.c_str(), note.c_str(), timing);
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), format, args...);
  return std::string(buf);
}

std::vector<ScoreVector> aggregate_all(const std::vector<LabelerDraws>& draws) {
  std::vector<ScoreVector> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(aggregate(d));
  return out;
}

// --- criterion bodies -------------------------------------------------

Outcome ece_trend() {
  const RunConfig cfg;  // default world: 600 dialogues, sigma_session 0.5
  Corpus corpus = generate_world(cfg.world);
  auto curve = ece_curve(corpus, cfg.world, {1, 30}, cfg.experiment.m_buckets);
  const double e1 = curve[0].ece;
  const double e30 = curve[1].ece;
  Outcome o;
  o.pass = e30 <= 0.8 * e1;
  o.detail = fmt("ECE(k=1)=%.6f ECE(k=30)=%.6f, reduction %.1f%% (need >= 20%%)",
                 e1, e30, 100.0 * (1.0 - e30 / e1));
  return o;
}

Outcome ece_fixtures() {
  // bucket (0,0.5]: conf 0.25 acc 0.5; bucket (0.5,1]: conf 0.75 acc 1.0
  std::vector<std::pair<double, int>> two = {
      {0.25, 1}, {0.25, 0}, {0.75, 1}, {0.75, 1}};
  const double e_two = ece(bucketize(two, 2));

  // one occupied bucket: 10 items at conf 0.9, acc 0.3
  std::vector<std::pair<double, int>> one;
  for (int i = 0; i < 10; ++i) one.push_back({0.9, i < 3 ? 1 : 0});
  const double e_one = ece(bucketize(one, 2));

  Outcome o;
  o.pass = std::fabs(e_two - 0.25) <= 1e-12 && std::fabs(e_one - 0.6) <= 1e-12;
  o.detail = fmt("|%.17g - 0.25| and |%.17g - 0.6| <= 1e-12", e_two, e_one);
  return o;
}

Outcome slope_separation() {
  const RunConfig base;
  int pos = 0, within = 0;
  const int n_seeds = 5;
  std::string glance;
  for (double sigma : {1.0, 0.0}) {
    for (int r = 0; r < n_seeds; ++r) {
      const std::uint64_t seed = derive_seed(42, stream::replicate,
                                             static_cast<std::uint64_t>(r));
      WorldConfig wc = base.world;
      wc.sigma_session = sigma;
      wc.seed = seed;
      Corpus corpus = generate_world(wc);
      auto scores = aggregate_all(
          simulate_draws(corpus, base.experiment.ensemble_k, wc));
      auto intra = sample_pairs(corpus, scores, PairMode::intra,
                                base.experiment.pairs_per_dialogue, seed);
      auto cross = sample_pairs(corpus, scores, PairMode::cross,
                                base.experiment.pairs_per_dialogue, seed);
      auto sd = bootstrap_slope_diff(corpus, intra, cross,
                                     base.experiment.m_buckets,
                                     base.experiment.bootstrap_samples, seed);
      if (sigma == 1.0) {
        pos += sd.diff > 0.0;
      } else {
        within += std::fabs(sd.diff) <= 2.0 * sd.se;
        if (r == 0) glance = fmt("e.g. |%.4f| vs 2se=%.4f", sd.diff, 2 * sd.se);
      }
    }
  }
  Outcome o;
  o.pass = pos >= 4 && within >= 4;
  o.detail = fmt("sigma=1: intra>cross in %d/5 seeds (need >=4); "
                 "sigma=0: within 2se in %d/5 (%s)",
                 pos, within, glance.c_str());
  return o;
}

Outcome downsample_ordering() {
  const RunConfig cfg;  // 3 fractions x 3 arms x 5 seeds on the default world
  auto grid = downsample_grid(cfg);
  std::map<std::pair<double, Arm>, double> mean;
  for (const auto& cell : grid) mean[{cell.gold_fraction, cell.arm}] = cell.mean;
  auto at = [&](double f, Arm a) { return mean.at({f, a}); };

  const bool order_1 = at(0.01, Arm::pairwise_pretrain) >
                           at(0.01, Arm::pointwise_pretrain) &&
                       at(0.01, Arm::pointwise_pretrain) >
                           at(0.01, Arm::finetune_only);
  const bool order_5 = at(0.05, Arm::pairwise_pretrain) >
                           at(0.05, Arm::pointwise_pretrain) &&
                       at(0.05, Arm::pointwise_pretrain) >
                           at(0.05, Arm::finetune_only);
  const double gap_1 =
      at(0.01, Arm::pairwise_pretrain) - at(0.01, Arm::finetune_only);
  const double gap_25 =
      at(0.25, Arm::pairwise_pretrain) - at(0.25, Arm::finetune_only);

  Outcome o;
  o.pass = order_1 && order_5 && gap_25 < gap_1;
  o.detail = fmt("1%%: %.4f > %.4f > %.4f (%s); 5%%: %.4f > %.4f > %.4f (%s); "
                 "gap 25%%=%.4f < gap 1%%=%.4f (%s)",
                 at(0.01, Arm::pairwise_pretrain),
                 at(0.01, Arm::pointwise_pretrain),
                 at(0.01, Arm::finetune_only), order_1 ? "ok" : "violated",
                 at(0.05, Arm::pairwise_pretrain),
                 at(0.05, Arm::pointwise_pretrain),
                 at(0.05, Arm::finetune_only), order_5 ? "ok" : "violated",
                 gap_25, gap_1, gap_25 < gap_1 ? "ok" : "violated");
  return o;
}

Outcome gradient_fd() {
  double worst = 0.0;
  std::string worst_case;
  for (Arch arch : {Arch::linear, Arch::mlp1}) {
    const char* aname = arch == Arch::linear ? "linear" : "mlp1";
    auto pw = fd_check_pointwise(arch, 8, 4, 100, 2024, 1e-5);
    auto pr = fd_check_pairwise(arch, 8, 4, 100, 2025, 1e-5);
    if (pw.max_rel_err > worst) {
      worst = pw.max_rel_err;
      worst_case = fmt("pointwise %s", aname);
    }
    if (pr.max_rel_err > worst) {
      worst = pr.max_rel_err;
      worst_case = fmt("pairwise %s", aname);
    }
  }
  Outcome o;
  o.pass = worst < 1e-5;
  o.detail = fmt("max rel err %.3e (%s, 100 instances each, step 1e-5, "
                 "need < 1e-5)",
                 worst, worst_case.c_str());
  return o;
}

Outcome unbiasedness() {
  double worst_null = 0.0, worst_control = 1e300;
  for (std::uint64_t r = 0; r < 3; ++r) {
    const std::uint64_t seed = derive_seed(42, stream::replicate, r);
    auto null_rep = unbiased_gradient_check(4, 100000, seed, 0.0);
    auto control = unbiased_gradient_check(4, 100000, seed, 0.3);
    worst_null = std::max(worst_null, null_rep.worst_abs_z);
    worst_control = std::min(worst_control, control.worst_abs_z);
  }
  Outcome o;
  o.pass = worst_null < 4.0 && worst_control > 10.0;
  o.detail = fmt("calibrated max|z|=%.3f across 3 seeds (need < 4); "
                 "miscalibrated control min|z|=%.1f (need > 10)",
                 worst_null, worst_control);
  return o;
}

Outcome determinism() {
  // trimmed world keeps this quick; determinism must hold for any config
  RunConfig cfg = run_config_from_json(nlohmann::json::parse(R"({
    "seed": 7,
    "world": {"d": 8, "n_dialogues": 40, "min_utterances": 4,
              "max_utterances": 8, "sigma_session": 1.0},
    "train": {"pretrain_epochs": 5, "finetune_epochs": 5},
    "experiment": {"k_values": [1, 5], "ensemble_k": 5,
                   "gold_fractions": [0.2, 0.5], "n_seeds": 2,
                   "bootstrap_samples": 30, "gradcheck_draws": 2000,
                   "gradcheck_instances": 20}
  })"));

  const fs::path root =
      fs::temp_directory_path() / ("pairdistill_accept_" +
                                   std::to_string(::getpid()));
  fs::remove_all(root);
  std::ostringstream sink;
  cmd_all(cfg, (root / "a").string(), sink);
  cmd_all(cfg, (root / "b").string(), sink);

  auto snapshot = [](const fs::path& dir) {
    std::map<std::string, std::string> bytes;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      std::ifstream in(entry.path(), std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      bytes[fs::relative(entry.path(), dir).string()] = ss.str();
    }
    return bytes;
  };
  auto a = snapshot(root / "a");
  auto b = snapshot(root / "b");
  std::size_t files = a.size();
  bool equal = a == b;
  fs::remove_all(root);

  Outcome o;
  o.pass = equal && files > 0;
  o.detail = fmt("two cmd_all runs, seed 7: %zu files %s", files,
                 equal ? "byte-identical" : "DIFFER");
  return o;
}

Outcome pair_oracle() {
  std::mt19937_64 gen(404);
  auto unif = [&] { return static_cast<double>(gen() >> 11) * 0x1.0p-53; };
  int cases = 0, matched = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(gen() % 5);  // 2..6 utterances
    std::vector<double> s;
    for (int i = 0; i < n; ++i) {
      const double r = unif();
      s.push_back(r < 0.15 ? 0.5 : r);  // include abstaining segments
    }

    Corpus corpus;
    corpus.C = 1;
    Dialogue dlg;
    dlg.id = "d";
    for (int i = 0; i < n; ++i) {
      Utterance u;
      u.index = i + 1;
      u.speaker = "x";
      u.gold = std::vector<int>{s[i] > 0.5 ? 1 : 0};
      dlg.utterances.push_back(std::move(u));
    }
    corpus.dialogues.push_back(std::move(dlg));
    std::vector<ScoreVector> scores(1);
    scores[0].dialogue_id = "d";
    scores[0].s = s;
    scores[0].k = 1000;

    std::set<std::pair<int, int>> expected;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != j && s[i] > 0.5 && s[j] < 0.5) expected.insert({i + 1, j + 1});
      }
    }
    std::set<std::pair<int, int>> observed;
    for (const auto& p :
         sample_pairs(corpus, scores, PairMode::intra, 200,
                      static_cast<std::uint64_t>(5000 + trial))) {
      observed.insert({p.end_a, p.end_b});
    }
    ++cases;
    matched += observed == expected;
  }
  Outcome o;
  o.pass = matched == cases;
  o.detail = fmt("sampler support equals brute-force enumeration in %d/%d "
                 "random dialogues (n <= 6)",
                 matched, cases);
  return o;
}

}  // namespace

int main() {
  std::printf("acceptance suite\n");
  criterion(1, "ECE trend on the default world", 30.0, ece_trend);
  criterion(2, "ECE bucket fixtures to 1e-12", 0.0, ece_fixtures);
  criterion(3, "intra vs cross slope separation", 60.0, slope_separation);
  criterion(4, "downsample arm ordering", 300.0, downsample_ordering);
  criterion(5, "finite-difference gradient check", 10.0, gradient_fd);
  criterion(6, "soft-vs-gold gradient unbiasedness", 30.0, unbiasedness);
  criterion(7, "cmd_all byte-identical reruns", 0.0, determinism);
  criterion(8, "brute-force pair oracle", 0.0, pair_oracle);

  if (failures == 0) {
    std::printf("all criteria passed\n");
    return 0;
  }
  std::printf("%d criterion(s) failed\n", failures);
  return 1;
}
