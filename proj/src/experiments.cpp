#include "pairdistill/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include "pairdistill/corpus.hpp"
#include "pairdistill/pairing.hpp"
#include "pairdistill/rng.hpp"
#include "pairdistill/scores.hpp"
#include "pairdistill/simulator.hpp"
#include "pairdistill/student.hpp"

namespace pairdistill {

namespace {

namespace fs = std::filesystem;

template <typename Fn>
void atomic_file(const fs::path& dir, const std::string& name,
                 std::vector<std::string>& files, Fn&& writer) {
  const fs::path tmp = dir / (name + ".tmp");
  writer(tmp.string());
  fs::rename(tmp, dir / name);
  files.push_back(name);
}

std::vector<ScoreVector> aggregate_all(const std::vector<LabelerDraws>& draws) {
  std::vector<ScoreVector> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(aggregate(d, 0));
  return out;
}

const char* arm_name(Arm arm) {
  switch (arm) {
    case Arm::finetune_only:
      return "finetune_only";
    case Arm::pointwise_pretrain:
      return "pointwise_pretrain";
    case Arm::pairwise_pretrain:
      return "pairwise_pretrain";
  }
  return "?";
}

std::string fmt(const char* format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, args...);
  return std::string(buf);
}

}  // namespace

std::vector<std::string> run_simulate(const RunConfig& cfg,
                                      const std::string& out_dir,
                                      std::ostream& log) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  Corpus corpus = generate_world(cfg.world);
  atomic_file(out_dir, "corpus.jsonl", files,
              [&](const std::string& p) { save_corpus(corpus, p); });
  for (int k : cfg.experiment.k_values) {
    auto scores = aggregate_all(simulate_draws(corpus, k, cfg.world));
    atomic_file(out_dir, fmt("scores_k%d.jsonl", k), files,
                [&](const std::string& p) { save_scores(scores, p); });
  }
  log << "simulate: " << corpus.dialogues.size() << " dialogues, "
      << corpus.total_utterances() << " utterances, " << cfg.experiment.k_values.size()
      << " score files\n";
  return files;
}

std::vector<std::string> run_ece(const RunConfig& cfg, const std::string& out_dir,
                                 std::ostream& log) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  Corpus corpus = generate_world(cfg.world);
  auto curve = ece_curve(corpus, cfg.world, cfg.experiment.k_values,
                         cfg.experiment.m_buckets);
  atomic_file(out_dir, "ece.csv", files,
              [&](const std::string& p) { save_ece_curve(curve, p); });
  const auto lo = std::min_element(curve.begin(), curve.end(),
                                   [](const EcePoint& a, const EcePoint& b) { return a.k < b.k; });
  const auto hi = std::max_element(curve.begin(), curve.end(),
                                   [](const EcePoint& a, const EcePoint& b) { return a.k < b.k; });
  const char* trend = hi->ece < lo->ece ? "down" : (hi->ece > lo->ece ? "up" : "flat");
  log << fmt("ece: k=%d -> %.6f, k=%d -> %.6f, trend %s\n", lo->k, lo->ece, hi->k,
             hi->ece, trend);
  return files;
}

std::vector<std::string> run_correlation(const RunConfig& cfg,
                                         const std::string& out_dir,
                                         std::ostream& log) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  Corpus corpus = generate_world(cfg.world);
  auto scores = aggregate_all(simulate_draws(corpus, cfg.experiment.ensemble_k, cfg.world));
  auto intra = sample_pairs(corpus, scores, PairMode::intra,
                            cfg.experiment.pairs_per_dialogue, cfg.seed,
                            cfg.experiment.threshold);
  auto cross = sample_pairs(corpus, scores, PairMode::cross,
                            cfg.experiment.pairs_per_dialogue, cfg.seed,
                            cfg.experiment.threshold);
  auto table_intra = correlation_experiment(corpus, intra, cfg.experiment.m_buckets);
  auto table_cross = correlation_experiment(corpus, cross, cfg.experiment.m_buckets);

  std::vector<PreferencePair> all_pairs = intra;
  all_pairs.insert(all_pairs.end(), cross.begin(), cross.end());
  atomic_file(out_dir, "pairs.csv", files,
              [&](const std::string& p) { save_pairs(all_pairs, p); });
  atomic_file(out_dir, "correlation_intra.csv", files, [&](const std::string& p) {
    save_correlation_table(table_intra, "intra", p);
  });
  atomic_file(out_dir, "correlation_cross.csv", files, [&](const std::string& p) {
    save_correlation_table(table_cross, "cross", p);
  });
  atomic_file(out_dir, "slopes.csv", files, [&](const std::string& p) {
    save_slopes(table_intra, table_cross, p);
  });

  log << "correlation: " << intra.size() << " intra pairs, " << cross.size()
      << " cross pairs\n";
  if (table_intra.slope_defined && table_cross.slope_defined) {
    SlopeDiff sd = bootstrap_slope_diff(corpus, intra, cross, cfg.experiment.m_buckets,
                                        cfg.experiment.bootstrap_samples, cfg.seed);
    log << fmt("correlation: slope intra=%.6f cross=%.6f diff=%.6f bootstrap_se=%.6f\n",
               table_intra.slope, table_cross.slope, sd.diff, sd.se);
  } else {
    log << "correlation: slope undefined for at least one group\n";
  }
  return files;
}

std::vector<DownsampleCell> downsample_grid(const RunConfig& cfg) {
  const Arm arms[] = {Arm::finetune_only, Arm::pointwise_pretrain,
                      Arm::pairwise_pretrain};
  const int n_seeds = cfg.experiment.n_seeds;
  std::vector<DownsampleCell> cells;
  for (double f : cfg.experiment.gold_fractions) {
    for (Arm arm : arms) {
      DownsampleCell cell;
      cell.gold_fraction = f;
      cell.arm = arm;
      cell.seed_accuracy.assign(static_cast<std::size_t>(n_seeds), 0.0);
      cells.push_back(std::move(cell));
    }
  }

  std::vector<std::string> errors(static_cast<std::size_t>(n_seeds));
#pragma omp parallel for schedule(dynamic)
  for (long long r = 0; r < n_seeds; ++r) {
    try {
      const std::uint64_t seed_r =
          derive_seed(cfg.seed, stream::replicate, static_cast<std::uint64_t>(r));
      WorldConfig world = cfg.world;
      world.seed = seed_r;
      Corpus corpus = generate_world(world);
      auto scores = aggregate_all(simulate_draws(corpus, cfg.experiment.ensemble_k, world));
      PipelineConfig pc = pipeline_config(cfg, seed_r);
      for (auto& cell : cells) {
        cell.seed_accuracy[static_cast<std::size_t>(r)] =
            run_pipeline(corpus, scores, cell.gold_fraction, cell.arm, pc)
                .holdout_accuracy;
      }
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(r)] = e.what();
    }
  }
  for (const auto& err : errors) {
    if (!err.empty()) throw std::runtime_error("downsample replicate failed: " + err);
  }
  for (auto& cell : cells) {
    double sum = 0.0;
    for (double a : cell.seed_accuracy) sum += a;
    cell.mean = sum / static_cast<double>(n_seeds);
  }
  return cells;
}

std::vector<std::string> run_downsample(const RunConfig& cfg,
                                        const std::string& out_dir,
                                        std::ostream& log) {
  fs::create_directories(out_dir);
  std::vector<std::string> files;
  auto cells = downsample_grid(cfg);

  atomic_file(out_dir, "downsample.csv", files, [&](const std::string& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write '" + p + "'");
    out << "gold_fraction,arm,seed,accuracy\n";
    for (const auto& cell : cells) {
      for (std::size_t r = 0; r < cell.seed_accuracy.size(); ++r) {
        out << fmt("%.6f,%s,%zu,%.6f\n", cell.gold_fraction, arm_name(cell.arm), r,
                   cell.seed_accuracy[r]);
      }
    }
    if (!out) throw std::runtime_error("write failed for '" + p + "'");
  });

  atomic_file(out_dir, "downsample_summary.csv", files, [&](const std::string& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write '" + p + "'");
    out << "gold_fraction,arm,mean_accuracy,stddev\n";
    for (const auto& cell : cells) {
      double sq = 0.0;
      for (double a : cell.seed_accuracy) sq += (a - cell.mean) * (a - cell.mean);
      const std::size_t n = cell.seed_accuracy.size();
      const double sd = n > 1 ? std::sqrt(sq / static_cast<double>(n - 1)) : 0.0;
      out << fmt("%.6f,%s,%.6f,%.6f\n", cell.gold_fraction, arm_name(cell.arm),
                 cell.mean, sd);
    }
    if (!out) throw std::runtime_error("write failed for '" + p + "'");
  });

  for (std::size_t i = 0; i + 2 < cells.size(); i += 3) {
    log << fmt("downsample f=%.3f: finetune_only=%.4f pointwise=%.4f pairwise=%.4f\n",
               cells[i].gold_fraction, cells[i].mean, cells[i + 1].mean,
               cells[i + 2].mean);
  }
  return files;
}

GradcheckOutcome run_gradcheck(const RunConfig& cfg, const std::string& out_dir,
                               std::ostream& log, bool flip_sign) {
  fs::create_directories(out_dir);
  GradcheckOutcome outcome;
  outcome.passed = true;
  std::vector<std::string> lines;

  const int n_inst = cfg.experiment.gradcheck_instances;
  struct Combo {
    const char* loss;
    const char* arch_name;
    Arch arch;
  };
  const Combo combos[] = {{"pointwise", "linear", Arch::linear},
                          {"pointwise", "mlp1", Arch::mlp1},
                          {"pairwise", "linear", Arch::linear},
                          {"pairwise", "mlp1", Arch::mlp1}};
  for (const Combo& c : combos) {
    FdCheckResult r = std::string(c.loss) == "pointwise"
                          ? fd_check_pointwise(c.arch, 8, 4, n_inst, cfg.seed, 1e-5,
                                               flip_sign)
                          : fd_check_pairwise(c.arch, 8, 4, n_inst, cfg.seed, 1e-5,
                                              flip_sign);
    const bool ok = r.max_rel_err < 1e-5;
    outcome.passed = outcome.passed && ok;
    lines.push_back(fmt("fd %s %s: max_rel_err=%.3e worst_component=%d abs_err=%.3e %s",
                        c.loss, c.arch_name, r.max_rel_err, r.worst_component,
                        r.worst_component_err, ok ? "PASS" : "FAIL"));
  }

  for (int r = 0; r < 3; ++r) {
    auto rep = unbiased_gradient_check(
        4, cfg.experiment.gradcheck_draws,
        derive_seed(cfg.seed, stream::replicate, static_cast<std::uint64_t>(r)));
    const bool ok = rep.worst_abs_z < 4.0;
    outcome.passed = outcome.passed && ok;
    lines.push_back(fmt("unbiased seed%d: max|z|=%.3f worst_component=%d %s", r,
                        rep.worst_abs_z, rep.worst_component, ok ? "PASS" : "FAIL"));
  }
  auto control = unbiased_gradient_check(
      4, cfg.experiment.gradcheck_draws,
      derive_seed(cfg.seed, stream::replicate, 0), 0.3);
  const bool control_ok = control.worst_abs_z > 10.0;
  outcome.passed = outcome.passed && control_ok;
  lines.push_back(fmt("unbiased control: max|z|=%.3f worst_component=%d %s",
                      control.worst_abs_z, control.worst_component,
                      control_ok ? "PASS" : "FAIL"));
  lines.push_back(fmt("overall: %s", outcome.passed ? "PASS" : "FAIL"));

  atomic_file(out_dir, "gradcheck.txt", outcome.files, [&](const std::string& p) {
    std::ofstream out(p);
    if (!out) throw std::runtime_error("cannot write '" + p + "'");
    for (const auto& line : lines) out << line << "\n";
    if (!out) throw std::runtime_error("write failed for '" + p + "'");
  });
  for (const auto& line : lines) log << line << "\n";
  return outcome;
}

void write_manifest(const RunConfig& cfg, const std::string& out_dir,
                    std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  nlohmann::json j;
  j["config_hash"] = fmt("%016llx", static_cast<unsigned long long>(config_hash(cfg)));
  j["seed"] = cfg.seed;
  j["files"] = files;
  std::vector<std::string> sink;
  atomic_file(out_dir, "manifest.json", sink,
              [&](const std::string& p) {
                std::ofstream out(p);
                if (!out) throw std::runtime_error("cannot write '" + p + "'");
                out << j.dump(2) << "\n";
              });
}

void cmd_simulate(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  write_manifest(cfg, out_dir, run_simulate(cfg, out_dir, log));
}

void cmd_ece(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  write_manifest(cfg, out_dir, run_ece(cfg, out_dir, log));
}

void cmd_correlation(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  write_manifest(cfg, out_dir, run_correlation(cfg, out_dir, log));
}

void cmd_downsample(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  write_manifest(cfg, out_dir, run_downsample(cfg, out_dir, log));
}

bool cmd_gradcheck(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  auto outcome = run_gradcheck(cfg, out_dir, log);
  write_manifest(cfg, out_dir, outcome.files);
  return outcome.passed;
}

void cmd_all(const RunConfig& cfg, const std::string& out_dir, std::ostream& log) {
  std::vector<std::string> files;
  auto append = [&files](std::vector<std::string> more) {
    files.insert(files.end(), more.begin(), more.end());
  };
  append(run_simulate(cfg, out_dir, log));
  append(run_ece(cfg, out_dir, log));
  append(run_correlation(cfg, out_dir, log));
  append(run_downsample(cfg, out_dir, log));
  auto gc = run_gradcheck(cfg, out_dir, log);
  append(gc.files);
  if (!gc.passed) throw std::runtime_error("gradient checks failed; see gradcheck.txt");
  write_manifest(cfg, out_dir, files);
}

}  // namespace pairdistill
