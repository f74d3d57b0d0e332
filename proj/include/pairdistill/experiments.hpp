#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "pairdistill/config.hpp"

namespace pairdistill {

// Experiment drivers behind the CLI subcommands. Each writes its output
// files (atomically, via temp-file rename) into out_dir and returns the
// relative names of the files it produced; the cmd_* wrappers add a
// manifest.json recording config hash, seed and file list. All drivers are
// pure functions of (config, seed): equal inputs give byte-identical trees.
std::vector<std::string> run_simulate(const RunConfig& cfg,
                                      const std::string& out_dir,
                                      std::ostream& log);
std::vector<std::string> run_ece(const RunConfig& cfg, const std::string& out_dir,
                                 std::ostream& log);
std::vector<std::string> run_correlation(const RunConfig& cfg,
                                         const std::string& out_dir,
                                         std::ostream& log);
std::vector<std::string> run_downsample(const RunConfig& cfg,
                                        const std::string& out_dir,
                                        std::ostream& log);

struct GradcheckOutcome {
  std::vector<std::string> files;
  bool passed = false;
};

// flip_sign negates the analytic gradients inside the finite-difference
// comparison — a mutation hook used by tests to prove the report can fail.
GradcheckOutcome run_gradcheck(const RunConfig& cfg, const std::string& out_dir,
                               std::ostream& log, bool flip_sign = false);

void write_manifest(const RunConfig& cfg, const std::string& out_dir,
                    std::vector<std::string> files);

void cmd_simulate(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
void cmd_ece(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
void cmd_correlation(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
void cmd_downsample(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
// Returns false when a gradient check fails (callers exit nonzero).
bool cmd_gradcheck(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);
// Chains all subcommands into one directory with a single manifest; throws
// if the gradient checks fail.
void cmd_all(const RunConfig& cfg, const std::string& out_dir, std::ostream& log);

// Seed-mean holdout accuracy per (gold_fraction, arm); shared by
// run_downsample and the acceptance suite.
struct DownsampleCell {
  double gold_fraction = 0.0;
  Arm arm = Arm::finetune_only;
  std::vector<double> seed_accuracy;
  double mean = 0.0;
};
std::vector<DownsampleCell> downsample_grid(const RunConfig& cfg);

}  // namespace pairdistill
