#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pairdistill/simulator.hpp"
#include "pairdistill/student.hpp"

namespace pairdistill {

struct SegmentationConfig {
  int window = 4;      // 0 = unbounded prefix
  double gamma = 0.6;  // recency weight in (0, 1]
};

struct TrainSection {
  Arch arch = Arch::linear;
  int hidden = 8;
  double learning_rate = 0.1;
  int batch_size = 32;
  double alpha = 0.5;
  double l2 = 0.0;
  int pretrain_epochs = 40;
  int finetune_epochs = 20;
};

struct ExperimentConfig {
  std::vector<int> k_values = {1, 2, 5, 10, 30};
  int m_buckets = 5;
  int ensemble_k = 30;
  int pairs_per_dialogue = 6;
  double threshold = 0.5;
  std::vector<double> gold_fractions = {0.01, 0.05, 0.25};
  int n_seeds = 5;
  double holdout_fraction = 0.3;
  int bootstrap_samples = 200;
  int gradcheck_draws = 100000;
  int gradcheck_instances = 200;
};

// Harness configuration, loaded from a JSON file. Every key is optional and
// falls back to the defaults above; unknown keys are rejected.
struct RunConfig {
  WorldConfig world;
  SegmentationConfig segmentation;
  TrainSection train;
  ExperimentConfig experiment;
  std::string output_dir = "out";
  std::uint64_t seed = 42;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
// Canonical resolved form (defaults filled in); hashing this means a change
// of defaults shows up in manifests.
nlohmann::json run_config_to_json(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

// Seed precedence: --seed flag, then PAIRDISTILL_SEED, then the config file.
std::uint64_t resolve_seed(const RunConfig& cfg,
                           std::optional<std::uint64_t> cli_seed);

// PipelineConfig assembled from the config sections, with the given seed.
PipelineConfig pipeline_config(const RunConfig& cfg, std::uint64_t seed);

}  // namespace pairdistill
