#include "pairdistill/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <stdexcept>

#include "pairdistill/rng.hpp"

namespace pairdistill {

namespace {

using nlohmann::json;

void check_keys(const json& j, const std::string& section,
                std::initializer_list<const char*> allowed) {
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.count(key)) {
      throw std::runtime_error("config: unknown key '" + key + "' in " + section);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_world(const json& j, WorldConfig& w) {
  check_keys(j, "world",
             {"d", "n_dialogues", "min_utterances", "max_utterances", "w_star",
              "w_star_norm", "sigma_session", "sigma_prompt", "sigma_draw"});
  read(j, "d", w.d);
  read(j, "n_dialogues", w.n_dialogues);
  read(j, "min_utterances", w.min_utterances);
  read(j, "max_utterances", w.max_utterances);
  read(j, "w_star", w.w_star);
  read(j, "w_star_norm", w.w_star_norm);
  read(j, "sigma_session", w.sigma_session);
  read(j, "sigma_prompt", w.sigma_prompt);
  read(j, "sigma_draw", w.sigma_draw);
  if (w.d < 1) throw std::runtime_error("config: world.d must be >= 1");
  if (w.n_dialogues < 1) {
    throw std::runtime_error("config: world.n_dialogues must be >= 1");
  }
  if (w.min_utterances < 1 || w.max_utterances < w.min_utterances) {
    throw std::runtime_error("config: world utterance range invalid");
  }
  if (w.sigma_session < 0 || w.sigma_prompt < 0 || w.sigma_draw < 0) {
    throw std::runtime_error("config: world sigmas must be >= 0");
  }
  if (!w.w_star.empty() && static_cast<int>(w.w_star.size()) != w.d) {
    throw std::runtime_error("config: world.w_star length must equal world.d");
  }
}

void parse_segmentation(const json& j, SegmentationConfig& s) {
  check_keys(j, "segmentation", {"window", "gamma"});
  read(j, "window", s.window);
  read(j, "gamma", s.gamma);
  if (s.window < 0) throw std::runtime_error("config: segmentation.window must be >= 0");
  if (!(s.gamma > 0.0 && s.gamma <= 1.0)) {
    throw std::runtime_error("config: segmentation.gamma must be in (0, 1]");
  }
}

void parse_train(const json& j, TrainSection& t) {
  check_keys(j, "train",
             {"arch", "hidden", "learning_rate", "batch_size", "alpha", "l2",
              "pretrain_epochs", "finetune_epochs"});
  if (j.contains("arch")) {
    const std::string arch = j.at("arch").get<std::string>();
    if (arch == "linear") {
      t.arch = Arch::linear;
    } else if (arch == "mlp1") {
      t.arch = Arch::mlp1;
    } else {
      throw std::runtime_error("config: train.arch must be 'linear' or 'mlp1', got '" +
                               arch + "'");
    }
  }
  read(j, "hidden", t.hidden);
  read(j, "learning_rate", t.learning_rate);
  read(j, "batch_size", t.batch_size);
  read(j, "alpha", t.alpha);
  read(j, "l2", t.l2);
  read(j, "pretrain_epochs", t.pretrain_epochs);
  read(j, "finetune_epochs", t.finetune_epochs);
  if (t.arch == Arch::mlp1 && t.hidden < 1) {
    throw std::runtime_error("config: train.hidden must be >= 1 for mlp1");
  }
  if (t.learning_rate <= 0.0) throw std::runtime_error("config: train.learning_rate must be > 0");
  if (t.batch_size < 1) throw std::runtime_error("config: train.batch_size must be >= 1");
  if (t.alpha < 0.0 || t.alpha > 1.0) {
    throw std::runtime_error("config: train.alpha must be in [0, 1]");
  }
  if (t.l2 < 0.0) throw std::runtime_error("config: train.l2 must be >= 0");
  if (t.pretrain_epochs < 0 || t.finetune_epochs < 0) {
    throw std::runtime_error("config: train epochs must be >= 0");
  }
}

void parse_experiment(const json& j, ExperimentConfig& e) {
  check_keys(j, "experiment",
             {"k_values", "m_buckets", "ensemble_k", "pairs_per_dialogue",
              "threshold", "gold_fractions", "n_seeds", "holdout_fraction",
              "bootstrap_samples", "gradcheck_draws", "gradcheck_instances"});
  read(j, "k_values", e.k_values);
  read(j, "m_buckets", e.m_buckets);
  read(j, "ensemble_k", e.ensemble_k);
  read(j, "pairs_per_dialogue", e.pairs_per_dialogue);
  read(j, "threshold", e.threshold);
  read(j, "gold_fractions", e.gold_fractions);
  read(j, "n_seeds", e.n_seeds);
  read(j, "holdout_fraction", e.holdout_fraction);
  read(j, "bootstrap_samples", e.bootstrap_samples);
  read(j, "gradcheck_draws", e.gradcheck_draws);
  read(j, "gradcheck_instances", e.gradcheck_instances);
  if (e.k_values.empty()) throw std::runtime_error("config: experiment.k_values is empty");
  std::set<int> seen;
  for (int k : e.k_values) {
    if (k < 1) throw std::runtime_error("config: experiment.k_values entries must be >= 1");
    if (!seen.insert(k).second) {
      throw std::runtime_error("config: experiment.k_values must be distinct");
    }
  }
  if (e.m_buckets < 2) throw std::runtime_error("config: experiment.m_buckets must be >= 2");
  if (e.ensemble_k < 1) throw std::runtime_error("config: experiment.ensemble_k must be >= 1");
  if (e.pairs_per_dialogue < 1) {
    throw std::runtime_error("config: experiment.pairs_per_dialogue must be >= 1");
  }
  if (!(e.threshold > 0.0 && e.threshold < 1.0)) {
    throw std::runtime_error("config: experiment.threshold must be in (0, 1)");
  }
  if (e.gold_fractions.empty()) {
    throw std::runtime_error("config: experiment.gold_fractions is empty");
  }
  for (double f : e.gold_fractions) {
    if (!(f > 0.0 && f <= 1.0)) {
      throw std::runtime_error("config: experiment.gold_fractions entries must be in (0, 1]");
    }
  }
  if (e.n_seeds < 1) throw std::runtime_error("config: experiment.n_seeds must be >= 1");
  if (!(e.holdout_fraction > 0.0 && e.holdout_fraction < 1.0)) {
    throw std::runtime_error("config: experiment.holdout_fraction must be in (0, 1)");
  }
  if (e.bootstrap_samples < 10) {
    throw std::runtime_error("config: experiment.bootstrap_samples must be >= 10");
  }
  if (e.gradcheck_draws < 1000) {
    throw std::runtime_error("config: experiment.gradcheck_draws must be >= 1000");
  }
  if (e.gradcheck_instances < 1) {
    throw std::runtime_error("config: experiment.gradcheck_instances must be >= 1");
  }
}

}  // namespace

RunConfig run_config_from_json(const nlohmann::json& j) {
  check_keys(j, "config root",
             {"world", "segmentation", "train", "experiment", "output_dir", "seed"});
  RunConfig cfg;
  if (j.contains("world")) parse_world(j.at("world"), cfg.world);
  if (j.contains("segmentation")) parse_segmentation(j.at("segmentation"), cfg.segmentation);
  if (j.contains("train")) parse_train(j.at("train"), cfg.train);
  if (j.contains("experiment")) parse_experiment(j.at("experiment"), cfg.experiment);
  read(j, "output_dir", cfg.output_dir);
  read(j, "seed", cfg.seed);
  if (cfg.output_dir.empty()) throw std::runtime_error("config: output_dir is empty");
  cfg.world.seed = cfg.seed;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }
  return run_config_from_json(j);
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["world"] = {{"d", cfg.world.d},
                {"n_dialogues", cfg.world.n_dialogues},
                {"min_utterances", cfg.world.min_utterances},
                {"max_utterances", cfg.world.max_utterances},
                {"w_star", cfg.world.w_star},
                {"w_star_norm", cfg.world.w_star_norm},
                {"sigma_session", cfg.world.sigma_session},
                {"sigma_prompt", cfg.world.sigma_prompt},
                {"sigma_draw", cfg.world.sigma_draw}};
  j["segmentation"] = {{"window", cfg.segmentation.window},
                       {"gamma", cfg.segmentation.gamma}};
  j["train"] = {{"arch", cfg.train.arch == Arch::linear ? "linear" : "mlp1"},
                {"hidden", cfg.train.hidden},
                {"learning_rate", cfg.train.learning_rate},
                {"batch_size", cfg.train.batch_size},
                {"alpha", cfg.train.alpha},
                {"l2", cfg.train.l2},
                {"pretrain_epochs", cfg.train.pretrain_epochs},
                {"finetune_epochs", cfg.train.finetune_epochs}};
  j["experiment"] = {{"k_values", cfg.experiment.k_values},
                     {"m_buckets", cfg.experiment.m_buckets},
                     {"ensemble_k", cfg.experiment.ensemble_k},
                     {"pairs_per_dialogue", cfg.experiment.pairs_per_dialogue},
                     {"threshold", cfg.experiment.threshold},
                     {"gold_fractions", cfg.experiment.gold_fractions},
                     {"n_seeds", cfg.experiment.n_seeds},
                     {"holdout_fraction", cfg.experiment.holdout_fraction},
                     {"bootstrap_samples", cfg.experiment.bootstrap_samples},
                     {"gradcheck_draws", cfg.experiment.gradcheck_draws},
                     {"gradcheck_instances", cfg.experiment.gradcheck_instances}};
  j["output_dir"] = cfg.output_dir;
  j["seed"] = cfg.seed;
  return j;
}

std::uint64_t config_hash(const RunConfig& cfg) {
  return fnv1a64(run_config_to_json(cfg).dump());
}

std::uint64_t resolve_seed(const RunConfig& cfg,
                           std::optional<std::uint64_t> cli_seed) {
  if (cli_seed) return *cli_seed;
  if (const char* env = std::getenv("PAIRDISTILL_SEED")) {
    const std::string text(env);
    if (text.empty()) {
      throw std::runtime_error("PAIRDISTILL_SEED is set but empty");
    }
    char* end = nullptr;
    errno = 0;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (errno != 0 || end == text.c_str() || *end != '\0') {
      throw std::runtime_error("PAIRDISTILL_SEED is not a valid unsigned integer: '" +
                               text + "'");
    }
    return static_cast<std::uint64_t>(v);
  }
  return cfg.seed;
}

PipelineConfig pipeline_config(const RunConfig& cfg, std::uint64_t seed) {
  PipelineConfig pc;
  pc.arch = cfg.train.arch;
  pc.hidden = cfg.train.hidden;
  pc.window = cfg.segmentation.window;
  pc.gamma = cfg.segmentation.gamma;
  pc.pairs_per_dialogue = cfg.experiment.pairs_per_dialogue;
  pc.holdout_fraction = cfg.experiment.holdout_fraction;
  pc.threshold = cfg.experiment.threshold;
  pc.pretrain.learning_rate = cfg.train.learning_rate;
  pc.pretrain.epochs = cfg.train.pretrain_epochs;
  pc.pretrain.batch_size = cfg.train.batch_size;
  pc.pretrain.alpha = cfg.train.alpha;
  pc.pretrain.l2 = cfg.train.l2;
  pc.finetune = pc.pretrain;
  pc.finetune.epochs = cfg.train.finetune_epochs;
  pc.seed = seed;
  return pc;
}

}  // namespace pairdistill
