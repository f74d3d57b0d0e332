#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pairdistill/config.hpp"
#include "pairdistill/experiments.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("--config", opts.config_path, "config file (JSON)")
      ->required()
      ->check(CLI::ExistingFile);
  sub->add_option("--out", opts.out_dir, "output directory (default: config output_dir)");
  sub->add_option("--seed", opts.seed, "seed override (beats PAIRDISTILL_SEED and config)")
      ->each([&opts](const std::string&) { opts.seed_given = true; });
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pairdistill: ensemble score distillation experiments"};
  app.require_subcommand(1);

  CommonOpts opts;
  CLI::App* sub_simulate = app.add_subcommand("simulate", "write a simulated corpus and per-k score files");
  CLI::App* sub_ece = app.add_subcommand("ece", "calibration error vs ensemble size");
  CLI::App* sub_corr = app.add_subcommand("correlation", "intra vs cross session pair correlation");
  CLI::App* sub_down = app.add_subcommand("downsample", "three-arm training under scarce gold labels");
  CLI::App* sub_grad = app.add_subcommand("gradcheck", "gradient and unbiasedness checks");
  CLI::App* sub_all = app.add_subcommand("all", "run every subcommand into one directory");
  for (CLI::App* sub : {sub_simulate, sub_ece, sub_corr, sub_down, sub_grad, sub_all}) {
    add_common(sub, opts);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    pairdistill::RunConfig cfg = pairdistill::load_run_config(opts.config_path);
    std::optional<std::uint64_t> cli_seed;
    if (opts.seed_given) cli_seed = opts.seed;
    cfg.seed = pairdistill::resolve_seed(cfg, cli_seed);
    cfg.world.seed = cfg.seed;
    const std::string out = opts.out_dir.empty() ? cfg.output_dir : opts.out_dir;

    if (sub_simulate->parsed()) {
      pairdistill::cmd_simulate(cfg, out, std::cout);
    } else if (sub_ece->parsed()) {
      pairdistill::cmd_ece(cfg, out, std::cout);
    } else if (sub_corr->parsed()) {
      pairdistill::cmd_correlation(cfg, out, std::cout);
    } else if (sub_down->parsed()) {
      pairdistill::cmd_downsample(cfg, out, std::cout);
    } else if (sub_grad->parsed()) {
      if (!pairdistill::cmd_gradcheck(cfg, out, std::cout)) {
        std::cerr << "error: gradient checks failed; see " << out << "/gradcheck.txt\n";
        return 1;
      }
    } else if (sub_all->parsed()) {
      pairdistill::cmd_all(cfg, out, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
