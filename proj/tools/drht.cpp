// drht: dataset generation, training, inference and evaluation.

#include <exception>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "drht/cli.hpp"
#include "drht/parallel.hpp"

namespace {

struct ConfigFlags {
  std::string config;
  std::vector<std::string> overrides;

  void add_to(CLI::App& cmd, bool required) {
    auto* opt = cmd.add_option("--config", config, "Training/data configuration (JSON)")->check(CLI::ExistingFile);
    if (required) opt->required();
    cmd.add_option("--set", overrides,
                   "Override a config field, e.g. --set schedule.batch_size=2 (repeatable; wins over the file)");
  }

  drht::TrainConfig resolve() const {
    std::optional<std::filesystem::path> path;
    if (!config.empty()) path = config;
    return drht::resolve_config(path, overrides);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deep reciprocating HDR transformation: exposure correction through the HDR domain"};
  app.require_subcommand(1);

  ConfigFlags gen_cfg;
  std::string gen_out;
  std::size_t gen_scenes = 0;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic triplet dataset");
  gen_cfg.add_to(*gen, false);
  gen->add_option("--out-dir", gen_out, "Output directory")->required();
  gen->add_option("--scenes", gen_scenes, "Number of synthetic scenes")->required();

  ConfigFlags train_cfg;
  std::string train_data, train_out, train_resume;
  bool pretrain_only = false;
  auto* train = app.add_subcommand("train", "Pretrain f1, then train f1 and f2 jointly");
  train_cfg.add_to(*train, false);
  train->add_option("--data", train_data, "Dataset directory or dataset.json")->required();
  train->add_option("--out", train_out, "Checkpoint directory to write")->required();
  train->add_flag("--pretrain-only", pretrain_only, "Stop after pretraining f1");
  train->add_option("--resume", train_resume, "Checkpoint directory to continue from");

  std::string infer_ckpt, infer_in, infer_out, infer_hdr;
  auto* infer = app.add_subcommand("infer", "Correct one LDR image");
  infer->add_option("--ckpt", infer_ckpt, "Checkpoint directory")->required();
  infer->add_option("--in", infer_in, "Input image (binary PPM)")->required()->check(CLI::ExistingFile);
  infer->add_option("--out", infer_out, "Corrected image (binary PPM)")->required();
  infer->add_option("--dump-hdr", infer_hdr, "Also write the estimated radiance (PFM)");

  std::string eval_pairs, eval_report;
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM/FSIM over prediction/reference pairs");
  eval->add_option("--pairs", eval_pairs, "JSON manifest {\"pairs\": [{\"prediction\", \"reference\"}]}")->required();
  eval->add_option("--report", eval_report, "Report JSON to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    drht::configure_threads_from_env();
    if (gen->parsed()) {
      drht::cmd_gen_data({gen_cfg.resolve(), gen_out, gen_scenes}, std::cout);
    } else if (train->parsed()) {
      drht::TrainOptions opt{train_cfg.resolve(), train_data, train_out, pretrain_only, std::nullopt};
      if (!train_resume.empty()) opt.resume = train_resume;
      drht::cmd_train(opt, std::cout);
    } else if (infer->parsed()) {
      drht::InferOptions opt{infer_ckpt, infer_in, infer_out, std::nullopt};
      if (!infer_hdr.empty()) opt.dump_hdr = infer_hdr;
      drht::cmd_infer(opt, std::cout);
    } else if (eval->parsed()) {
      return drht::cmd_eval({eval_pairs, eval_report}, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
