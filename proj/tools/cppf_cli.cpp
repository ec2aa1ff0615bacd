#include "cppf/commands.hpp"
#include "cppf/config.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("-c,--config", c.config_path, "Config file (key = value, [section] headers)");
  sub->add_option("--set", c.overrides, "Override as section.key=value")->take_all();
}

cppf::RunConfig build_config(const Common& c) {
  cppf::RunConfig cfg;
  if (!c.config_path.empty()) cfg = cppf::load_config(c.config_path);
  for (const auto& o : c.overrides) cppf::apply_override(cfg, o);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace cppf::cli;
  CLI::App app{"Uncertainty-aware point-pair voting for 9D category-level pose"};
  app.require_subcommand(1);

  Common common;
  auto* gen = app.add_subcommand("gen", "Render a synthetic dataset from meshes");
  add_common(gen, common);
  std::string out_dir;
  gen->add_option("-o,--output", out_dir, "Dataset directory (overrides run.output)");

  auto* train = app.add_subcommand("train", "Train the coordinate/scale MLP on a dataset");
  add_common(train, common);
  TrainOptions train_opt;
  train->add_option("-d,--dataset", train_opt.dataset, "Dataset directory")->required();
  train->add_option("-k,--checkpoint", train_opt.checkpoint, "Checkpoint path")->required();
  train->add_flag("--resume", train_opt.resume, "Continue from the checkpoint");

  auto* infer = app.add_subcommand("infer", "Estimate poses for scenes");
  add_common(infer, common);
  InferOptions infer_opt;
  infer->add_option("-d,--dataset", infer_opt.dataset, "Dataset directory");
  infer->add_option("--scenes", infer_opt.scenes, "Scene PLY files")->excludes("--dataset");
  infer->add_option("-p,--predictor", infer_opt.predictor, "oracle, oracle:<sigma> or a checkpoint path");
  infer->add_option("--ensemble", infer_opt.ensemble, "Two or more predictors; keeps the lowest final L_coord")
      ->expected(2, -1);
  infer->add_option("-o,--output", infer_opt.output, "Predictions CSV");

  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  EvalOptions eval_opt;
  eval->add_option("--predictions", eval_opt.predictions, "Predictions CSV")->required();
  eval->add_option("-d,--dataset", eval_opt.dataset, "Dataset directory")->required();
  eval->add_option("-o,--output", eval_opt.output_dir, "Report directory");

  auto* bench = app.add_subcommand("bench", "Oracle robustness sweep over coord noise and clutter");
  add_common(bench, common);
  BenchOptions bench_opt;
  bench->add_option("--sigmas", bench_opt.coord_noise_sigmas, "Coordinate noise levels");
  bench->add_option("--clutter", bench_opt.clutter_fractions, "Clutter fractions");
  bench->add_option("-o,--output", bench_opt.output, "Bench CSV");

  auto* config = app.add_subcommand("config", "Print the effective configuration");
  add_common(config, common);
  bool dump = false;
  config->add_flag("--dump", dump, "Print every key with its value");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  cppf::RunConfig cfg;
  if (!eval->parsed()) {
    try {
      cfg = build_config(common);
    } catch (const cppf::ConfigError& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kUsage;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return kUnreadable;
    }
  }

  try {
    if (gen->parsed()) {
      if (!out_dir.empty()) cfg.output = out_dir;
      return cmd_gen(cfg, std::cout, std::cerr);
    }
    if (train->parsed()) return cmd_train(cfg, train_opt, std::cout, std::cerr);
    if (infer->parsed()) {
      if (infer_opt.dataset.empty() && infer_opt.scenes.empty()) {
        std::cerr << "error: infer needs --dataset or --scenes\n";
        return kUsage;
      }
      return cmd_infer(cfg, infer_opt, std::cout, std::cerr);
    }
    if (eval->parsed()) return cmd_eval(eval_opt, std::cout, std::cerr);
    if (bench->parsed()) return cmd_bench(cfg, bench_opt, std::cout, std::cerr);
    if (config->parsed()) {
      cfg.validate(false);
      std::cout << cppf::dump_config(cfg);
      return kOk;
    }
  } catch (const cppf::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
