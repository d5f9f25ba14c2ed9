// graspsight: planar grasp world generation, estimator training and the
// model-free vs model-based comparison bench.

#include <CLI11.hpp>

#include "graspsight/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"graspsight: self-supervised planar grasp estimation bench"};
  app.require_subcommand(1);

  gs::cli::GenOptions gen;
  gs::cli::TrainOptions train;
  gs::cli::EvalOptions eval;
  gs::cli::CompareOptions compare;
  gs::cli::RenderOptions render;

  auto add_common = [](CLI::App* cmd, gs::cli::CommonOptions& common) {
    cmd->add_option("--config", common.config_path, "JSON config file (defaults when absent)");
    cmd->add_flag("--json", common.json, "machine-readable stdout");
  };

  CLI::App* c_gen = app.add_subcommand("gen", "generate a dataset");
  add_common(c_gen, gen.common);
  c_gen->add_option("--out", gen.out_dir, "output directory")->required();
  int64_t n_records = 0;
  uint64_t seed = 0;
  int image_size = 0;
  CLI::Option* on = c_gen->add_option("--n", n_records, "record count");
  CLI::Option* os = c_gen->add_option("--seed", seed, "generation seed");
  CLI::Option* oi = c_gen->add_option("--image-size", image_size, "square image size");

  CLI::App* c_train = app.add_subcommand("train", "train one estimator");
  add_common(c_train, train.common);
  c_train->add_option("--task", train.task, "model-free | surrogate | predictive")->required();
  c_train->add_option("--data", train.data_dir, "dataset directory")->required();
  c_train->add_option("--out", train.out_ckpt, "checkpoint path")->required();

  CLI::App* c_eval = app.add_subcommand("eval", "evaluate a classifier checkpoint");
  add_common(c_eval, eval.common);
  c_eval->add_option("--ckpt", eval.ckpt_path, "checkpoint path")->required();
  c_eval->add_option("--data", eval.data_dir, "dataset directory")->required();
  c_eval->add_option("--split", eval.split, "train | val")->required();

  CLI::App* c_compare = app.add_subcommand("compare", "run the three-stage comparison");
  add_common(c_compare, compare.common);
  c_compare->add_option("--data", compare.data_dir, "dataset directory")->required();
  c_compare->add_option("--out", compare.out_dir, "report directory")->required();

  CLI::App* c_render = app.add_subcommand("render", "write a prediction grid PGM");
  add_common(c_render, render.common);
  c_render->add_option("--ckpt", render.ckpt_path, "predictive checkpoint")->required();
  c_render->add_option("--data", render.data_dir, "dataset directory")->required();
  c_render->add_option("--n", render.n, "rows in the grid");
  c_render->add_option("--out", render.out_path, "output .pgm path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : gs::cli::kExitUsage;
  }

  return gs::cli::run_guarded([&]() -> int {
    if (c_gen->parsed()) {
      if (*on) gen.count = n_records;
      if (*os) gen.seed = seed;
      if (*oi) gen.image_size = image_size;
      return gs::cli::cmd_gen(gen);
    }
    if (c_train->parsed()) return gs::cli::cmd_train(train);
    if (c_eval->parsed()) return gs::cli::cmd_eval(eval);
    if (c_compare->parsed()) return gs::cli::cmd_compare(compare);
    if (c_render->parsed()) return gs::cli::cmd_render(render);
    return gs::cli::kExitUsage;
  });
}
