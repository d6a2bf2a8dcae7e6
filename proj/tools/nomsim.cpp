// nomsim: synthetic-data generation, training, rollout, evaluation, and
// plotting for the graph-network ocean simulator.

#include <CLI11.hpp>
#include <iostream>

#include "nom/run.hpp"
#include "nom/stack.hpp"

int main(int argc, char** argv) {
  CLI::App app{"graph-network simulator for slow-changing gridded fields"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand

  std::string config_path;
  std::vector<std::string> overrides;
  std::vector<std::string> ablations;
  app.add_option("--config", config_path, "TOML config file");
  app.add_option("--set", overrides, "override config key, e.g. train.batch=8")->take_all();
  app.add_option("--ablate", ablations,
                 "ablation flag: prc=on|off, pei=on|off, mana=adaptive|sum_only|mean_only, "
                 "climatology=on|off")
      ->take_all();

  auto* gen = app.add_subcommand("gen-data", "generate synthetic splits, climatology, norm stats");
  bool force = false;
  gen->add_flag("--force", force, "overwrite existing outputs");

  auto* train = app.add_subcommand("train", "run the staged training schedule");
  bool resume = false;
  train->add_flag("--resume", resume, "continue from existing phase checkpoints");

  auto* roll = app.add_subcommand("rollout", "autoregressive rollout from a test-split state");
  int init_index = 0, horizon = 10;
  std::string out_path;
  roll->add_option("--init", init_index, "initial record index in the test split");
  roll->add_option("--horizon", horizon, "number of autoregressive steps");
  roll->add_option("--out", out_path, "trajectory output file");

  auto* eval = app.add_subcommand("evaluate", "score rollouts against the test split");
  std::string eval_out;
  eval->add_option("--out", eval_out, "metrics CSV output file");

  auto* plot = app.add_subcommand("plot", "render a field as a PPM heatmap");
  nom::PlotSpec spec;
  plot->add_option("--input", spec.input, "NOMF file (trajectory or split)")->required();
  plot->add_option("--variable", spec.variable, "channel name")->required();
  plot->add_option("--record", spec.record, "record index");
  plot->add_option("--vmin", spec.vmin, "colormap minimum");
  plot->add_option("--vmax", spec.vmax, "colormap maximum");
  plot->add_option("--out", spec.out_image, "output PPM path")->required();
  plot->add_option("--csv", spec.out_csv, "optional raw-value CSV dump");

  auto* inspect = app.add_subcommand("inspect-graph", "print node/edge counts per mesh level");
  std::string dump_path;
  inspect->add_option("--dump", dump_path, "write 'sender receiver length' lines to this file");

  CLI11_PARSE(app, argc, argv);

  try {
    nom::RunConfig cfg = nom::make_run_config(config_path, overrides, ablations);
    std::cout << "resolved config:\n" << nom::resolved_config_text(cfg);
    if (gen->parsed()) return nom::cmd_gen_data(cfg, force);
    if (train->parsed()) return nom::cmd_train(cfg, resume);
    if (roll->parsed()) return nom::cmd_rollout(cfg, init_index, horizon, out_path);
    if (eval->parsed()) return nom::cmd_evaluate(cfg, eval_out);
    if (plot->parsed()) return nom::cmd_plot(cfg, spec);
    if (inspect->parsed()) return nom::cmd_inspect_graph(cfg, dump_path);
  } catch (const nom::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nom::kExitDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return nom::kExitError;
  }
  return nom::kExitError;
}
