// Command-line front end: synth, train, eval and sweep subcommands over the
// pipeline library. Batch-oriented; every run writes its resolved config for
// exact reproduction.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mgcn/data_io.hpp"
#include "mgcn/errors.hpp"
#include "mgcn/pipeline.hpp"

namespace fs = std::filesystem;
using namespace mgcn;

namespace {

struct SynthArgs {
  int height = 40;
  int width = 40;
  int bands = 8;
  int classes = 3;
  std::string layout = "blocks";
  double noise = 0.05;
  uint64_t seed = 1;
  std::string out;
};

void add_run_options(CLI::App* cmd, RunConfig& cfg, std::string& data_dir,
                     std::string& config_path, std::string& select_mode) {
  cmd->add_option("--config", config_path, "JSON config file; flags override its values");
  cmd->add_option("--data", data_dir, "directory holding cube.raw/.hdr and labels.raw/.hdr");
  cmd->add_option("--cube", cfg.cube_path, "cube data file");
  cmd->add_option("--cube-header", cfg.cube_header, "cube header file");
  cmd->add_option("--labels", cfg.labels_path, "label data file");
  cmd->add_option("--labels-header", cfg.labels_header, "label header file");
  cmd->add_option("--out", cfg.out_dir, "output directory");
  cmd->add_option("--regions", cfg.regions, "target region count (0 = pixels/100)");
  cmd->add_option("--compactness", cfg.compactness, "segmentation compactness weight");
  cmd->add_option("--slic-iters", cfg.slic_iters, "segmentation iteration cap");
  cmd->add_option("--u", cfg.hidden_units, "hidden units (0 = auto by scene size)");
  cmd->add_option("--s1", cfg.s1, "branch-1 neighborhood hops");
  cmd->add_option("--s2", cfg.s2, "branch-2 neighborhood hops (0 = auto)");
  cmd->add_option("--beta", cfg.beta, "edge retention threshold");
  cmd->add_option("--global-enabled", cfg.global_enabled,
                  "false selects the local-only ablation");
  cmd->add_option("--row-normalize", cfg.row_normalize,
                  "row-normalize the sparsified adjacency (off by default)");
  cmd->add_option("--iters", cfg.iterations, "training iterations");
  cmd->add_option("--lr", cfg.learning_rate, "learning rate");
  cmd->add_option("--seed", cfg.seed, "master seed");
  cmd->add_option("--seeds", cfg.n_seeds, "number of consecutive seeds to run");
  cmd->add_option("--per-class", cfg.per_class_labels, "labeled regions per class");
  cmd->add_option("--fallback", cfg.fallback_labels, "labels for classes below per-class");
  cmd->add_option("--val-fraction", cfg.val_fraction, "validation share of the labeled set");
  cmd->add_option("--val-interval", cfg.val_check_interval, "validation check spacing");
  cmd->add_option("--select", select_mode, "returned parameters: best|final");
}

// defaults < config file < explicitly passed flags
RunConfig resolve_run_config(CLI::App* cmd, const RunConfig& flag_cfg,
                             const std::string& data_dir, const std::string& config_path,
                             const std::string& select_mode) {
  RunConfig cfg;
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config file: " + config_path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    cfg = RunConfig::from_json(text);
  }
  if (!data_dir.empty()) cfg.set_data_dir(data_dir);

  auto passed = [cmd](const std::string& name) { return cmd->count(name) > 0; };
  if (passed("--cube")) cfg.cube_path = flag_cfg.cube_path;
  if (passed("--cube-header")) cfg.cube_header = flag_cfg.cube_header;
  if (passed("--labels")) cfg.labels_path = flag_cfg.labels_path;
  if (passed("--labels-header")) cfg.labels_header = flag_cfg.labels_header;
  if (passed("--out")) cfg.out_dir = flag_cfg.out_dir;
  if (passed("--regions")) cfg.regions = flag_cfg.regions;
  if (passed("--compactness")) cfg.compactness = flag_cfg.compactness;
  if (passed("--slic-iters")) cfg.slic_iters = flag_cfg.slic_iters;
  if (passed("--u")) cfg.hidden_units = flag_cfg.hidden_units;
  if (passed("--s1")) cfg.s1 = flag_cfg.s1;
  if (passed("--s2")) cfg.s2 = flag_cfg.s2;
  if (passed("--beta")) cfg.beta = flag_cfg.beta;
  if (passed("--global-enabled")) cfg.global_enabled = flag_cfg.global_enabled;
  if (passed("--row-normalize")) cfg.row_normalize = flag_cfg.row_normalize;
  if (passed("--iters")) cfg.iterations = flag_cfg.iterations;
  if (passed("--lr")) cfg.learning_rate = flag_cfg.learning_rate;
  if (passed("--seed")) cfg.seed = flag_cfg.seed;
  if (passed("--seeds")) cfg.n_seeds = flag_cfg.n_seeds;
  if (passed("--per-class")) cfg.per_class_labels = flag_cfg.per_class_labels;
  if (passed("--fallback")) cfg.fallback_labels = flag_cfg.fallback_labels;
  if (passed("--val-fraction")) cfg.val_fraction = flag_cfg.val_fraction;
  if (passed("--val-interval")) cfg.val_check_interval = flag_cfg.val_check_interval;
  if (passed("--select")) {
    if (select_mode == "best") {
      cfg.select_best_validation = true;
    } else if (select_mode == "final") {
      cfg.select_best_validation = false;
    } else {
      throw ConfigError("--select must be 'best' or 'final', got '" + select_mode + "'");
    }
  }
  if (cfg.out_dir.empty()) throw ConfigError("--out is required");
  if (cfg.cube_path.empty()) throw ConfigError("no dataset given (--data or --cube/--labels)");
  return cfg;
}

int run_synth(const SynthArgs& args) {
  if (args.out.empty()) throw ConfigError("--out is required");
  SynthScene scene = synth_hsi(args.height, args.width, args.bands, args.classes,
                               parse_layout(args.layout), args.noise, args.seed);
  fs::create_directories(args.out);
  save_hsi(scene.image, (fs::path(args.out) / "cube.raw").string(),
           (fs::path(args.out) / "cube.hdr").string());
  save_labels(scene.truth, (fs::path(args.out) / "labels.raw").string(),
              (fs::path(args.out) / "labels.hdr").string());
  std::printf("synth: %dx%dx%d, %d classes, layout %s, sigma %g, seed %llu -> %s\n", args.height,
              args.width, args.bands, args.classes, args.layout.c_str(), args.noise,
              static_cast<unsigned long long>(args.seed), args.out.c_str());
  return 0;
}

int run_train(const RunConfig& cfg) {
  TrainCommandResult result = run_train_command(cfg);
  for (const auto& o : result.outcomes) {
    std::printf("seed %llu: oa %.6f aa %.6f kappa %.6f (model %s)\n",
                static_cast<unsigned long long>(o.seed), o.report.oa, o.report.aa,
                o.report.kappa, model_display_name(cfg).c_str());
  }
  std::printf("mean_oa %.6f std_oa %.6f over %zu seed(s)\n", result.mean_oa, result.std_oa,
              result.outcomes.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-level graph convolution pipeline for multiband images"};
  app.require_subcommand(1);
  app.set_help_flag("--help", "print help");  // frees -h / --h for the height flag

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "generate a synthetic labeled scene");
  synth->set_help_flag("--help", "print help");
  synth->add_option("--h,--height", synth_args.height, "scene height in pixels");
  synth->add_option("--w,--width", synth_args.width, "scene width in pixels");
  synth->add_option("--bands", synth_args.bands, "spectral band count");
  synth->add_option("--classes", synth_args.classes, "number of classes");
  synth->add_option("--layout", synth_args.layout, "blocks|stripes|split_pairs");
  synth->add_option("--noise", synth_args.noise, "per-band Gaussian noise sigma");
  synth->add_option("--seed", synth_args.seed, "generator seed");
  synth->add_option("--out", synth_args.out, "output directory");

  RunConfig train_flags;
  std::string train_data, train_config_path, train_select;
  CLI::App* train = app.add_subcommand("train", "segment, train and evaluate");
  add_run_options(train, train_flags, train_data, train_config_path, train_select);

  std::string eval_checkpoint, eval_out, eval_data;
  RunConfig eval_flags;
  bool render_only = false;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a stored checkpoint");
  eval->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
  eval->add_option("--out", eval_out, "output directory")->required();
  eval->add_option("--data", eval_data, "dataset directory override");
  eval->add_option("--cube", eval_flags.cube_path, "cube data file override");
  eval->add_option("--cube-header", eval_flags.cube_header, "cube header override");
  eval->add_option("--labels", eval_flags.labels_path, "label data override");
  eval->add_option("--labels-header", eval_flags.labels_header, "label header override");
  eval->add_flag("--render-only", render_only, "emit only the rendered map");
  bool region_level = false;
  eval->add_flag("--region-level", region_level,
                 "also write a region-level debugging report");

  RunConfig sweep_flags;
  std::string sweep_data, sweep_config_path, sweep_select, sweep_what = "labels";
  std::vector<int> sweep_values;
  CLI::App* sweep = app.add_subcommand("sweep", "train across labels-per-class or s2 values");
  add_run_options(sweep, sweep_flags, sweep_data, sweep_config_path, sweep_select);
  sweep->add_option("--what", sweep_what, "labels|s2");
  sweep->add_option("--values", sweep_values, "comma-separated value list")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed()) return run_synth(synth_args);

    if (train->parsed()) {
      RunConfig cfg =
          resolve_run_config(train, train_flags, train_data, train_config_path, train_select);
      return run_train(cfg);
    }

    if (eval->parsed()) {
      if (!eval_data.empty()) eval_flags.set_data_dir(eval_data);
      EvalReport report =
          run_eval_command(eval_checkpoint, eval_flags, eval_out, render_only, region_level);
      if (render_only) {
        std::printf("map written to %s\n", (fs::path(eval_out) / "map.ppm").string().c_str());
      } else {
        std::printf("oa %.6f aa %.6f kappa %.6f\n", report.oa, report.aa, report.kappa);
      }
      return 0;
    }

    if (sweep->parsed()) {
      RunConfig cfg =
          resolve_run_config(sweep, sweep_flags, sweep_data, sweep_config_path, sweep_select);
      if (sweep_values.empty()) {
        sweep_values = (sweep_what == "s2") ? std::vector<int>{2, 3, 4, 5}
                                            : std::vector<int>{5, 10, 15, 20, 25, 30};
      }
      std::vector<SweepRow> rows = run_sweep_command(cfg, sweep_what, sweep_values);
      std::printf("%s,mean_oa,std_oa\n", sweep_what.c_str());
      for (const auto& row : rows) {
        std::printf("%d,%.6f,%.6f\n", row.value, row.mean_oa, row.std_oa);
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const ShapeError& e) {
    std::cerr << "shape error: " << e.what() << "\n";
    return 3;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
