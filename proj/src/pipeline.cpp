#include "mgcn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "mgcn/errors.hpp"
#include "mgcn/rng.hpp"

namespace mgcn {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

std::string RunConfig::to_json() const {
  ordered_json j;
  j["cube_path"] = cube_path;
  j["cube_header"] = cube_header;
  j["labels_path"] = labels_path;
  j["labels_header"] = labels_header;
  j["out_dir"] = out_dir;
  j["regions"] = regions;
  j["compactness"] = compactness;
  j["slic_iters"] = slic_iters;
  j["hidden_units"] = hidden_units;
  j["s1"] = s1;
  j["s2"] = s2;
  j["beta"] = beta;
  j["global_enabled"] = global_enabled;
  j["row_normalize"] = row_normalize;
  j["iterations"] = iterations;
  j["learning_rate"] = learning_rate;
  j["seed"] = seed;
  j["per_class_labels"] = per_class_labels;
  j["fallback_labels"] = fallback_labels;
  j["val_fraction"] = val_fraction;
  j["select_best_validation"] = select_best_validation;
  j["val_check_interval"] = val_check_interval;
  j["n_seeds"] = n_seeds;
  return j.dump(2) + "\n";
}

RunConfig RunConfig::from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  auto get = [&j](const char* key, auto& slot) {
    if (j.contains(key)) {
      try {
        slot = j.at(key).get<std::decay_t<decltype(slot)>>();
      } catch (const std::exception&) {
        throw ConfigError(std::string("config key '") + key + "' has the wrong type");
      }
    }
  };
  get("cube_path", cfg.cube_path);
  get("cube_header", cfg.cube_header);
  get("labels_path", cfg.labels_path);
  get("labels_header", cfg.labels_header);
  get("out_dir", cfg.out_dir);
  get("regions", cfg.regions);
  get("compactness", cfg.compactness);
  get("slic_iters", cfg.slic_iters);
  get("hidden_units", cfg.hidden_units);
  get("s1", cfg.s1);
  get("s2", cfg.s2);
  get("beta", cfg.beta);
  get("global_enabled", cfg.global_enabled);
  get("row_normalize", cfg.row_normalize);
  get("iterations", cfg.iterations);
  get("learning_rate", cfg.learning_rate);
  get("seed", cfg.seed);
  get("per_class_labels", cfg.per_class_labels);
  get("fallback_labels", cfg.fallback_labels);
  get("val_fraction", cfg.val_fraction);
  get("select_best_validation", cfg.select_best_validation);
  get("val_check_interval", cfg.val_check_interval);
  get("n_seeds", cfg.n_seeds);
  return cfg;
}

void RunConfig::set_data_dir(const std::string& dir) {
  cube_path = (fs::path(dir) / "cube.raw").string();
  cube_header = (fs::path(dir) / "cube.hdr").string();
  labels_path = (fs::path(dir) / "labels.raw").string();
  labels_header = (fs::path(dir) / "labels.hdr").string();
}

PreparedData prepare_scene(const HyperspectralImage& image, const GroundTruth& truth,
                           const RunConfig& cfg) {
  if (truth.height != image.height || truth.width != image.width) {
    throw DataError("ground truth dimensions do not match the cube");
  }
  PreparedData d;
  d.image = image;
  d.truth = truth;

  const long pixels = static_cast<long>(image.height) * image.width;
  const bool small_scene = pixels <= 64 * 64;
  const int regions =
      cfg.regions > 0 ? cfg.regions : static_cast<int>((pixels + 99) / 100);

  d.model_config.n_classes = truth.n_classes();
  d.model_config.input_dim = image.bands;
  d.model_config.hidden_units =
      cfg.hidden_units > 0 ? cfg.hidden_units : (small_scene ? 64 : 128);
  d.model_config.hop_small = cfg.s1;
  d.model_config.hop_large = cfg.s2 > 0 ? cfg.s2 : (small_scene ? 2 : 4);
  d.model_config.beta = cfg.beta;
  d.model_config.global_enabled = cfg.global_enabled;
  d.model_config.row_normalize_adjacency = cfg.row_normalize;
  d.model_config.validate();

  d.train_config.iterations = cfg.iterations;
  d.train_config.learning_rate = cfg.learning_rate;
  d.train_config.seed = cfg.seed;
  d.train_config.per_class_labels = cfg.per_class_labels;
  d.train_config.fallback_labels = cfg.fallback_labels;
  d.train_config.val_fraction = cfg.val_fraction;
  d.train_config.select_best_validation = cfg.select_best_validation;
  d.train_config.val_check_interval = cfg.val_check_interval;
  d.train_config.validate();

  d.seg = slic_segment(image, regions, cfg.compactness, cfg.slic_iters);
  d.graph = region_features(image, d.seg);
  d.hops1 = hop_neighborhoods(d.graph.adjacency, d.model_config.hop_small);
  d.hops2 = hop_neighborhoods(d.graph.adjacency, d.model_config.hop_large);
  d.region_labels = region_majority_labels(d.seg, truth);
  return d;
}

PreparedData prepare_files(const RunConfig& cfg) {
  HyperspectralImage image = load_hsi(cfg.cube_path, cfg.cube_header);
  GroundTruth truth = load_labels(cfg.labels_path, cfg.labels_header);
  return prepare_scene(image, truth, cfg);
}

std::vector<int> test_pixel_ids(const PreparedData& data, const LabelSplit& split) {
  std::vector<bool> is_test(data.seg.n_regions, false);
  for (int id : split.test_ids) is_test[id] = true;
  std::vector<int> ids;
  for (size_t p = 0; p < data.truth.labels.size(); ++p) {
    if (data.truth.labels[p] != 0 && is_test[data.seg.region_of[p]]) {
      ids.push_back(static_cast<int>(p));
    }
  }
  return ids;
}

SeedOutcome run_seed(const PreparedData& data, const RunConfig& cfg, uint64_t seed) {
  SeedOutcome out;
  out.seed = seed;

  const int n_classes = data.model_config.n_classes;
  LabelSplit selected =
      select_labels(data.region_labels, n_classes, cfg.per_class_labels, cfg.fallback_labels,
                    mix_seed(seed, 1));
  out.split = split_train_val(selected, data.region_labels, n_classes, cfg.val_fraction,
                              mix_seed(seed, 2));

  TrainConfig tc = data.train_config;
  tc.seed = seed;
  out.result = train(data.graph.features, data.hops1, data.hops2, data.region_labels, out.split,
                     data.model_config, tc);

  out.region_predictions =
      predict(out.result.params, data.graph.features, data.hops1, data.hops2, data.model_config);
  std::vector<int> pixel_predictions = pixel_expand(out.region_predictions, data.seg);
  std::vector<int> eval_ids = test_pixel_ids(data, out.split);
  if (eval_ids.empty()) {
    throw ConfigError("run_seed: no test pixels remain; every labeled region was selected");
  }
  out.report = evaluate(pixel_predictions, data.truth.labels, eval_ids, n_classes);
  return out;
}

std::string model_display_name(const RunConfig& cfg) {
  return cfg.global_enabled ? "MGCN-AGL" : "MGCN-AGL-Loc";
}

void write_seed_outputs(const PreparedData& data, const RunConfig& cfg,
                        const SeedOutcome& outcome, const std::string& dir) {
  fs::create_directories(dir);

  RunConfig seed_cfg = cfg;
  seed_cfg.seed = outcome.seed;
  seed_cfg.n_seeds = 1;

  Checkpoint ckpt;
  ckpt.config_json = seed_cfg.to_json();
  ckpt.iterations = static_cast<uint64_t>(outcome.result.best_iteration);
  for (auto& [name, m] : outcome.result.params.entries()) ckpt.params.emplace_back(name, *m);
  save_checkpoint(ckpt, (fs::path(dir) / "model.ckpt").string());

  write_history(outcome.result.history, (fs::path(dir) / "history.csv").string());
  write_report(outcome.report, model_display_name(cfg),
               (fs::path(dir) / "report.txt").string());

  std::vector<int> pixel_predictions = pixel_expand(outcome.region_predictions, data.seg);
  render_map(pixel_predictions, data.seg.height, data.seg.width,
             default_palette(data.model_config.n_classes),
             (fs::path(dir) / "map.ppm").string());
}

TrainCommandResult run_train_command(const RunConfig& cfg) {
  if (cfg.n_seeds < 1) throw ConfigError("train: seed count must be at least 1");
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream out(fs::path(cfg.out_dir) / "run_config.json", std::ios::trunc);
    out << cfg.to_json();
  }

  PreparedData data = prepare_files(cfg);

  TrainCommandResult result;
  for (int k = 0; k < cfg.n_seeds; ++k) {
    const uint64_t seed = cfg.seed + static_cast<uint64_t>(k);
    SeedOutcome outcome = run_seed(data, cfg, seed);
    const std::string dir =
        cfg.n_seeds == 1 ? cfg.out_dir
                         : (fs::path(cfg.out_dir) / ("seed_" + std::to_string(seed))).string();
    write_seed_outputs(data, cfg, outcome, dir);
    result.outcomes.push_back(std::move(outcome));
  }

  double sum = 0.0;
  for (const auto& o : result.outcomes) sum += o.report.oa;
  result.mean_oa = sum / static_cast<double>(result.outcomes.size());
  double var = 0.0;
  for (const auto& o : result.outcomes) {
    var += (o.report.oa - result.mean_oa) * (o.report.oa - result.mean_oa);
  }
  result.std_oa = std::sqrt(var / static_cast<double>(result.outcomes.size()));

  // per-seed summary with the mean +- std line the multi-seed protocol wants
  std::ofstream summary(fs::path(cfg.out_dir) / "summary.txt", std::ios::trunc);
  char buf[160];
  for (const auto& o : result.outcomes) {
    std::snprintf(buf, sizeof(buf), "seed %llu oa %.17g aa %.17g kappa %.17g\n",
                  static_cast<unsigned long long>(o.seed), o.report.oa, o.report.aa,
                  o.report.kappa);
    summary << buf;
  }
  std::snprintf(buf, sizeof(buf), "mean_oa %.17g\nstd_oa %.17g\n", result.mean_oa,
                result.std_oa);
  summary << buf;
  return result;
}

EvalReport run_eval_command(const std::string& checkpoint_path, const RunConfig& override_cfg,
                            const std::string& out_dir, bool render_only, bool region_level) {
  Checkpoint ckpt = load_checkpoint(checkpoint_path);
  RunConfig cfg = RunConfig::from_json(ckpt.config_json);
  if (!override_cfg.cube_path.empty()) {
    cfg.cube_path = override_cfg.cube_path;
    cfg.cube_header = override_cfg.cube_header;
    cfg.labels_path = override_cfg.labels_path;
    cfg.labels_header = override_cfg.labels_header;
  }

  PreparedData data = prepare_files(cfg);
  ModelParams params = params_from_checkpoint(ckpt, data.model_config);
  std::vector<int> region_predictions =
      predict(params, data.graph.features, data.hops1, data.hops2, data.model_config);
  std::vector<int> pixel_predictions = pixel_expand(region_predictions, data.seg);

  fs::create_directories(out_dir);
  render_map(pixel_predictions, data.seg.height, data.seg.width,
             default_palette(data.model_config.n_classes),
             (fs::path(out_dir) / "map.ppm").string());
  if (render_only) return EvalReport{};

  // the checkpoint's seed reproduces the train-time split, so the test
  // report matches the training run exactly
  const int n_classes = data.model_config.n_classes;
  LabelSplit selected =
      select_labels(data.region_labels, n_classes, cfg.per_class_labels, cfg.fallback_labels,
                    mix_seed(cfg.seed, 1));
  LabelSplit split = split_train_val(selected, data.region_labels, n_classes, cfg.val_fraction,
                                     mix_seed(cfg.seed, 2));
  std::vector<int> eval_ids = test_pixel_ids(data, split);
  EvalReport report = evaluate(pixel_predictions, data.truth.labels, eval_ids, n_classes);
  write_report(report, model_display_name(cfg), (fs::path(out_dir) / "report.txt").string());

  if (region_level) {
    EvalReport regions = evaluate(region_predictions, data.region_labels, split.test_ids,
                                  n_classes);
    write_report(regions, model_display_name(cfg) + " (region-level)",
                 (fs::path(out_dir) / "report_regions.txt").string());
  }
  return report;
}

std::vector<SweepRow> run_sweep_command(const RunConfig& base, const std::string& what,
                                        const std::vector<int>& values) {
  if (values.empty()) throw ConfigError("sweep: no values given");
  if (what != "labels" && what != "s2") {
    throw ConfigError("sweep: unknown axis '" + what + "' (labels|s2)");
  }
  fs::create_directories(base.out_dir);

  std::vector<SweepRow> rows;
  for (int value : values) {
    RunConfig cfg = base;
    cfg.out_dir = (fs::path(base.out_dir) / (what + "_" + std::to_string(value))).string();
    if (what == "labels") {
      cfg.per_class_labels = value;
      cfg.fallback_labels = std::min(cfg.fallback_labels, value);
    } else {
      cfg.s1 = 1;  // s2 sweeps fix the small neighborhood
      cfg.s2 = value;
    }
    TrainCommandResult res = run_train_command(cfg);
    SweepRow row;
    row.value = value;
    for (const auto& o : res.outcomes) row.seed_oa.push_back(o.report.oa);
    row.mean_oa = res.mean_oa;
    row.std_oa = res.std_oa;
    rows.push_back(std::move(row));
  }

  std::ofstream out(fs::path(base.out_dir) / "sweep.csv", std::ios::trunc);
  out << what << ",mean_oa,std_oa,seed_oa...\n";
  char buf[96];
  for (const auto& row : rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g", row.value, row.mean_oa, row.std_oa);
    out << buf;
    for (double oa : row.seed_oa) {
      std::snprintf(buf, sizeof(buf), ",%.17g", oa);
      out << buf;
    }
    out << "\n";
  }
  return rows;
}

}  // namespace mgcn
