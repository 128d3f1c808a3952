#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgcn/data_io.hpp"
#include "mgcn/evaluation.hpp"
#include "mgcn/model.hpp"
#include "mgcn/segmentation.hpp"
#include "mgcn/training.hpp"

namespace mgcn {

// Fully resolved settings for one train/eval run. Serialized as JSON into the
// output directory; re-running from that file reproduces the outputs
// bit-exactly.
struct RunConfig {
  // data
  std::string cube_path;
  std::string cube_header;
  std::string labels_path;
  std::string labels_header;
  std::string out_dir;
  // segmentation
  int regions = 0;  // 0 = ceil(pixels / 100)
  double compactness = 0.1;
  int slic_iters = 10;
  // model; 0 = auto by scene size (<= 64x64 pixels: u=64, s2=2; else 128/4)
  int hidden_units = 0;
  int s1 = 1;
  int s2 = 0;
  double beta = 0.75;
  bool global_enabled = true;
  bool row_normalize = false;
  // training
  int iterations = 2000;
  double learning_rate = 1e-4;
  uint64_t seed = 1;
  int per_class_labels = 30;
  int fallback_labels = 15;
  double val_fraction = 0.10;
  bool select_best_validation = true;
  int val_check_interval = 50;
  int n_seeds = 1;

  std::string to_json() const;
  static RunConfig from_json(const std::string& text);

  // convenience: point the four data paths at dir/{cube,labels}.{raw,hdr}
  void set_data_dir(const std::string& dir);
};

struct PreparedData {
  HyperspectralImage image;
  GroundTruth truth;
  SegmentationMap seg;
  RegionGraph graph;
  NeighborhoodSets hops1;
  NeighborhoodSets hops2;
  std::vector<int> region_labels;
  ModelConfig model_config;
  TrainConfig train_config;  // seed is overridden per run
};

// Segment, build graphs and resolve the auto settings for an in-memory scene.
PreparedData prepare_scene(const HyperspectralImage& image, const GroundTruth& truth,
                           const RunConfig& cfg);
// Same, loading the cube and labels from the configured paths.
PreparedData prepare_files(const RunConfig& cfg);

struct SeedOutcome {
  uint64_t seed = 0;
  LabelSplit split;
  TrainResult result;
  std::vector<int> region_predictions;
  EvalReport report;
};

// Label selection, training and pixel-level test evaluation for one seed.
SeedOutcome run_seed(const PreparedData& data, const RunConfig& cfg, uint64_t seed);

// Pixel ids carrying ground truth inside test regions.
std::vector<int> test_pixel_ids(const PreparedData& data, const LabelSplit& split);

std::string model_display_name(const RunConfig& cfg);

// checkpoint + history + report + rendered map for one finished seed
void write_seed_outputs(const PreparedData& data, const RunConfig& cfg,
                        const SeedOutcome& outcome, const std::string& dir);

struct TrainCommandResult {
  std::vector<SeedOutcome> outcomes;
  double mean_oa = 0.0;
  double std_oa = 0.0;
};

// The full train command: resolved-config provenance, one run per seed
// (seed, seed+1, ...), per-seed outputs and a summary file.
TrainCommandResult run_train_command(const RunConfig& cfg);

// Re-evaluate a stored checkpoint without training. Paths in override_cfg, when
// non-empty, replace the ones recorded in the checkpoint. region_level adds a
// debugging report that scores whole regions against their majority labels
// instead of pixels.
EvalReport run_eval_command(const std::string& checkpoint_path, const RunConfig& override_cfg,
                            const std::string& out_dir, bool render_only,
                            bool region_level = false);

struct SweepRow {
  int value = 0;
  std::vector<double> seed_oa;
  double mean_oa = 0.0;
  double std_oa = 0.0;
};

// Re-runs the train command across labels-per-class or s2 values and emits a
// comma-separated table.
std::vector<SweepRow> run_sweep_command(const RunConfig& base, const std::string& what,
                                        const std::vector<int>& values);

}  // namespace mgcn
