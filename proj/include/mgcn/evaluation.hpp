#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "mgcn/segmentation.hpp"

namespace mgcn {

struct EvalReport {
  int n_classes = 0;
  int64_t n_eval = 0;
  std::vector<std::vector<int64_t>> confusion;  // [truth-1][prediction-1]
  std::vector<double> per_class_accuracy;
  std::vector<bool> class_present;  // classes with at least one eval sample
  double oa = 0.0;
  double aa = 0.0;
  double kappa = 0.0;
  double chance_agreement = 0.0;  // p_e of the kappa formula
  bool degenerate_chance = false;  // p_e == 1 edge case
};

// Confusion matrix and metrics over eval_ids; predictions/truth hold class
// ids 1..C indexed by those ids. Kappa is computed from integer counts,
// (n*trace - sum row*col) / (n^2 - sum row*col), so the hand-computable
// cases come out exact.
EvalReport evaluate(const std::vector<int>& predictions, const std::vector<int>& truth,
                    const std::vector<int>& eval_ids, int n_classes);

// Each pixel inherits its region's predicted class.
std::vector<int> pixel_expand(const std::vector<int>& region_predictions,
                              const SegmentationMap& seg);

using Palette = std::vector<std::array<unsigned char, 3>>;

// Entry 0 (unlabeled) is black; classes cycle through a fixed color table.
Palette default_palette(int n_classes);

// Binary PPM (P6), 8-bit RGB, one pixel per map cell.
void render_map(const std::vector<int>& class_map, int height, int width,
                const Palette& palette, const std::string& path);

std::string format_report(const EvalReport& report, const std::string& model_name);
void write_report(const EvalReport& report, const std::string& model_name,
                  const std::string& path);

}  // namespace mgcn
