#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mgcn/matrix.hpp"
#include "mgcn/model.hpp"
#include "mgcn/neighborhoods.hpp"

namespace mgcn {

struct TrainConfig {
  int iterations = 2000;
  double learning_rate = 1e-4;
  uint64_t seed = 1;
  int per_class_labels = 30;
  int fallback_labels = 15;
  double val_fraction = 0.10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  bool select_best_validation = true;  // otherwise return final-iteration params
  int val_check_interval = 50;

  void validate() const;
};

struct LabelSplit {
  std::vector<int> train_ids;
  std::vector<int> val_ids;
  std::vector<int> test_ids;
  Matrix onehot;  // n x C, rows filled for train and validation regions
};

// Per class: per_class regions chosen uniformly at random, or fallback when
// the class has fewer than per_class; everything else labeled becomes test.
// The selection initially sits in train_ids; split_train_val carves out the
// validation part.
LabelSplit select_labels(const std::vector<int>& region_labels, int n_classes, int per_class,
                         int fallback, uint64_t seed);

// Stratified 90/10-style split of the selected regions: per class,
// round-half-up of (1 - val_fraction) * k goes to train (never less than 1).
LabelSplit split_train_val(const LabelSplit& selected, const std::vector<int>& region_labels,
                           int n_classes, double val_fraction, uint64_t seed);

struct AdamState {
  int64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  static AdamState init(const ModelParams& params);
};

// One full-batch Adam update over every parameter, lambdas and zeta included.
// grads holds one matrix per entries() slot, in order.
void adam_step(ModelParams& params, const std::vector<Matrix>& grads, AdamState& state,
               double learning_rate, const TrainConfig& config);

struct HistoryRecord {
  int iteration = 0;
  double loss_total = 0.0;
  double loss_recon = 0.0;
  double loss_class = 0.0;
  double zeta = 0.0;
  double val_oa = -1.0;  // negative = not evaluated this iteration
};

struct TrainResult {
  ModelParams params;
  std::vector<HistoryRecord> history;
  int best_iteration = 0;
  double best_val_oa = -1.0;
};

// Algorithm main loop: forward, losses, backward, Adam, every iteration on
// the full labeled set; validation OA checked every val_check_interval
// iterations and at the last one, keeping the best-scoring parameters.
TrainResult train(const Matrix& features, const NeighborhoodSets& hops1,
                  const NeighborhoodSets& hops2, const std::vector<int>& region_labels,
                  const LabelSplit& split, const ModelConfig& model_config,
                  const TrainConfig& train_config);

// Per-region argmax of the fused output; ties go to the lowest class id.
std::vector<int> predict(ModelParams& params, const Matrix& features,
                         const NeighborhoodSets& hops1, const NeighborhoodSets& hops2,
                         const ModelConfig& config);

void write_history(const std::vector<HistoryRecord>& history, const std::string& path);

}  // namespace mgcn
