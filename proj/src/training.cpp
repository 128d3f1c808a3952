#include "mgcn/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mgcn/errors.hpp"
#include "mgcn/rng.hpp"

namespace mgcn {

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("training: iteration count must be at least 1");
  if (learning_rate <= 0.0) throw ConfigError("training: learning rate must be positive");
  if (val_fraction < 0.0 || val_fraction >= 1.0) {
    throw ConfigError("training: validation fraction must lie in [0,1)");
  }
  if (per_class_labels < 1 || fallback_labels < 1 || fallback_labels > per_class_labels) {
    throw ConfigError("training: label counts must satisfy 1 <= fallback <= per_class");
  }
  if (val_check_interval < 1) throw ConfigError("training: check interval must be positive");
}

LabelSplit select_labels(const std::vector<int>& region_labels, int n_classes, int per_class,
                         int fallback, uint64_t seed) {
  LabelSplit split;
  split.onehot = Matrix(static_cast<int>(region_labels.size()), n_classes);
  Rng rng = make_rng(seed);
  for (int c = 1; c <= n_classes; ++c) {
    std::vector<int> members;
    for (size_t i = 0; i < region_labels.size(); ++i) {
      if (region_labels[i] == c) members.push_back(static_cast<int>(i));
    }
    if (static_cast<int>(members.size()) < fallback) {
      throw ConfigError("class " + std::to_string(c) + " has only " +
                        std::to_string(members.size()) + " labeled regions, need at least " +
                        std::to_string(fallback) +
                        "; a finer segmentation (more regions) may help");
    }
    const int take =
        static_cast<int>(members.size()) >= per_class ? per_class : fallback;
    shuffle_vec(members, rng);
    for (int t = 0; t < static_cast<int>(members.size()); ++t) {
      if (t < take) {
        split.train_ids.push_back(members[t]);
        split.onehot(members[t], c - 1) = 1.0;
      } else {
        split.test_ids.push_back(members[t]);
      }
    }
  }
  std::sort(split.train_ids.begin(), split.train_ids.end());
  std::sort(split.test_ids.begin(), split.test_ids.end());
  return split;
}

LabelSplit split_train_val(const LabelSplit& selected, const std::vector<int>& region_labels,
                           int n_classes, double val_fraction, uint64_t seed) {
  LabelSplit out;
  out.onehot = selected.onehot;
  out.test_ids = selected.test_ids;
  Rng rng = make_rng(seed);
  for (int c = 1; c <= n_classes; ++c) {
    std::vector<int> members;
    for (int id : selected.train_ids) {
      if (region_labels[id] == c) members.push_back(id);
    }
    if (members.empty()) continue;
    const int k = static_cast<int>(members.size());
    // round half up, at least one training member
    int n_train = static_cast<int>(std::floor((1.0 - val_fraction) * k + 0.5));
    n_train = std::max(1, std::min(n_train, k));
    shuffle_vec(members, rng);
    for (int t = 0; t < k; ++t) {
      (t < n_train ? out.train_ids : out.val_ids).push_back(members[t]);
    }
  }
  std::sort(out.train_ids.begin(), out.train_ids.end());
  std::sort(out.val_ids.begin(), out.val_ids.end());
  return out;
}

AdamState AdamState::init(const ModelParams& params) {
  AdamState state;
  for (auto& [name, m] : params.entries()) {
    state.m.emplace_back(m->rows(), m->cols());
    state.v.emplace_back(m->rows(), m->cols());
  }
  return state;
}

void adam_step(ModelParams& params, const std::vector<Matrix>& grads, AdamState& state,
               double learning_rate, const TrainConfig& config) {
  auto slots = params.entries();
  if (grads.size() != slots.size() || state.m.size() != slots.size()) {
    throw ShapeError("adam_step: gradient/state layout does not match parameters");
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.adam_beta2, static_cast<double>(state.step));
  for (size_t p = 0; p < slots.size(); ++p) {
    Matrix& theta = *slots[p].second;
    const Matrix& g = grads[p];
    if (!g.same_shape(theta)) {
      throw ShapeError("adam_step: gradient shape mismatch for " + slots[p].first);
    }
    if (!all_finite(g)) {
      throw NumericalError("adam_step: non-finite gradient for parameter " + slots[p].first);
    }
    for (size_t i = 0; i < theta.size(); ++i) {
      const double gi = g.raw()[i];
      double& mi = state.m[p].raw()[i];
      double& vi = state.v[p].raw()[i];
      mi = config.adam_beta1 * mi + (1.0 - config.adam_beta1) * gi;
      vi = config.adam_beta2 * vi + (1.0 - config.adam_beta2) * gi * gi;
      const double m_hat = mi / bc1;
      const double v_hat = vi / bc2;
      theta.raw()[i] -= learning_rate * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
    }
  }
}

namespace {

double region_overall_accuracy(const std::vector<int>& predictions,
                               const std::vector<int>& truth, const std::vector<int>& ids) {
  if (ids.empty()) return -1.0;
  int hit = 0;
  for (int id : ids) {
    if (predictions[id] == truth[id]) ++hit;
  }
  return static_cast<double>(hit) / static_cast<double>(ids.size());
}

std::vector<int> argmax_rows(const Matrix& output) {
  std::vector<int> labels(output.rows());
  for (int i = 0; i < output.rows(); ++i) {
    int best = 0;
    for (int j = 1; j < output.cols(); ++j) {
      if (output(i, j) > output(i, best)) best = j;  // strict > keeps lowest id on ties
    }
    labels[i] = best + 1;
  }
  return labels;
}

}  // namespace

TrainResult train(const Matrix& features, const NeighborhoodSets& hops1,
                  const NeighborhoodSets& hops2, const std::vector<int>& region_labels,
                  const LabelSplit& split, const ModelConfig& model_config,
                  const TrainConfig& train_config) {
  model_config.validate();
  train_config.validate();
  if (split.train_ids.empty()) throw ConfigError("train: no training regions selected");

  TrainResult result;
  result.params = ModelParams::init(model_config, mix_seed(train_config.seed, 0));
  AdamState state = AdamState::init(result.params);

  LossInputs loss_inputs;
  loss_inputs.region_labels = &region_labels;
  loss_inputs.labeled_ids = &split.train_ids;
  loss_inputs.onehot = &split.onehot;

  ModelParams best_params = result.params;
  result.history.reserve(train_config.iterations);

  for (int iter = 1; iter <= train_config.iterations; ++iter) {
    Tape tape;
    ForwardOutput fo = model_forward(tape, features, hops1, hops2, result.params, model_config,
                                     &loss_inputs);
    HistoryRecord rec;
    rec.iteration = iter;
    rec.loss_total = fo.loss_total.scalar_value();
    rec.loss_recon = fo.loss_recon.scalar_value();
    rec.loss_class = fo.loss_class.scalar_value();
    rec.zeta = softplus_scalar(result.params.zeta_raw(0, 0));
    if (!std::isfinite(rec.loss_total)) {
      throw NumericalError("train: loss became non-finite at iteration " + std::to_string(iter));
    }

    tape.backward(fo.loss_total);
    std::vector<Matrix> grads;
    grads.reserve(fo.param_values.size());
    for (auto& [name, value] : fo.param_values) grads.push_back(value.adjoint());
    adam_step(result.params, grads, state, train_config.learning_rate, train_config);

    const bool check_now =
        iter % train_config.val_check_interval == 0 || iter == train_config.iterations;
    if (check_now && !split.val_ids.empty()) {
      std::vector<int> val_pred =
          predict(result.params, features, hops1, hops2, model_config);
      rec.val_oa = region_overall_accuracy(val_pred, region_labels, split.val_ids);
      // >= so ties resolve to the latest checked iteration
      if (rec.val_oa >= result.best_val_oa) {
        result.best_val_oa = rec.val_oa;
        result.best_iteration = iter;
        best_params = result.params;
      }
    }
    result.history.push_back(rec);
  }

  if (train_config.select_best_validation && result.best_iteration > 0) {
    result.params = best_params;
  } else {
    result.best_iteration = train_config.iterations;
  }
  return result;
}

std::vector<int> predict(ModelParams& params, const Matrix& features,
                         const NeighborhoodSets& hops1, const NeighborhoodSets& hops2,
                         const ModelConfig& config) {
  Tape tape;
  ForwardOutput fo = model_forward(tape, features, hops1, hops2, params, config);
  return argmax_rows(fo.output.data());
}

void write_history(const std::vector<HistoryRecord>& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write history log: " + path);
  out << "iteration,loss,loss_recon,loss_class,zeta,val_oa\n";
  char buf[256];
  for (const HistoryRecord& r : history) {
    if (r.val_oa >= 0.0) {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration,
                    r.loss_total, r.loss_recon, r.loss_class, r.zeta, r.val_oa);
    } else {
      std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g,\n", r.iteration, r.loss_total,
                    r.loss_recon, r.loss_class, r.zeta);
    }
    out << buf;
  }
}

}  // namespace mgcn
