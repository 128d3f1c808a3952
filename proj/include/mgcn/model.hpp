#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mgcn/autodiff.hpp"
#include "mgcn/data_io.hpp"
#include "mgcn/graph_learning.hpp"
#include "mgcn/matrix.hpp"
#include "mgcn/neighborhoods.hpp"

namespace mgcn {

struct ModelConfig {
  int n_classes = 0;
  int input_dim = 0;  // spectral band count
  int hidden_units = 128;
  int hop_small = 1;  // branch-1 neighborhood size
  int hop_large = 4;  // branch-2 neighborhood size
  double beta = 0.75;
  bool global_enabled = true;
  // optional row normalization of the sparsified adjacency before the global
  // convolution; off by default (the convolution uses A as written)
  bool row_normalize_adjacency = false;

  void validate() const;
};

// All learnables. Attention encoders are stored u_out x u_in; the global
// convolution weights are stored input x output so they right-multiply the
// node features directly.
struct ModelParams {
  Matrix w_local[2][2];       // [branch][layer]
  Matrix a_local[2][2];       // (2u) x 1 each
  Matrix w_global[2];         // B x u, then u x C
  Matrix w_out;               // u x C
  Matrix lambda_local[2][2];  // 1x1 each
  Matrix lambda_loc;          // 1x1
  Matrix lambda_glo;          // 1x1
  Matrix zeta_raw;            // 1x1; the loss weight is softplus(zeta_raw)

  // Glorot-uniform weight matrices, attention vectors uniform in +-0.01,
  // every lambda at 1 and zeta_raw at softplus^-1(1); one seeded stream in
  // entries() order.
  static ModelParams init(const ModelConfig& config, uint64_t seed);

  // Fixed iteration order shared by the optimizer, checkpoints and
  // gradient checks.
  std::vector<std::pair<std::string, Matrix*>> entries();
  std::vector<std::pair<std::string, const Matrix*>> entries() const;
};

ModelParams params_from_checkpoint(const Checkpoint& ckpt, const ModelConfig& config);

struct LossInputs {
  const std::vector<int>* region_labels = nullptr;  // per-region class ids
  const std::vector<int>* labeled_ids = nullptr;    // training node ids
  const Matrix* onehot = nullptr;                   // n x C rows for labeled nodes
};

struct ForwardOutput {
  Value z_local[2][2];
  Value z_loc;
  Value a_tilde;  // unset when the global branch is disabled
  Value a_sparse;
  Value z_glo;
  Value z_loc_hat;
  Value output;  // n x C
  Value loss_recon;
  Value loss_class;
  Value loss_total;
  bool has_loss = false;
  std::vector<std::pair<std::string, Value>> param_values;  // entries() order
};

// One attention convolution: sigma(alpha * input * W^T) with alpha from
// attention_coefficients over this layer's input and parameters.
Value local_layer(Tape& tape, Value input, Value w, Value a, const NeighborhoodSets& mask);

// Weighted pathway sum over the four local representations.
Value local_output(Tape& tape, const Value z[2][2], const Value lambda[2][2]);

// Two composed global convolutions over the sparsified adjacency:
// sigma(A X W1) feeding sigma(A Z1 W2).
Value global_forward(Tape& tape, Value a_sparse, Value x, Value w1, Value w2);

// O = lambda_loc * Z_loc_hat + lambda_glo * Z_glo (local term only when the
// global branch is disabled).
Value fuse(Tape& tape, Value z_loc_hat, Value z_glo, Value lambda_loc, Value lambda_glo,
           bool global_enabled);

// Row-softmax cross entropy over the labeled nodes, in log-sum-exp form.
Value classification_loss(Tape& tape, Value output, const Matrix& onehot,
                          const std::vector<int>& labeled_ids);

// L = L_r + softplus(zeta_raw) * L_c.
Value total_loss(Tape& tape, Value loss_recon, Value loss_class, Value zeta_raw);

// Full pass in training order: local layers, weighted local output,
// reconstruction, sparsification, global convolution, fusion, and losses
// when labels are supplied.
ForwardOutput model_forward(Tape& tape, const Matrix& features, const NeighborhoodSets& hops1,
                            const NeighborhoodSets& hops2, ModelParams& params,
                            const ModelConfig& config, const LossInputs* labels = nullptr);

double softplus_scalar(double x);
double softplus_inverse(double y);

}  // namespace mgcn
