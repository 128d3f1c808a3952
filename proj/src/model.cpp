#include "mgcn/model.hpp"

#include <cmath>

#include "mgcn/errors.hpp"
#include "mgcn/rng.hpp"

namespace mgcn {

void ModelConfig::validate() const {
  if (n_classes < 2) throw ConfigError("model: need at least 2 classes");
  if (input_dim < 1) throw ConfigError("model: input dimension must be positive");
  if (hidden_units < 1) throw ConfigError("model: hidden units must be positive");
  if (hop_small < 1) throw ConfigError("model: s1 must be at least 1");
  if (hop_small >= hop_large) throw ConfigError("model: s1 must be smaller than s2");
  if (beta < 0.0 || beta >= 1.0) throw ConfigError("model: beta must lie in [0,1)");
}

double softplus_scalar(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

double softplus_inverse(double y) { return std::log(std::expm1(y)); }

namespace {

Matrix glorot(int rows, int cols, Rng& rng) {
  const double bound = std::sqrt(6.0 / (rows + cols));
  Matrix m(rows, cols);
  for (double& v : m.raw()) v = uniform_in(rng, -bound, bound);
  return m;
}

Matrix small_uniform(int rows, Rng& rng) {
  Matrix m(rows, 1);
  for (double& v : m.raw()) v = uniform_in(rng, -0.01, 0.01);
  return m;
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& config, uint64_t seed) {
  config.validate();
  const int u = config.hidden_units;
  const int b_in = config.input_dim;
  const int c = config.n_classes;

  ModelParams p;
  Rng rng = make_rng(seed);
  for (int b = 0; b < 2; ++b) {
    for (int l = 0; l < 2; ++l) {
      const int in = (l == 0) ? b_in : u;
      p.w_local[b][l] = glorot(u, in, rng);
      p.a_local[b][l] = small_uniform(2 * u, rng);
      p.lambda_local[b][l] = Matrix::scalar(1.0);
    }
  }
  p.w_global[0] = glorot(b_in, u, rng);
  p.w_global[1] = glorot(u, c, rng);
  p.w_out = glorot(u, c, rng);
  p.lambda_loc = Matrix::scalar(1.0);
  p.lambda_glo = Matrix::scalar(1.0);
  p.zeta_raw = Matrix::scalar(softplus_inverse(1.0));
  return p;
}

std::vector<std::pair<std::string, Matrix*>> ModelParams::entries() {
  std::vector<std::pair<std::string, Matrix*>> out;
  for (int b = 0; b < 2; ++b) {
    for (int l = 0; l < 2; ++l) {
      const std::string tag = "_b" + std::to_string(b + 1) + "_l" + std::to_string(l + 1);
      out.emplace_back("w_local" + tag, &w_local[b][l]);
      out.emplace_back("a_local" + tag, &a_local[b][l]);
    }
  }
  out.emplace_back("w_global_1", &w_global[0]);
  out.emplace_back("w_global_2", &w_global[1]);
  out.emplace_back("w_out", &w_out);
  for (int b = 0; b < 2; ++b) {
    for (int l = 0; l < 2; ++l) {
      const std::string tag = "_b" + std::to_string(b + 1) + "_l" + std::to_string(l + 1);
      out.emplace_back("lambda" + tag, &lambda_local[b][l]);
    }
  }
  out.emplace_back("lambda_loc", &lambda_loc);
  out.emplace_back("lambda_glo", &lambda_glo);
  out.emplace_back("zeta_raw", &zeta_raw);
  return out;
}

std::vector<std::pair<std::string, const Matrix*>> ModelParams::entries() const {
  auto mutable_entries = const_cast<ModelParams*>(this)->entries();
  std::vector<std::pair<std::string, const Matrix*>> out;
  out.reserve(mutable_entries.size());
  for (auto& [name, m] : mutable_entries) out.emplace_back(name, m);
  return out;
}

ModelParams params_from_checkpoint(const Checkpoint& ckpt, const ModelConfig& config) {
  ModelParams expected = ModelParams::init(config, 0);
  auto slots = expected.entries();
  if (ckpt.params.size() != slots.size()) {
    throw ShapeError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                     " parameters, model expects " + std::to_string(slots.size()));
  }
  for (size_t i = 0; i < slots.size(); ++i) {
    const auto& [name, stored] = ckpt.params[i];
    if (name != slots[i].first) {
      throw ShapeError("checkpoint parameter '" + name + "' does not match expected '" +
                       slots[i].first + "'");
    }
    if (!stored.same_shape(*slots[i].second)) {
      throw ShapeError("checkpoint parameter '" + name + "' has shape " + shape_string(stored) +
                       ", model expects " + shape_string(*slots[i].second));
    }
    *slots[i].second = stored;
  }
  return expected;
}

Value local_layer(Tape& tape, Value input, Value w, Value a, const NeighborhoodSets& mask) {
  Value alpha = attention_coefficients(tape, input, w, a, mask);
  return tape.relu(tape.matmul(alpha, tape.matmul(input, tape.transpose(w))));
}

Value local_output(Tape& tape, const Value z[2][2], const Value lambda[2][2]) {
  // grouped per layer so unit lambdas reproduce (Z1_1+Z2_1) + (Z1_2+Z2_2)
  // bit for bit
  Value per_layer[2];
  for (int l = 0; l < 2; ++l) {
    per_layer[l] = tape.add(tape.scale_by(lambda[0][l], z[0][l]),
                            tape.scale_by(lambda[1][l], z[1][l]));
  }
  return tape.add(per_layer[0], per_layer[1]);
}

Value global_forward(Tape& tape, Value a_sparse, Value x, Value w1, Value w2) {
  Value z1 = tape.relu(tape.matmul(tape.matmul(a_sparse, x), w1));
  return tape.relu(tape.matmul(tape.matmul(a_sparse, z1), w2));
}

Value fuse(Tape& tape, Value z_loc_hat, Value z_glo, Value lambda_loc, Value lambda_glo,
           bool global_enabled) {
  Value local_term = tape.scale_by(lambda_loc, z_loc_hat);
  if (!global_enabled) return local_term;
  return tape.add(local_term, tape.scale_by(lambda_glo, z_glo));
}

Value classification_loss(Tape& tape, Value output, const Matrix& onehot,
                          const std::vector<int>& labeled_ids) {
  return tape.softmax_cross_entropy(output, onehot, labeled_ids);
}

Value total_loss(Tape& tape, Value loss_recon, Value loss_class, Value zeta_raw) {
  return tape.add(loss_recon, tape.scale_by(tape.softplus(zeta_raw), loss_class));
}

ForwardOutput model_forward(Tape& tape, const Matrix& features, const NeighborhoodSets& hops1,
                            const NeighborhoodSets& hops2, ModelParams& params,
                            const ModelConfig& config, const LossInputs* labels) {
  config.validate();
  if (features.cols() != config.input_dim) {
    throw ShapeError("model_forward: features have " + std::to_string(features.cols()) +
                     " bands, config expects " + std::to_string(config.input_dim));
  }
  if (hops1.n() != features.rows() || hops2.n() != features.rows()) {
    throw ShapeError("model_forward: neighborhood sets do not cover every region");
  }

  ForwardOutput out;
  Value x = tape.constant(features);

  // bind every parameter in entries() order so adjoints map back by name
  {
    auto slots = params.entries();
    out.param_values.reserve(slots.size());
    for (auto& [name, matrix] : slots) {
      out.param_values.emplace_back(name, tape.input(*matrix));
    }
  }
  auto value_of = [&](const std::string& name) {
    for (auto& [n, v] : out.param_values) {
      if (n == name) return v;
    }
    throw ShapeError("model_forward: unknown parameter " + name);
  };
  Value w_loc[2][2], a_loc[2][2], lam[2][2];
  for (int b = 0; b < 2; ++b) {
    for (int l = 0; l < 2; ++l) {
      const std::string tag = "_b" + std::to_string(b + 1) + "_l" + std::to_string(l + 1);
      w_loc[b][l] = value_of("w_local" + tag);
      a_loc[b][l] = value_of("a_local" + tag);
      lam[b][l] = value_of("lambda" + tag);
    }
  }

  const NeighborhoodSets* masks[2] = {&hops1, &hops2};

  // layer 1 consumes the raw features on both branches
  for (int b = 0; b < 2; ++b) {
    out.z_local[b][0] = local_layer(tape, x, w_loc[b][0], a_loc[b][0], *masks[b]);
  }
  // layer 2 consumes the summed layer-1 output
  Value z1 = tape.add(out.z_local[0][0], out.z_local[1][0]);
  for (int b = 0; b < 2; ++b) {
    out.z_local[b][1] = local_layer(tape, z1, w_loc[b][1], a_loc[b][1], *masks[b]);
  }

  out.z_loc = local_output(tape, out.z_local, lam);
  out.z_loc_hat = tape.matmul(out.z_loc, value_of("w_out"));

  if (config.global_enabled) {
    out.a_tilde = reconstruct_adjacency(tape, out.z_loc);
    out.a_sparse = sparsify(tape, out.a_tilde, config.beta);
    // the unit diagonal always survives sparsification, so row sums are >= 1
    Value a_used = config.row_normalize_adjacency ? tape.row_normalize(out.a_sparse)
                                                  : out.a_sparse;
    out.z_glo = global_forward(tape, a_used, x, value_of("w_global_1"),
                               value_of("w_global_2"));
  }

  out.output = fuse(tape, out.z_loc_hat, out.z_glo, value_of("lambda_loc"),
                    value_of("lambda_glo"), config.global_enabled);

  if (labels != nullptr) {
    if (labels->labeled_ids == nullptr || labels->onehot == nullptr ||
        labels->region_labels == nullptr) {
      throw ConfigError("model_forward: incomplete loss inputs");
    }
    if (config.global_enabled) {
      out.loss_recon =
          reconstruction_loss(tape, out.a_tilde, *labels->region_labels, *labels->labeled_ids);
    } else {
      out.loss_recon = tape.constant(Matrix::scalar(0.0));
    }
    out.loss_class = classification_loss(tape, out.output, *labels->onehot, *labels->labeled_ids);
    out.loss_total = total_loss(tape, out.loss_recon, out.loss_class, value_of("zeta_raw"));
    out.has_loss = true;
  }
  return out;
}

}  // namespace mgcn
