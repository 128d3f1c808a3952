#include "mgcn/graph_learning.hpp"

#include <string>

#include "mgcn/errors.hpp"

namespace mgcn {

Value attention_coefficients(Tape& tape, Value h, Value w, Value a,
                             const NeighborhoodSets& mask) {
  const int u_out = w.rows();
  if (a.rows() != 2 * u_out || a.cols() != 1) {
    throw ShapeError("attention_coefficients: weight vector must be " +
                     std::to_string(2 * u_out) + "x1, got " + shape_string(a.data()));
  }
  if (w.cols() != h.cols()) {
    throw ShapeError("attention_coefficients: encoder expects " + std::to_string(w.cols()) +
                     " input features, got " + std::to_string(h.cols()));
  }
  Value encoded = tape.matmul(h, tape.transpose(w));  // n x u_out, row i = (W h_i)^T
  // a^T [Wh_i || Wh_j] splits into a_top . Wh_i + a_bottom . Wh_j
  Value a_top = tape.slice_rows(a, 0, u_out);
  Value a_bottom = tape.slice_rows(a, u_out, 2 * u_out);
  Value scores = tape.add_outer(tape.matmul(encoded, a_top), tape.matmul(encoded, a_bottom));
  return tape.masked_softmax(tape.leaky_relu(scores, kAttentionLeakySlope), mask);
}

Value reconstruct_adjacency(Tape& tape, Value z_loc) {
  if (!all_finite(z_loc.data())) {
    throw NumericalError("reconstruct_adjacency: non-finite features");
  }
  return tape.exp(tape.scalar_mul(tape.row_sq_dist(z_loc), -1.0));
}

Value sparsify(Tape& tape, Value a_tilde, double beta) {
  return tape.threshold_keep(a_tilde, beta);
}

Value reconstruction_loss(Tape& tape, Value a_tilde, const std::vector<int>& labels,
                          const std::vector<int>& labeled_ids, bool mean_reduction) {
  if (labeled_ids.empty()) throw ConfigError("reconstruction_loss: no labeled nodes");
  const int n = a_tilde.rows();
  Matrix pair_mask(n, n);
  Matrix target(n, n);
  for (int i : labeled_ids) {
    for (int j : labeled_ids) {
      pair_mask(i, j) = 1.0;
      target(i, j) = (labels[i] == labels[j]) ? 1.0 : 0.0;
    }
  }
  Value diff = tape.hadamard(tape.sub(a_tilde, tape.constant(std::move(target))),
                             tape.constant(std::move(pair_mask)));
  Value loss = tape.sum(tape.hadamard(diff, diff));
  if (mean_reduction) {
    const double pairs = static_cast<double>(labeled_ids.size()) * labeled_ids.size();
    loss = tape.scalar_mul(loss, 1.0 / pairs);
  }
  return loss;
}

}  // namespace mgcn
