#pragma once

#include <vector>

#include "mgcn/autodiff.hpp"
#include "mgcn/neighborhoods.hpp"

namespace mgcn {

// Attention over spatial neighborhoods: score(i,j) = a^T [W h_i || W h_j]
// passed through LeakyReLU (slope 0.2) and softmax-normalized over each
// row's neighbor set. w is u_out x u_in, a is (2*u_out) x 1, h is n x u_in.
// Entries outside the neighborhood are exactly 0.
Value attention_coefficients(Tape& tape, Value h, Value w, Value a,
                             const NeighborhoodSets& mask);

constexpr double kAttentionLeakySlope = 0.2;

// Dense similarity graph from learned features: out[i][j] = exp(-||z_i - z_j||^2).
// Symmetric with an exactly-1 diagonal; every entry lies in (0, 1].
Value reconstruct_adjacency(Tape& tape, Value z_loc);

// Keeps similarities >= beta, zeroes the rest. beta in [0,1); the hard gate
// passes gradient only through kept entries.
Value sparsify(Tape& tape, Value a_tilde, double beta);

// Sum over ordered labeled pairs (i,j) of (A~[i][j] - 1[y_i == y_j])^2,
// including i == j (a zero term since the diagonal is 1). The optional mean
// reduction divides by the pair count; it defaults off.
Value reconstruction_loss(Tape& tape, Value a_tilde, const std::vector<int>& labels,
                          const std::vector<int>& labeled_ids, bool mean_reduction = false);

}  // namespace mgcn
