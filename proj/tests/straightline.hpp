// Test-only reference path: a literal, loop-by-loop evaluation of the whole
// network on plain matrices. Shares nothing with the tape implementation so
// the two can check each other.
#pragma once

#include <cmath>
#include <vector>

#include "mgcn/matrix.hpp"
#include "mgcn/model.hpp"
#include "mgcn/neighborhoods.hpp"

namespace mgcn::testing {

struct StraightlineResult {
  Matrix z_local[2][2];
  Matrix z_loc;
  Matrix a_tilde;
  Matrix a_sparse;
  Matrix z_glo;
  Matrix z_loc_hat;
  Matrix output;
  Matrix alpha[2][2];
  double loss_recon = 0.0;
  double loss_class = 0.0;
  double zeta = 0.0;
  double loss_total = 0.0;
};

inline Matrix sl_encode(const Matrix& input, const Matrix& w) {
  Matrix enc(input.rows(), w.rows());
  for (int i = 0; i < input.rows(); ++i) {
    for (int o = 0; o < w.rows(); ++o) {
      double acc = 0.0;
      for (int k = 0; k < w.cols(); ++k) acc += w(o, k) * input(i, k);
      enc(i, o) = acc;
    }
  }
  return enc;
}

inline Matrix sl_attention(const Matrix& input, const Matrix& w, const Matrix& a,
                           const NeighborhoodSets& mask) {
  const Matrix enc = sl_encode(input, w);
  const int n = input.rows();
  const int u = w.rows();
  Matrix alpha(n, n);
  for (int i = 0; i < n; ++i) {
    double denom = 0.0;
    std::vector<double> numer;
    for (int j : mask.sets[i]) {
      double score = 0.0;
      for (int o = 0; o < u; ++o) score += a(o, 0) * enc(i, o);
      for (int o = 0; o < u; ++o) score += a(u + o, 0) * enc(j, o);
      if (score < 0.0) score *= 0.2;
      numer.push_back(std::exp(score));
      denom += numer.back();
    }
    for (size_t t = 0; t < mask.sets[i].size(); ++t) {
      alpha(i, mask.sets[i][t]) = numer[t] / denom;
    }
  }
  return alpha;
}

inline Matrix sl_local_layer(const Matrix& input, const Matrix& w, const Matrix& a,
                             const NeighborhoodSets& mask, Matrix* alpha_out = nullptr) {
  const Matrix enc = sl_encode(input, w);
  const Matrix alpha = sl_attention(input, w, a, mask);
  if (alpha_out != nullptr) *alpha_out = alpha;
  Matrix z(input.rows(), w.rows());
  for (int i = 0; i < input.rows(); ++i) {
    for (int o = 0; o < w.rows(); ++o) {
      double acc = 0.0;
      for (int j : mask.sets[i]) acc += alpha(i, j) * enc(j, o);
      z(i, o) = acc > 0.0 ? acc : 0.0;
    }
  }
  return z;
}

inline StraightlineResult straightline_eval(const Matrix& x, const NeighborhoodSets& hops1,
                                            const NeighborhoodSets& hops2,
                                            const ModelParams& p, const ModelConfig& cfg,
                                            const std::vector<int>& labels,
                                            const std::vector<int>& labeled_ids,
                                            const Matrix& onehot) {
  StraightlineResult r;
  const int n = x.rows();
  const int u = cfg.hidden_units;
  const NeighborhoodSets* masks[2] = {&hops1, &hops2};

  for (int b = 0; b < 2; ++b) {
    r.z_local[b][0] = sl_local_layer(x, p.w_local[b][0], p.a_local[b][0], *masks[b],
                                     &r.alpha[b][0]);
  }
  Matrix z1(n, u);
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < u; ++o) z1(i, o) = r.z_local[0][0](i, o) + r.z_local[1][0](i, o);
  }
  for (int b = 0; b < 2; ++b) {
    r.z_local[b][1] = sl_local_layer(z1, p.w_local[b][1], p.a_local[b][1], *masks[b],
                                     &r.alpha[b][1]);
  }

  r.z_loc = Matrix(n, u);
  for (int i = 0; i < n; ++i) {
    for (int o = 0; o < u; ++o) {
      const double layer1 = p.lambda_local[0][0](0, 0) * r.z_local[0][0](i, o) +
                            p.lambda_local[1][0](0, 0) * r.z_local[1][0](i, o);
      const double layer2 = p.lambda_local[0][1](0, 0) * r.z_local[0][1](i, o) +
                            p.lambda_local[1][1](0, 0) * r.z_local[1][1](i, o);
      r.z_loc(i, o) = layer1 + layer2;
    }
  }

  r.a_tilde = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      double d2 = 0.0;
      for (int o = 0; o < u; ++o) {
        const double d = r.z_loc(i, o) - r.z_loc(j, o);
        d2 += d * d;
      }
      r.a_tilde(i, j) = std::exp(-d2);
    }
  }
  r.a_sparse = Matrix(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      r.a_sparse(i, j) = (r.a_tilde(i, j) >= cfg.beta) ? r.a_tilde(i, j) : 0.0;
    }
  }

  auto times = [](const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    for (int i = 0; i < a.rows(); ++i) {
      for (int j = 0; j < b.cols(); ++j) {
        double acc = 0.0;
        for (int k = 0; k < a.cols(); ++k) acc += a(i, k) * b(k, j);
        out(i, j) = acc;
      }
    }
    return out;
  };
  auto relu_all = [](Matrix m) {
    for (double& v : m.raw()) v = v > 0.0 ? v : 0.0;
    return m;
  };

  if (cfg.global_enabled) {
    Matrix zg1 = relu_all(times(times(r.a_sparse, x), p.w_global[0]));
    r.z_glo = relu_all(times(times(r.a_sparse, zg1), p.w_global[1]));
  } else {
    r.z_glo = Matrix(n, cfg.n_classes);
  }

  r.z_loc_hat = times(r.z_loc, p.w_out);
  r.output = Matrix(n, cfg.n_classes);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < cfg.n_classes; ++j) {
      double v = p.lambda_loc(0, 0) * r.z_loc_hat(i, j);
      if (cfg.global_enabled) v += p.lambda_glo(0, 0) * r.z_glo(i, j);
      r.output(i, j) = v;
    }
  }

  if (cfg.global_enabled) {
    for (int i : labeled_ids) {
      for (int j : labeled_ids) {
        const double ind = (labels[i] == labels[j]) ? 1.0 : 0.0;
        const double d = r.a_tilde(i, j) - ind;
        r.loss_recon += d * d;
      }
    }
  }

  for (int i : labeled_ids) {
    double denom = 0.0;
    for (int j = 0; j < cfg.n_classes; ++j) denom += std::exp(r.output(i, j));
    for (int j = 0; j < cfg.n_classes; ++j) {
      if (onehot(i, j) != 0.0) {
        r.loss_class -= onehot(i, j) * std::log(std::exp(r.output(i, j)) / denom);
      }
    }
  }

  r.zeta = std::log(1.0 + std::exp(p.zeta_raw(0, 0)));
  r.loss_total = r.loss_recon + r.zeta * r.loss_class;
  return r;
}

}  // namespace mgcn::testing
