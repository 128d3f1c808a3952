#include <doctest.h>

#include <cmath>

#include "mgcn/errors.hpp"
#include "mgcn/model.hpp"
#include "mgcn/rng.hpp"
#include "straightline.hpp"

using namespace mgcn;

namespace {

Matrix random_matrix(int r, int c, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Matrix m(r, c);
  for (double& v : m.raw()) v = uniform_in(rng, lo, hi);
  return m;
}

NeighborhoodSets self_only(int n) {
  NeighborhoodSets s;
  s.sets.resize(n);
  for (int i = 0; i < n; ++i) s.sets[i] = {i};
  return s;
}

NeighborhoodSets path_hops(int n, int hops) {
  NeighborhoodSets s;
  s.sets.resize(n);
  for (int i = 0; i < n; ++i) {
    for (int j = std::max(0, i - hops); j <= std::min(n - 1, i + hops); ++j) {
      s.sets[i].push_back(j);
    }
  }
  return s;
}

// 10-node ring instance shared by the oracle-equivalence and gradient tests
struct TestInstance {
  Matrix x;
  NeighborhoodSets hops1, hops2;
  ModelConfig config;
  ModelParams params;
  std::vector<int> labels;
  std::vector<int> labeled_ids;
  Matrix onehot;

  explicit TestInstance(uint64_t seed, int n = 10, double beta = 0.75) {
    Rng rng = make_rng(seed);
    config.n_classes = 3;
    config.input_dim = 5;
    config.hidden_units = 8;
    config.hop_small = 1;
    config.hop_large = 2;
    config.beta = beta;
    x = random_matrix(n, config.input_dim, rng);

    std::vector<std::vector<int>> ring(n);
    for (int i = 0; i < n; ++i) {
      ring[i].push_back((i + 1) % n);
      ring[i].push_back((i + n - 1) % n);
    }
    hops1 = hop_neighborhoods_of(ring, 1);
    hops2 = hop_neighborhoods_of(ring, 2);

    params = ModelParams::init(config, seed + 1);
    labels.resize(n);
    onehot = Matrix(n, config.n_classes);
    for (int i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(bounded(rng, config.n_classes)) + 1;
      onehot(i, labels[i] - 1) = 1.0;
    }
    labeled_ids = {0, 2, 3, 5, 7, 8};
  }

  // minimal BFS copy so this file does not depend on the segmentation module
  static NeighborhoodSets hop_neighborhoods_of(const std::vector<std::vector<int>>& adj,
                                               int hops) {
    const int n = static_cast<int>(adj.size());
    NeighborhoodSets out;
    out.sets.resize(n);
    for (int src = 0; src < n; ++src) {
      std::vector<int> dist(n, -1);
      dist[src] = 0;
      std::vector<int> frontier = {src};
      for (int d = 0; d < hops; ++d) {
        std::vector<int> next;
        for (int u : frontier) {
          for (int v : adj[u]) {
            if (dist[v] < 0) {
              dist[v] = d + 1;
              next.push_back(v);
            }
          }
        }
        frontier = std::move(next);
      }
      for (int v = 0; v < n; ++v) {
        if (dist[v] >= 0) out.sets[src].push_back(v);
      }
    }
    return out;
  }

  LossInputs loss_inputs() const {
    LossInputs li;
    li.region_labels = &labels;
    li.labeled_ids = &labeled_ids;
    li.onehot = &onehot;
    return li;
  }
};

}  // namespace

TEST_CASE("isolated node with identity weights passes its feature through") {
  ModelConfig cfg;
  cfg.n_classes = 2;
  cfg.input_dim = 3;
  cfg.hidden_units = 3;
  cfg.hop_small = 1;
  cfg.hop_large = 2;

  Tape tape;
  Matrix x(1, 3, {0.5, 0.0, 2.0});  // non-negative so ReLU is the identity
  Value z = local_layer(tape, tape.input(x), tape.input(Matrix::identity(3)),
                        tape.input(Matrix(6, 1)), self_only(1));
  CHECK(bit_identical(z.data(), x));
}

TEST_CASE("zero features produce zero local output") {
  Rng rng = make_rng(2);
  Tape tape;
  Value z = local_layer(tape, tape.input(Matrix(4, 3)), tape.input(random_matrix(5, 3, rng)),
                        tape.input(random_matrix(10, 1, rng)), path_hops(4, 1));
  for (double v : z.data().raw()) CHECK(v == 0.0);
}

TEST_CASE("local layer matches the straight-line oracle on a 4-node path") {
  Rng rng = make_rng(3);
  const Matrix x = random_matrix(4, 3, rng);
  const Matrix w = random_matrix(5, 3, rng);
  const Matrix a = random_matrix(10, 1, rng);
  NeighborhoodSets mask = path_hops(4, 1);

  Tape tape;
  Value z = local_layer(tape, tape.input(x), tape.input(w), tape.input(a), mask);
  Matrix expected = testing::sl_local_layer(x, w, a, mask);
  CHECK(max_abs_diff(z.data(), expected) < 1e-12);
}

TEST_CASE("local_output weighting") {
  Rng rng = make_rng(4);
  Tape tape;
  Value z[2][2];
  for (int b = 0; b < 2; ++b) {
    for (int l = 0; l < 2; ++l) z[b][l] = tape.input(random_matrix(3, 4, rng));
  }

  SUBCASE("unit weights reduce to the unweighted pathway sum exactly") {
    Value lambda[2][2];
    for (auto& row : lambda) {
      for (auto& v : row) v = tape.input(Matrix::scalar(1.0));
    }
    Value weighted = local_output(tape, z, lambda);
    Value plain = tape.add(tape.add(z[0][0], z[1][0]), tape.add(z[0][1], z[1][1]));
    CHECK(bit_identical(weighted.data(), plain.data()));
  }

  SUBCASE("a single unit weight selects one branch") {
    Value lambda[2][2];
    lambda[0][0] = tape.input(Matrix::scalar(1.0));
    lambda[1][0] = tape.input(Matrix::scalar(0.0));
    lambda[0][1] = tape.input(Matrix::scalar(0.0));
    lambda[1][1] = tape.input(Matrix::scalar(0.0));
    CHECK(bit_identical(local_output(tape, z, lambda).data(), z[0][0].data()));
  }

  SUBCASE("all-zero weights give zero") {
    Value lambda[2][2];
    for (auto& row : lambda) {
      for (auto& v : row) v = tape.input(Matrix::scalar(0.0));
    }
    for (double v : local_output(tape, z, lambda).data().raw()) CHECK(v == 0.0);
  }
}

TEST_CASE("global convolution closed forms and oracle equivalence") {
  Rng rng = make_rng(5);

  SUBCASE("identity adjacency with non-negative operands drops the ReLU") {
    const Matrix x = random_matrix(4, 3, rng, 0.0, 1.0);
    const Matrix w1 = random_matrix(3, 5, rng, 0.0, 1.0);
    const Matrix w2 = random_matrix(5, 2, rng, 0.0, 1.0);
    Tape tape;
    Value zg = global_forward(tape, tape.input(Matrix::identity(4)), tape.input(x),
                              tape.input(w1), tape.input(w2));
    // non-negative inputs: z1 = X W1, z2 = z1 W2
    Value expected = tape.matmul(tape.matmul(tape.input(x), tape.input(w1)), tape.input(w2));
    CHECK(max_abs_diff(zg.data(), expected.data()) == 0.0);
  }

  SUBCASE("zero features give zero output") {
    Tape tape;
    Value zg = global_forward(tape, tape.input(Matrix::identity(3)), tape.input(Matrix(3, 4)),
                              tape.input(random_matrix(4, 5, rng)),
                              tape.input(random_matrix(5, 2, rng)));
    for (double v : zg.data().raw()) CHECK(v == 0.0);
  }

  SUBCASE("5-node instance matches the straight-line path") {
    TestInstance inst(17, 5);
    Tape tape;
    ForwardOutput fo = model_forward(tape, inst.x, inst.hops1, inst.hops2, inst.params,
                                     inst.config);
    auto sl = testing::straightline_eval(inst.x, inst.hops1, inst.hops2, inst.params,
                                         inst.config, inst.labels, inst.labeled_ids,
                                         inst.onehot);
    CHECK(max_abs_diff(fo.z_glo.data(), sl.z_glo) < 1e-12);
  }
}

TEST_CASE("fuse selects and mixes levels") {
  Rng rng = make_rng(6);
  Tape tape;
  const Matrix zl = random_matrix(4, 3, rng);
  const Matrix zg = random_matrix(4, 3, rng);
  Value vzl = tape.input(zl);
  Value vzg = tape.input(zg);

  Value only_local = fuse(tape, vzl, vzg, tape.input(Matrix::scalar(1.0)),
                          tape.input(Matrix::scalar(0.0)), true);
  CHECK(max_abs_diff(only_local.data(), zl) == 0.0);

  Value only_global = fuse(tape, vzl, vzg, tape.input(Matrix::scalar(0.0)),
                           tape.input(Matrix::scalar(1.0)), true);
  CHECK(max_abs_diff(only_global.data(), zg) == 0.0);

  Value convex = fuse(tape, vzl, vzl, tape.input(Matrix::scalar(0.5)),
                      tape.input(Matrix::scalar(0.5)), true);
  CHECK(max_abs_diff(convex.data(), zl) < 1e-15);
}

TEST_CASE("classification loss closed forms") {
  SUBCASE("uniform row over four classes") {
    Tape tape;
    Matrix onehot(1, 4);
    onehot(0, 1) = 1.0;
    Value loss = classification_loss(tape, tape.input(Matrix(1, 4, 0.25)), onehot, {0});
    CHECK(loss.scalar_value() == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  }

  SUBCASE("a huge margin drives the loss to zero") {
    Tape tape;
    Matrix o(1, 3);
    o(0, 0) = 200.0;
    Matrix onehot(1, 3);
    onehot(0, 0) = 1.0;
    Value loss = classification_loss(tape, tape.input(o), onehot, {0});
    CHECK(loss.scalar_value() >= 0.0);
    CHECK(loss.scalar_value() < 1e-12);
  }

  SUBCASE("three labeled rows match direct summation") {
    Rng rng = make_rng(7);
    const Matrix o = random_matrix(5, 3, rng);
    Matrix onehot(5, 3);
    std::vector<int> labels = {2, 0, 1, 0, 2};
    for (int i = 0; i < 5; ++i) onehot(i, labels[i]) = 1.0;
    std::vector<int> ids = {0, 2, 4};

    double expected = 0.0;
    for (int i : ids) {
      double denom = 0.0;
      for (int j = 0; j < 3; ++j) denom += std::exp(o(i, j));
      expected -= std::log(std::exp(o(i, labels[i])) / denom);
    }
    Tape tape;
    Value loss = classification_loss(tape, tape.input(o), onehot, ids);
    CHECK(loss.scalar_value() == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("total loss composition") {
  Tape tape;
  Value lr = tape.input(Matrix::scalar(2.5));
  Value lc = tape.input(Matrix::scalar(4.0));

  // zeta_raw chosen so softplus gives exactly 1
  Value unit = total_loss(tape, lr, lc, tape.input(Matrix::scalar(softplus_inverse(1.0))));
  CHECK(unit.scalar_value() == doctest::Approx(6.5).epsilon(1e-12));

  Value no_class = total_loss(tape, lr, tape.input(Matrix::scalar(0.0)),
                              tape.input(Matrix::scalar(-3.0)));
  CHECK(no_class.scalar_value() == 2.5);

  CHECK(softplus_scalar(0.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("single-region degenerate graph still runs") {
  ModelConfig cfg;
  cfg.n_classes = 4;
  cfg.input_dim = 3;
  cfg.hidden_units = 6;
  cfg.hop_small = 1;
  cfg.hop_large = 2;
  ModelParams params = ModelParams::init(cfg, 3);
  Tape tape;
  Rng rng = make_rng(8);
  ForwardOutput fo = model_forward(tape, random_matrix(1, 3, rng), self_only(1), self_only(1),
                                   params, cfg);
  CHECK(fo.output.rows() == 1);
  CHECK(fo.output.cols() == 4);
  CHECK(fo.a_tilde.data()(0, 0) == 1.0);
}

TEST_CASE("disabling the global branch reproduces the local-only ablation") {
  TestInstance inst(21);
  Tape tape;
  ForwardOutput fo =
      model_forward(tape, inst.x, inst.hops1, inst.hops2, inst.params, inst.config);

  ModelConfig loc_cfg = inst.config;
  loc_cfg.global_enabled = false;
  Tape loc_tape;
  LossInputs li = inst.loss_inputs();
  ForwardOutput loc = model_forward(loc_tape, inst.x, inst.hops1, inst.hops2, inst.params,
                                    loc_cfg, &li);

  CHECK_FALSE(loc.a_tilde.valid());
  CHECK_FALSE(loc.z_glo.valid());
  // O reduces to lambda_loc * Z_loc_hat
  Matrix expected = loc.z_loc_hat.data();
  for (double& v : expected.raw()) v *= inst.params.lambda_loc(0, 0);
  CHECK(max_abs_diff(loc.output.data(), expected) == 0.0);
  // no reconstruction term in the ablation loss
  CHECK(loc.loss_recon.scalar_value() == 0.0);
  CHECK(loc.loss_total.scalar_value() ==
        doctest::Approx(softplus_scalar(inst.params.zeta_raw(0, 0)) *
                        loc.loss_class.scalar_value())
            .epsilon(1e-12));
  // full model differs (the global pathway contributes)
  CHECK(max_abs_diff(fo.output.data(), loc.output.data()) > 0.0);
}

TEST_CASE("full forward pass matches the independent straight-line evaluation") {
  TestInstance inst(33);
  Tape tape;
  LossInputs li = inst.loss_inputs();
  ForwardOutput fo =
      model_forward(tape, inst.x, inst.hops1, inst.hops2, inst.params, inst.config, &li);
  auto sl = testing::straightline_eval(inst.x, inst.hops1, inst.hops2, inst.params, inst.config,
                                       inst.labels, inst.labeled_ids, inst.onehot);

  for (int b = 0; b < 2; ++b) {
    for (int l = 0; l < 2; ++l) {
      CHECK(max_abs_diff(fo.z_local[b][l].data(), sl.z_local[b][l]) < 1e-12);
    }
  }
  CHECK(max_abs_diff(fo.z_loc.data(), sl.z_loc) < 1e-12);
  CHECK(max_abs_diff(fo.a_tilde.data(), sl.a_tilde) < 1e-12);
  CHECK(max_abs_diff(fo.a_sparse.data(), sl.a_sparse) < 1e-12);
  CHECK(max_abs_diff(fo.z_glo.data(), sl.z_glo) < 1e-12);
  CHECK(max_abs_diff(fo.output.data(), sl.output) < 1e-12);
  CHECK(std::fabs(fo.loss_recon.scalar_value() - sl.loss_recon) < 1e-10);
  CHECK(std::fabs(fo.loss_class.scalar_value() - sl.loss_class) < 1e-10);
  CHECK(std::fabs(fo.loss_total.scalar_value() - sl.loss_total) < 1e-10);
}

TEST_CASE("attention rows sum to one for every branch and layer") {
  for (uint64_t seed = 0; seed < 4; ++seed) {
    TestInstance inst(100 + seed);
    auto sl = testing::straightline_eval(inst.x, inst.hops1, inst.hops2, inst.params,
                                         inst.config, inst.labels, inst.labeled_ids,
                                         inst.onehot);
    for (int b = 0; b < 2; ++b) {
      for (int l = 0; l < 2; ++l) {
        for (int i = 0; i < 10; ++i) {
          double row = 0.0;
          for (int j = 0; j < 10; ++j) row += sl.alpha[b][l](i, j);
          CHECK(std::fabs(row - 1.0) < 1e-9);
        }
      }
    }
  }
}

TEST_CASE("permutation of region ids permutes the output rows") {
  TestInstance inst(55);
  Tape tape;
  ForwardOutput fo =
      model_forward(tape, inst.x, inst.hops1, inst.hops2, inst.params, inst.config);

  // permute nodes
  const int n = 10;
  std::vector<int> perm(n);
  Rng rng = make_rng(56);
  for (int i = 0; i < n; ++i) perm[i] = i;
  shuffle_vec(perm, rng);

  Matrix px(n, inst.x.cols());
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < inst.x.cols(); ++j) px(perm[i], j) = inst.x(i, j);
  }
  auto permute_sets = [&](const NeighborhoodSets& s) {
    NeighborhoodSets out;
    out.sets.resize(n);
    for (int i = 0; i < n; ++i) {
      for (int j : s.sets[i]) out.sets[perm[i]].push_back(perm[j]);
      std::sort(out.sets[perm[i]].begin(), out.sets[perm[i]].end());
    }
    return out;
  };
  NeighborhoodSets p1 = permute_sets(inst.hops1);
  NeighborhoodSets p2 = permute_sets(inst.hops2);

  Tape ptape;
  ForwardOutput pfo = model_forward(ptape, px, p1, p2, inst.params, inst.config);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < inst.config.n_classes; ++j) {
      CHECK(std::fabs(pfo.output.data()(perm[i], j) - fo.output.data()(i, j)) < 1e-12);
    }
  }
}

TEST_CASE("end-to-end gradients match finite differences on a 10-node instance") {
  // beta = 0 keeps every similarity, so the threshold cannot sit on a kink
  TestInstance inst(77, 10, 0.0);
  LossInputs li = inst.loss_inputs();

  Tape tape;
  ForwardOutput fo =
      model_forward(tape, inst.x, inst.hops1, inst.hops2, inst.params, inst.config, &li);
  tape.backward(fo.loss_total);

  auto slots = inst.params.entries();
  std::vector<Matrix> values, analytic;
  for (size_t i = 0; i < slots.size(); ++i) {
    values.push_back(*slots[i].second);
    analytic.push_back(fo.param_values[i].second.adjoint());
  }

  auto f = [&](const std::vector<Matrix>& probe) {
    ModelParams p = inst.params;
    auto ps = p.entries();
    for (size_t i = 0; i < ps.size(); ++i) *ps[i].second = probe[i];
    Tape t;
    ForwardOutput out = model_forward(t, inst.x, inst.hops1, inst.hops2, p, inst.config, &li);
    return out.loss_total.scalar_value();
  };

  const double err = finite_difference_check(f, values, analytic, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("adjacency row normalization is optional and keeps gradients exact") {
  TestInstance inst(91);
  inst.config.row_normalize_adjacency = true;
  LossInputs li = inst.loss_inputs();

  Tape tape;
  ForwardOutput fo =
      model_forward(tape, inst.x, inst.hops1, inst.hops2, inst.params, inst.config, &li);
  // every row of the adjacency fed to the global convolution sums to 1; the
  // stored a_sparse is the raw gated similarity
  for (int i = 0; i < fo.a_sparse.rows(); ++i) {
    CHECK(fo.a_sparse.data()(i, i) == 1.0);
  }
  tape.backward(fo.loss_total);

  auto slots = inst.params.entries();
  std::vector<Matrix> values, analytic;
  for (size_t i = 0; i < slots.size(); ++i) {
    values.push_back(*slots[i].second);
    analytic.push_back(fo.param_values[i].second.adjoint());
  }
  auto f = [&](const std::vector<Matrix>& probe) {
    ModelParams p = inst.params;
    auto ps = p.entries();
    for (size_t i = 0; i < ps.size(); ++i) *ps[i].second = probe[i];
    Tape t;
    return model_forward(t, inst.x, inst.hops1, inst.hops2, p, inst.config, &li)
        .loss_total.scalar_value();
  };
  CHECK(finite_difference_check(f, values, analytic, 1e-5) < 1e-4);

  // off by default, and the two settings genuinely differ
  ModelConfig plain = inst.config;
  plain.row_normalize_adjacency = false;
  Tape tape2;
  ForwardOutput fo2 =
      model_forward(tape2, inst.x, inst.hops1, inst.hops2, inst.params, plain, &li);
  CHECK(fo2.loss_total.scalar_value() != fo.loss_total.scalar_value());
}

TEST_CASE("checkpoint round trip restores parameters for the right architecture") {
  TestInstance inst(88);
  Checkpoint ckpt;
  ckpt.config_json = "{}";
  for (auto& [name, m] : inst.params.entries()) ckpt.params.emplace_back(name, *m);

  ModelParams restored = params_from_checkpoint(ckpt, inst.config);
  auto a = inst.params.entries();
  auto b = restored.entries();
  for (size_t i = 0; i < a.size(); ++i) CHECK(bit_identical(*a[i].second, *b[i].second));

  ModelConfig other = inst.config;
  other.hidden_units = 16;
  CHECK_THROWS_AS(params_from_checkpoint(ckpt, other), ShapeError);
}
