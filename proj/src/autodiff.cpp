#include "mgcn/autodiff.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "mgcn/errors.hpp"

namespace mgcn {

namespace {

std::string shapes(const Matrix& a, const Matrix& b) {
  return shape_string(a) + " vs " + shape_string(b);
}

Matrix matmul_nn(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  return out;
}

// a * b^T
Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < b.rows(); ++j) {
      double acc = 0.0;
      for (int k = 0; k < a.cols(); ++k) acc += a(i, k) * b(j, k);
      out(i, j) = acc;
    }
  }
  return out;
}

// a^T * b
Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix out(a.cols(), b.cols());
  for (int k = 0; k < a.rows(); ++k) {
    for (int i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      for (int j = 0; j < b.cols(); ++j) out(i, j) += aki * b(k, j);
    }
  }
  return out;
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

int Value::rows() const { return data().rows(); }
int Value::cols() const { return data().cols(); }
const Matrix& Value::data() const { return tape_->data_of(id_); }
const Matrix& Value::adjoint() const { return tape_->adjoint_of(id_); }

Value Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Value(this, static_cast<int>(nodes_.size()) - 1);
}

const Matrix& Tape::adjoint_of(int id) const {
  const Node& n = nodes_[id];
  if (n.adjoint.empty() && !n.data.empty()) {
    // lazily zero until backward reaches the node
    const_cast<Node&>(n).adjoint = Matrix(n.data.rows(), n.data.cols());
  }
  return n.adjoint;
}

Value Tape::input(Matrix m) {
  Node n;
  n.op = Op::kLeaf;
  n.data = std::move(m);
  return push(std::move(n));
}

Value Tape::constant(Matrix m) { return input(std::move(m)); }

Value Tape::matmul(Value a, Value b) {
  const Matrix& ma = data_of(a.id());
  const Matrix& mb = data_of(b.id());
  if (ma.cols() != mb.rows()) {
    throw ShapeError("matmul: inner dimensions disagree (" + shapes(ma, mb) + ")");
  }
  Node n;
  n.op = Op::kMatmul;
  n.a = a.id();
  n.b = b.id();
  n.data = matmul_nn(ma, mb);
  return push(std::move(n));
}

Value Tape::transpose(Value x) {
  const Matrix& m = data_of(x.id());
  Node n;
  n.op = Op::kTranspose;
  n.a = x.id();
  n.data = Matrix(m.cols(), m.rows());
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) n.data(j, i) = m(i, j);
  return push(std::move(n));
}

Value Tape::add(Value a, Value b) {
  const Matrix& ma = data_of(a.id());
  const Matrix& mb = data_of(b.id());
  if (!ma.same_shape(mb)) throw ShapeError("add: shape mismatch (" + shapes(ma, mb) + ")");
  Node n;
  n.op = Op::kAdd;
  n.a = a.id();
  n.b = b.id();
  n.data = ma;
  for (size_t i = 0; i < n.data.size(); ++i) n.data.raw()[i] += mb.raw()[i];
  return push(std::move(n));
}

Value Tape::sub(Value a, Value b) {
  const Matrix& ma = data_of(a.id());
  const Matrix& mb = data_of(b.id());
  if (!ma.same_shape(mb)) throw ShapeError("sub: shape mismatch (" + shapes(ma, mb) + ")");
  Node n;
  n.op = Op::kSub;
  n.a = a.id();
  n.b = b.id();
  n.data = ma;
  for (size_t i = 0; i < n.data.size(); ++i) n.data.raw()[i] -= mb.raw()[i];
  return push(std::move(n));
}

Value Tape::hadamard(Value a, Value b) {
  const Matrix& ma = data_of(a.id());
  const Matrix& mb = data_of(b.id());
  if (!ma.same_shape(mb)) throw ShapeError("hadamard: shape mismatch (" + shapes(ma, mb) + ")");
  Node n;
  n.op = Op::kHadamard;
  n.a = a.id();
  n.b = b.id();
  n.data = ma;
  for (size_t i = 0; i < n.data.size(); ++i) n.data.raw()[i] *= mb.raw()[i];
  return push(std::move(n));
}

Value Tape::scalar_mul(Value x, double c) {
  Node n;
  n.op = Op::kScalarMul;
  n.a = x.id();
  n.scalar = c;
  n.data = data_of(x.id());
  for (double& v : n.data.raw()) v *= c;
  return push(std::move(n));
}

Value Tape::scale_by(Value s, Value x) {
  const Matrix& ms = data_of(s.id());
  if (!ms.is_scalar()) throw ShapeError("scale_by: scale must be 1x1, got " + shape_string(ms));
  Node n;
  n.op = Op::kScaleBy;
  n.a = s.id();
  n.b = x.id();
  n.data = data_of(x.id());
  const double c = ms(0, 0);
  for (double& v : n.data.raw()) v *= c;
  return push(std::move(n));
}

Value Tape::add_outer(Value f, Value g) {
  const Matrix& mf = data_of(f.id());
  const Matrix& mg = data_of(g.id());
  if (mf.cols() != 1 || mg.cols() != 1) {
    throw ShapeError("add_outer: expects column vectors (" + shapes(mf, mg) + ")");
  }
  Node n;
  n.op = Op::kAddOuter;
  n.a = f.id();
  n.b = g.id();
  n.data = Matrix(mf.rows(), mg.rows());
  for (int i = 0; i < mf.rows(); ++i)
    for (int j = 0; j < mg.rows(); ++j) n.data(i, j) = mf(i, 0) + mg(j, 0);
  return push(std::move(n));
}

Value Tape::relu(Value x) {
  Node n;
  n.op = Op::kRelu;
  n.a = x.id();
  n.scalar = 0.0;
  n.data = data_of(x.id());
  for (double& v : n.data.raw()) v = std::max(v, 0.0);
  return push(std::move(n));
}

Value Tape::leaky_relu(Value x, double slope) {
  if (slope < 0.0 || slope >= 1.0) {
    throw ConfigError("leaky_relu: slope must lie in [0,1), got " + std::to_string(slope));
  }
  Node n;
  n.op = Op::kLeakyRelu;
  n.a = x.id();
  n.scalar = slope;
  n.data = data_of(x.id());
  for (double& v : n.data.raw()) {
    if (v < 0.0) v *= slope;
  }
  return push(std::move(n));
}

Value Tape::exp(Value x) {
  Node n;
  n.op = Op::kExp;
  n.a = x.id();
  n.data = data_of(x.id());
  for (double& v : n.data.raw()) v = std::exp(v);
  return push(std::move(n));
}

Value Tape::log(Value x) {
  Node n;
  n.op = Op::kLog;
  n.a = x.id();
  n.data = data_of(x.id());
  for (double& v : n.data.raw()) v = std::log(v);
  return push(std::move(n));
}

Value Tape::softplus(Value x) {
  Node n;
  n.op = Op::kSoftplus;
  n.a = x.id();
  n.data = data_of(x.id());
  // max(x,0) + log1p(exp(-|x|)) is overflow-safe in both directions
  for (double& v : n.data.raw()) v = std::max(v, 0.0) + std::log1p(std::exp(-std::fabs(v)));
  return push(std::move(n));
}

Value Tape::sum(Value x) {
  Node n;
  n.op = Op::kSum;
  n.a = x.id();
  double acc = 0.0;
  for (double v : data_of(x.id()).raw()) acc += v;
  n.data = Matrix::scalar(acc);
  return push(std::move(n));
}

Value Tape::concat_rows(Value top, Value bottom) {
  const Matrix& mt = data_of(top.id());
  const Matrix& mb = data_of(bottom.id());
  if (mt.cols() != mb.cols()) {
    throw ShapeError("concat_rows: column counts disagree (" + shapes(mt, mb) + ")");
  }
  Node n;
  n.op = Op::kConcatRows;
  n.a = top.id();
  n.b = bottom.id();
  n.data = Matrix(mt.rows() + mb.rows(), mt.cols());
  for (int i = 0; i < mt.rows(); ++i)
    for (int j = 0; j < mt.cols(); ++j) n.data(i, j) = mt(i, j);
  for (int i = 0; i < mb.rows(); ++i)
    for (int j = 0; j < mb.cols(); ++j) n.data(mt.rows() + i, j) = mb(i, j);
  return push(std::move(n));
}

Value Tape::slice_rows(Value x, int row_begin, int row_end) {
  const Matrix& m = data_of(x.id());
  if (row_begin < 0 || row_end > m.rows() || row_begin >= row_end) {
    throw ShapeError("slice_rows: range [" + std::to_string(row_begin) + "," +
                     std::to_string(row_end) + ") invalid for " + shape_string(m));
  }
  Node n;
  n.op = Op::kSliceRows;
  n.a = x.id();
  n.row_begin = row_begin;
  n.row_end = row_end;
  n.data = Matrix(row_end - row_begin, m.cols());
  for (int i = row_begin; i < row_end; ++i)
    for (int j = 0; j < m.cols(); ++j) n.data(i - row_begin, j) = m(i, j);
  return push(std::move(n));
}

Value Tape::row_sq_dist(Value z) {
  const Matrix& m = data_of(z.id());
  Node n;
  n.op = Op::kRowSqDist;
  n.a = z.id();
  n.data = Matrix(m.rows(), m.rows());
  // evaluated once per unordered pair and mirrored, so symmetry is exact
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = i + 1; j < m.rows(); ++j) {
      double acc = 0.0;
      for (int k = 0; k < m.cols(); ++k) {
        const double d = m(i, k) - m(j, k);
        acc += d * d;
      }
      n.data(i, j) = acc;
      n.data(j, i) = acc;
    }
  }
  return push(std::move(n));
}

Value Tape::masked_softmax(Value scores, const NeighborhoodSets& mask) {
  const Matrix& s = data_of(scores.id());
  if (s.rows() != mask.n() || s.cols() != mask.n()) {
    throw ShapeError("masked_softmax: scores " + shape_string(s) + " do not match mask of " +
                     std::to_string(mask.n()) + " nodes");
  }
  for (int i = 0; i < mask.n(); ++i) {
    if (mask.sets[i].empty()) {
      throw DataError("masked_softmax: row " + std::to_string(i) + " has an empty neighborhood");
    }
  }
  Node n;
  n.op = Op::kMaskedSoftmax;
  n.a = scores.id();
  n.mask = std::make_shared<NeighborhoodSets>(mask);
  n.data = Matrix(s.rows(), s.cols());
  for (int i = 0; i < s.rows(); ++i) {
    const auto& nb = mask.sets[i];
    double mx = s(i, nb[0]);
    for (int j : nb) mx = std::max(mx, s(i, j));
    double denom = 0.0;
    for (int j : nb) denom += std::exp(s(i, j) - mx);
    for (int j : nb) n.data(i, j) = std::exp(s(i, j) - mx) / denom;
  }
  return push(std::move(n));
}

Value Tape::threshold_keep(Value x, double threshold) {
  if (threshold < 0.0 || threshold >= 1.0) {
    throw ConfigError("threshold_keep: threshold must lie in [0,1), got " +
                      std::to_string(threshold));
  }
  Node n;
  n.op = Op::kThresholdKeep;
  n.a = x.id();
  n.scalar = threshold;
  n.data = data_of(x.id());
  for (double& v : n.data.raw()) {
    if (v < threshold) v = 0.0;
  }
  return push(std::move(n));
}

Value Tape::row_normalize(Value x) {
  const Matrix& m = data_of(x.id());
  Node n;
  n.op = Op::kRowNormalize;
  n.a = x.id();
  n.data = Matrix(m.rows(), m.cols());
  for (int i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (int j = 0; j < m.cols(); ++j) s += m(i, j);
    if (s == 0.0) {
      throw NumericalError("row_normalize: row " + std::to_string(i) + " sums to zero");
    }
    for (int j = 0; j < m.cols(); ++j) n.data(i, j) = m(i, j) / s;
  }
  return push(std::move(n));
}

Value Tape::softmax_cross_entropy(Value logits, Matrix onehot, std::vector<int> row_ids) {
  const Matrix& o = data_of(logits.id());
  if (!o.same_shape(onehot)) {
    throw ShapeError("softmax_cross_entropy: logits/targets mismatch (" + shapes(o, onehot) + ")");
  }
  if (row_ids.empty()) throw ConfigError("softmax_cross_entropy: no labeled rows");
  for (int i : row_ids) {
    if (i < 0 || i >= o.rows()) {
      throw ShapeError("softmax_cross_entropy: row id " + std::to_string(i) + " out of range");
    }
  }
  Node n;
  n.op = Op::kSoftmaxCrossEntropy;
  n.a = logits.id();
  auto t = std::make_shared<CrossEntropyTargets>();
  t->onehot = std::move(onehot);
  t->row_ids = std::move(row_ids);
  double loss = 0.0;
  for (int i : t->row_ids) {
    double mx = o(i, 0);
    for (int j = 1; j < o.cols(); ++j) mx = std::max(mx, o(i, j));
    double denom = 0.0;
    for (int j = 0; j < o.cols(); ++j) denom += std::exp(o(i, j) - mx);
    const double lse = mx + std::log(denom);
    for (int j = 0; j < o.cols(); ++j) {
      const double y = t->onehot(i, j);
      if (y != 0.0) loss -= y * (o(i, j) - lse);
    }
  }
  n.targets = std::move(t);
  n.data = Matrix::scalar(loss);
  return push(std::move(n));
}

void Tape::backward(Value loss) {
  const Matrix& l = data_of(loss.id());
  if (!l.is_scalar()) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_string(l));
  }
  for (Node& n : nodes_) {
    n.adjoint = Matrix(n.data.rows(), n.data.cols());
  }
  nodes_[loss.id()].adjoint(0, 0) = 1.0;
  for (int id = loss.id(); id >= 0; --id) backward_node(id);
}

void Tape::accumulate(Matrix& into, const Matrix& g) {
  for (size_t i = 0; i < into.size(); ++i) into.raw()[i] += g.raw()[i];
}

void Tape::backward_node(int id) {
  Node& n = nodes_[id];
  const Matrix& g = n.adjoint;
  switch (n.op) {
    case Op::kLeaf:
      break;
    case Op::kMatmul: {
      accumulate(nodes_[n.a].adjoint, matmul_nt(g, nodes_[n.b].data));
      accumulate(nodes_[n.b].adjoint, matmul_tn(nodes_[n.a].data, g));
      break;
    }
    case Op::kTranspose: {
      Matrix& da = nodes_[n.a].adjoint;
      for (int i = 0; i < g.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) da(j, i) += g(i, j);
      break;
    }
    case Op::kAdd: {
      accumulate(nodes_[n.a].adjoint, g);
      accumulate(nodes_[n.b].adjoint, g);
      break;
    }
    case Op::kSub: {
      accumulate(nodes_[n.a].adjoint, g);
      Matrix& db = nodes_[n.b].adjoint;
      for (size_t i = 0; i < db.size(); ++i) db.raw()[i] -= g.raw()[i];
      break;
    }
    case Op::kHadamard: {
      Matrix& da = nodes_[n.a].adjoint;
      Matrix& db = nodes_[n.b].adjoint;
      const Matrix& ma = nodes_[n.a].data;
      const Matrix& mb = nodes_[n.b].data;
      for (size_t i = 0; i < g.size(); ++i) {
        da.raw()[i] += g.raw()[i] * mb.raw()[i];
        db.raw()[i] += g.raw()[i] * ma.raw()[i];
      }
      break;
    }
    case Op::kScalarMul: {
      Matrix& da = nodes_[n.a].adjoint;
      for (size_t i = 0; i < g.size(); ++i) da.raw()[i] += n.scalar * g.raw()[i];
      break;
    }
    case Op::kScaleBy: {
      const double c = nodes_[n.a].data(0, 0);
      const Matrix& mx = nodes_[n.b].data;
      double ds = 0.0;
      Matrix& dx = nodes_[n.b].adjoint;
      for (size_t i = 0; i < g.size(); ++i) {
        ds += g.raw()[i] * mx.raw()[i];
        dx.raw()[i] += c * g.raw()[i];
      }
      nodes_[n.a].adjoint(0, 0) += ds;
      break;
    }
    case Op::kAddOuter: {
      Matrix& df = nodes_[n.a].adjoint;
      Matrix& dg = nodes_[n.b].adjoint;
      for (int i = 0; i < g.rows(); ++i) {
        for (int j = 0; j < g.cols(); ++j) {
          df(i, 0) += g(i, j);
          dg(j, 0) += g(i, j);
        }
      }
      break;
    }
    case Op::kRelu:
    case Op::kLeakyRelu: {
      // subgradient at exactly 0 comes from the negative side
      const Matrix& mx = nodes_[n.a].data;
      Matrix& dx = nodes_[n.a].adjoint;
      for (size_t i = 0; i < g.size(); ++i) {
        dx.raw()[i] += g.raw()[i] * (mx.raw()[i] > 0.0 ? 1.0 : n.scalar);
      }
      break;
    }
    case Op::kExp: {
      Matrix& dx = nodes_[n.a].adjoint;
      for (size_t i = 0; i < g.size(); ++i) dx.raw()[i] += g.raw()[i] * n.data.raw()[i];
      break;
    }
    case Op::kLog: {
      const Matrix& mx = nodes_[n.a].data;
      Matrix& dx = nodes_[n.a].adjoint;
      for (size_t i = 0; i < g.size(); ++i) dx.raw()[i] += g.raw()[i] / mx.raw()[i];
      break;
    }
    case Op::kSoftplus: {
      const Matrix& mx = nodes_[n.a].data;
      Matrix& dx = nodes_[n.a].adjoint;
      for (size_t i = 0; i < g.size(); ++i) dx.raw()[i] += g.raw()[i] * sigmoid(mx.raw()[i]);
      break;
    }
    case Op::kSum: {
      Matrix& dx = nodes_[n.a].adjoint;
      const double gs = g(0, 0);
      for (double& v : dx.raw()) v += gs;
      break;
    }
    case Op::kConcatRows: {
      Matrix& dt = nodes_[n.a].adjoint;
      Matrix& db = nodes_[n.b].adjoint;
      for (int i = 0; i < dt.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) dt(i, j) += g(i, j);
      for (int i = 0; i < db.rows(); ++i)
        for (int j = 0; j < g.cols(); ++j) db(i, j) += g(dt.rows() + i, j);
      break;
    }
    case Op::kSliceRows: {
      Matrix& dx = nodes_[n.a].adjoint;
      for (int i = n.row_begin; i < n.row_end; ++i)
        for (int j = 0; j < g.cols(); ++j) dx(i, j) += g(i - n.row_begin, j);
      break;
    }
    case Op::kRowSqDist: {
      const Matrix& z = nodes_[n.a].data;
      Matrix& dz = nodes_[n.a].adjoint;
      for (int i = 0; i < z.rows(); ++i) {
        for (int j = 0; j < z.rows(); ++j) {
          if (i == j) continue;
          const double w = 2.0 * (g(i, j) + g(j, i));
          if (w == 0.0) continue;
          for (int k = 0; k < z.cols(); ++k) dz(i, k) += w * (z(i, k) - z(j, k));
        }
      }
      break;
    }
    case Op::kMaskedSoftmax: {
      Matrix& ds = nodes_[n.a].adjoint;
      for (int i = 0; i < n.data.rows(); ++i) {
        const auto& nb = n.mask->sets[i];
        double dot = 0.0;
        for (int j : nb) dot += g(i, j) * n.data(i, j);
        for (int j : nb) ds(i, j) += n.data(i, j) * (g(i, j) - dot);
      }
      break;
    }
    case Op::kThresholdKeep: {
      const Matrix& mx = nodes_[n.a].data;
      Matrix& dx = nodes_[n.a].adjoint;
      for (size_t i = 0; i < g.size(); ++i) {
        if (mx.raw()[i] >= n.scalar) dx.raw()[i] += g.raw()[i];
      }
      break;
    }
    case Op::kRowNormalize: {
      const Matrix& mx = nodes_[n.a].data;
      Matrix& dx = nodes_[n.a].adjoint;
      for (int i = 0; i < mx.rows(); ++i) {
        double s = 0.0;
        double dot = 0.0;
        for (int j = 0; j < mx.cols(); ++j) {
          s += mx(i, j);
          dot += g(i, j) * n.data(i, j);
        }
        for (int j = 0; j < mx.cols(); ++j) dx(i, j) += (g(i, j) - dot) / s;
      }
      break;
    }
    case Op::kSoftmaxCrossEntropy: {
      const Matrix& o = nodes_[n.a].data;
      Matrix& dx = nodes_[n.a].adjoint;
      const double gs = g(0, 0);
      for (int i : n.targets->row_ids) {
        double mx = o(i, 0);
        for (int j = 1; j < o.cols(); ++j) mx = std::max(mx, o(i, j));
        double denom = 0.0;
        for (int j = 0; j < o.cols(); ++j) denom += std::exp(o(i, j) - mx);
        for (int j = 0; j < o.cols(); ++j) {
          const double p = std::exp(o(i, j) - mx) / denom;
          dx(i, j) += gs * (p - n.targets->onehot(i, j));
        }
      }
      break;
    }
  }
}

double finite_difference_check(const std::function<double(const std::vector<Matrix>&)>& f,
                               const std::vector<Matrix>& params,
                               const std::vector<Matrix>& analytic_grads, double h) {
  std::vector<Matrix> probe = params;
  double worst = 0.0;
  for (size_t p = 0; p < probe.size(); ++p) {
    for (size_t i = 0; i < probe[p].size(); ++i) {
      const double saved = probe[p].raw()[i];
      probe[p].raw()[i] = saved + h;
      const double up = f(probe);
      probe[p].raw()[i] = saved - h;
      const double down = f(probe);
      probe[p].raw()[i] = saved;
      const double central = (up - down) / (2.0 * h);
      const double analytic = analytic_grads[p].raw()[i];
      const double err = std::fabs(analytic - central) / std::max(1.0, std::fabs(analytic));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace mgcn
