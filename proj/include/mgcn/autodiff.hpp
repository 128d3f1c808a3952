#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <vector>

#include "mgcn/matrix.hpp"
#include "mgcn/neighborhoods.hpp"

namespace mgcn {

class Tape;

// Handle to a node on a Tape. Cheap to copy; valid while the tape lives.
class Value {
 public:
  Value() = default;

  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }
  int rows() const;
  int cols() const;
  const Matrix& data() const;
  // Zero until backward() has visited the node.
  const Matrix& adjoint() const;
  double scalar_value() const { return data()(0, 0); }

 private:
  friend class Tape;
  Value(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Reverse-mode differentiation tape. Nodes are appended in evaluation order;
// insertion order is the topological order and backward() walks it in strict
// reverse. A tape is single-owner and mutated single-threaded; independent
// tapes may run on separate threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Leaves. input() is for anything whose gradient may be read back;
  // constant() is a semantic alias for fixed data.
  Value input(Matrix m);
  Value constant(Matrix m);

  Value matmul(Value a, Value b);
  Value transpose(Value x);
  Value add(Value a, Value b);
  Value sub(Value a, Value b);
  Value hadamard(Value a, Value b);
  Value scalar_mul(Value x, double c);
  // s is a 1x1 learnable scale; gradient flows to both operands.
  Value scale_by(Value s, Value x);
  // From column vectors f (n x 1) and g (m x 1): out[i][j] = f[i] + g[j].
  Value add_outer(Value f, Value g);
  Value relu(Value x);
  Value leaky_relu(Value x, double slope);
  Value exp(Value x);
  Value log(Value x);
  Value softplus(Value x);
  Value sum(Value x);
  Value concat_rows(Value top, Value bottom);
  Value slice_rows(Value x, int row_begin, int row_end);
  // out[i][j] = squared L2 distance of rows i and j; symmetric, zero diagonal.
  Value row_sq_dist(Value z);
  // Row-wise softmax restricted to each row's neighbor set; entries outside
  // the set are exactly 0. Computed with per-row max subtraction.
  Value masked_softmax(Value scores, const NeighborhoodSets& mask);
  // Hard gate: keeps entries >= threshold, zeroes the rest. Gradient passes
  // only through kept entries; the threshold itself gets no gradient.
  Value threshold_keep(Value x, double threshold);
  // Divides each row by its sum. Rows must have non-zero sums.
  Value row_normalize(Value x);
  // Scalar loss: -sum over row_ids of sum_j onehot[i][j] * ln softmax(logits[i])[j],
  // evaluated in log-sum-exp form.
  Value softmax_cross_entropy(Value logits, Matrix onehot, std::vector<int> row_ids);

  // Seeds the scalar loss with adjoint 1 and accumulates adjoints into every
  // node in reverse insertion order. Leaves not reachable from the loss keep
  // a zero adjoint. Throws ShapeError if loss is not 1x1.
  void backward(Value loss);

  int size() const { return static_cast<int>(nodes_.size()); }
  const Matrix& data_of(int id) const { return nodes_[id].data; }
  const Matrix& adjoint_of(int id) const;

 private:
  enum class Op {
    kLeaf,
    kMatmul,
    kTranspose,
    kAdd,
    kSub,
    kHadamard,
    kScalarMul,
    kScaleBy,
    kAddOuter,
    kRelu,
    kLeakyRelu,
    kExp,
    kLog,
    kSoftplus,
    kSum,
    kConcatRows,
    kSliceRows,
    kRowSqDist,
    kMaskedSoftmax,
    kThresholdKeep,
    kRowNormalize,
    kSoftmaxCrossEntropy,
  };

  struct CrossEntropyTargets {
    Matrix onehot;
    std::vector<int> row_ids;
  };

  struct Node {
    Op op = Op::kLeaf;
    int a = -1;
    int b = -1;
    double scalar = 0.0;  // slope / constant factor / threshold
    int row_begin = 0;
    int row_end = 0;
    std::shared_ptr<const NeighborhoodSets> mask;
    std::shared_ptr<const CrossEntropyTargets> targets;
    Matrix data;
    Matrix adjoint;
  };

  Value push(Node node);
  void backward_node(int id);
  static void accumulate(Matrix& into, const Matrix& g);

  // deque keeps references to node data stable across pushes
  std::deque<Node> nodes_;
};

// Max over coordinates of |analytic - central difference| / max(1, |analytic|),
// with the central difference of f taken at step h.
double finite_difference_check(const std::function<double(const std::vector<Matrix>&)>& f,
                               const std::vector<Matrix>& params,
                               const std::vector<Matrix>& analytic_grads, double h);

}  // namespace mgcn
