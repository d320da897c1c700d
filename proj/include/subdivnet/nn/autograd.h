#pragma once

#include <Eigen/Dense>
#include <array>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace subdivnet::nn {

/// Row-major so that one row holds the channels of one face.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Learnable tensor with an accumulated gradient.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(value.size()); }
};

class Tape;

/// Handle to a node recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  const Matrix& grad() const;
  int rows() const { return static_cast<int>(value().rows()); }
  int cols() const { return static_cast<int>(value().cols()); }
};

/// Records operations for reverse-mode differentiation. Nodes are evaluated
/// eagerly; backward() replays the recorded adjoints in reverse order and adds
/// parameter gradients into Parameter::grad.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf that receives a gradient (used to differentiate with respect to inputs).
  Var leaf(Matrix value);
  Var parameter(Parameter& p);

  /// Backpropagates from `root` seeded with `seed` (ones when omitted, which
  /// requires a 1x1 root).
  void backward(Var root);
  void backward(Var root, const Matrix& seed);

  const Matrix& value(int id) const { return nodes_[id]->value; }
  /// Gradient of a node after backward(); zeros if the node was not reached.
  const Matrix& grad(int id);
  bool needs_grad(int id) const { return nodes_[id]->needs_grad; }

  using Adjoint = std::function<void(Tape&, const Matrix& grad_out)>;
  /// Adds a node computed from `parents`. The adjoint receives the node's
  /// gradient and accumulates into parents through accumulate().
  Var record(Matrix value, std::initializer_list<Var> parents, Adjoint adjoint);
  /// grad(id) += delta when the node needs a gradient.
  void accumulate(int id, const Matrix& delta);
  /// Mutable gradient storage for scatter-style adjoints; null when not needed.
  Matrix* grad_buffer(int id);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    bool has_grad = false;
    Parameter* param = nullptr;
    Adjoint adjoint;
  };
  std::vector<std::unique_ptr<Node>> nodes_;
};

// Elementwise and linear algebra ops.
Var matmul(Var a, Var b);
Var add(Var a, Var b);
/// x (n x c) plus a broadcast row b (1 x c).
Var add_row(Var x, Var b);
Var relu(Var x);
/// Columns of a followed by columns of b.
Var concat_cols(Var a, Var b);
/// (x - mean) / std with constant per-channel statistics.
Var standardize(Var x, const Matrix& mean, const Matrix& inv_std);

/// Running statistics of a batch normalization layer.
struct BatchNormStats {
  Matrix mean;  // 1 x c
  Matrix var;   // 1 x c
  double momentum = 0.9;
  double eps = 1e-8;
};
/// Per-channel normalization over all rows. In training mode the batch
/// statistics are used and the running ones updated as
/// running = momentum * running + (1 - momentum) * batch.
Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats& stats, bool training);

/// Rows of a mesh convolution: per output row an anchor (center face) and a
/// closed ring of `row_length` neighbor rows, all indexing the input tensor.
struct Neighborhood {
  int input_rows = 0;
  int row_length = 3;
  std::vector<int> anchor;
  std::vector<int> index;
  int rows() const { return static_cast<int>(anchor.size()); }
};

/// out_i = e_i w0 + (sum_j e_j) w1 + (sum_j |e_{j+1} - e_j|) w2 + (sum_j |e_i - e_j|) w3 + b
/// with the ring closed cyclically and |.| elementwise. Each sum is taken in sorted
/// order of its terms, so the output is bitwise invariant under rotation or
/// reversal of a ring. `bias` may be a default Var to omit the bias.
Var mesh_conv(Var x, const Neighborhood& nb, const std::array<Var, 4>& w, Var bias);

/// Ring aggregates used by mesh_conv, for callers and tests:
/// columns [e_i | sum e_j | sum |e_{j+1}-e_j| | sum |e_i-e_j|].
Matrix ring_terms(const Matrix& x, const Neighborhood& nb);

/// Coarse row p takes the max (or mean) of fine rows children[p].
Var max_pool(Var x, std::span<const std::array<int, 4>> children);
Var mean_pool(Var x, std::span<const std::array<int, 4>> children);
/// Fine row f copies coarse row parent[f].
Var upsample_nearest(Var x, std::span<const int> parent);
/// Fine row f is sum_k weight[f][k] * coarse row source[f][k].
Var upsample_bilinear(Var x, std::span<const std::array<int, 3>> source,
                      std::span<const std::array<double, 3>> weight);
/// Mean over row segments [offsets[s], offsets[s+1]); one output row per segment.
Var segment_mean(Var x, std::span<const int> offsets);
/// Mean cross-entropy of row-wise softmax against integer labels (1 x 1 result).
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

Matrix softmax(const Matrix& logits);
std::vector<int> argmax_rows(const Matrix& m);

}  // namespace subdivnet::nn
