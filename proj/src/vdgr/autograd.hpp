#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major double
// matrices. One Tape records a single forward pass; parameters live outside the
// tape and receive accumulated gradients when backward() runs.

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace vdgr::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Learning-rate group a parameter belongs to.
enum class ParamGroup { Backbone, Gnn };

struct Parameter {
  Parameter(std::string name, ParamGroup group, Eigen::Index rows, Eigen::Index cols)
      : name(std::move(name)), group(group), value(Matrix::Zero(rows, cols)), grad(Matrix::Zero(rows, cols)) {}

  std::string name;
  ParamGroup group;
  Matrix value;
  Matrix grad;

  void zero_grad() { grad.setZero(); }
};

class Tape;

/// Handle to a node recorded on a Tape. Cheap to copy.
class Var {
public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  bool valid() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  int id() const { return id_; }

private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

class Tape {
public:
  using Backward = std::function<void(Tape&, const Matrix& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  /// Leaf bound to a parameter. Repeated calls with the same parameter return
  /// the same node, so shared weights accumulate a single gradient.
  Var param(Parameter& p);

  /// Records an op output. `inputs` decides whether the node needs a gradient.
  Var record(Matrix value, std::initializer_list<Var> inputs, Backward fn);
  Var record(Matrix value, std::span<const Var> inputs, Backward fn);

  /// Seeds d(loss)/d(loss) = 1 and propagates; adds into Parameter::grad.
  void backward(Var loss);

  const Matrix& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  bool requires_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].requires_grad; }
  /// Adds `g` into the gradient of node `id` if it requires one.
  void accumulate(int id, const Matrix& g);
  template <typename Expr>
  void accumulate_expr(int id, const Expr& g) {
    auto& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
  }
  Matrix& grad_slot(int id);

  std::size_t size() const { return nodes_.size(); }

private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    Parameter* param = nullptr;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<Parameter*, int> param_nodes_;
};

// ---- elementwise and linear algebra ----
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// a (n x d) + row (1 x d) broadcast over rows.
Var add_row(Var a, Var row);
/// a (n x d) scaled row-wise by col (n x 1).
Var mul_col(Var a, Var col);
Var transpose(Var a);

/// x W + b with W (in x out) and b (1 x out).
Var linear(Var x, Var w, Var b);

// ---- activations ----
Var gelu(Var a);
Var leaky_relu(Var a, double slope);

// ---- normalisation ----
/// Row-wise softmax. `bias`, when given, is added to the logits first and may
/// be a single row broadcast to all rows (use -inf to exclude a column).
Var softmax_rows(Var a, const Matrix* bias = nullptr);
Var log_softmax_rows(Var a);
Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-12);

// ---- indexing ----
Var gather_rows(Var a, std::span<const int> idx);
/// Copy of `base` with rows idx[i] replaced by row i of `src`.
Var scatter_rows(Var base, Var src, std::span<const int> idx);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);

// ---- segment ops for message passing ----
/// Softmax of a column vector (E x 1) within each segment seg[e] in [0, n).
Var segment_softmax(Var logits, std::span<const int> seg, int n);
/// Row e of x summed into output row seg[e]; result is n x cols.
Var segment_sum(Var x, std::span<const int> seg, int n);

// ---- reductions and losses ----
Var sum(Var a);
Var mean(Var a);
/// Mean over rows of -logp(i, target[i]); zero rows yield the constant 0.
Var nll_mean(Var logp, std::span<const int> target);
/// Mean of squared differences over all entries.
Var mse_mean(Var pred, const Matrix& target);
/// Binary cross-entropy of a 1x1 logit against y in {0, 1}.
Var bce_with_logits(Var logit, double y);
/// -sum_i target_i * log softmax(logits)_i for a single row.
Var soft_cross_entropy(Var logits_row, const RowVector& target);

double gelu_value(double x);

}  // namespace vdgr::ad
