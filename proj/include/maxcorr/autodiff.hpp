#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "maxcorr/matrix.hpp"

// Tape-based reverse-mode differentiation over dense matrices.
//
// Every op appends a node to the tape, so node ids are already in topological
// order and backward is a single reverse sweep. Trainable leaves are created
// with Tape::parameter and identified by name in the gradient map.
namespace maxcorr::ad {

enum class OpTag {
  Constant,
  Parameter,
  MatMul,
  MatMulNT,
  Add,
  Sub,
  Mul,
  Div,
  Scale,
  AddScalar,
  Relu,
  LeakyRelu,
  Sigmoid,
  Abs,
  SoftmaxRows,
  LogSoftmaxRows,
  ConcatCols,
  Blocks,
  Trace,
  Transpose,
  MeanOverRows,
  MeanOverCols,
  SumOverCols,
  SumAll,
  RowNorms,
  SelectRows,
  Submatrix,
  Element,
  Pick,
  BatchNorm,
};

std::string_view op_name(OpTag op);

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const noexcept { return id_; }
  Tape* tape() const noexcept { return tape_; }
  bool valid() const noexcept { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

using GradientMap = std::map<std::string, Matrix>;

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  /// With grad disabled no closures are stored and backward is unavailable.
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const noexcept { return grad_enabled_; }

  Var constant(Matrix value);
  /// Trainable leaf; names must be unique on one tape.
  Var parameter(const std::string& name, const Matrix& value);
  Var record(Matrix value, OpTag op, std::vector<std::size_t> parents, BackwardFn fn);

  /// Reverse sweep from a 1x1 loss. Parameter gradients accumulate across
  /// calls; intermediate gradients are recomputed each time.
  GradientMap backward(Var loss);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  OpTag op(std::size_t id) const { return nodes_[id].op; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_[id].parents; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Gradient buffer of a node, zero-allocated on first access.
  Matrix& grad(std::size_t id);
  std::size_t size() const noexcept { return nodes_.size(); }
  std::vector<std::string> parameter_names() const;

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    OpTag op = OpTag::Constant;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  bool grad_enabled_;
  std::vector<Node> nodes_;
  std::vector<std::pair<std::string, std::size_t>> params_;
};

// ---- ops -------------------------------------------------------------------
//
// Binary elementwise ops take the output shape from `a`; `b` may match it or
// broadcast as 1xN (over rows), Mx1 (over columns) or 1x1.

Var matmul(Var a, Var b);
Var matmul_nt(Var a, Var b);  // a * b^T
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var div(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);

Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
Var abs(Var a);
Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

Var concat_cols(std::span<const Var> parts);
/// Block matrix assembly; an empty optional is a zero block. Every block row
/// needs at least one present block to fix its height (same for columns).
Var blocks(const std::vector<std::vector<std::optional<Var>>>& grid);
Var transpose(Var a);
Var trace(Var a);

Var mean_over_rows(Var a);  // 1 x cols: column means
Var mean_over_cols(Var a);  // rows x 1: row means
Var sum_over_cols(Var a);   // rows x 1: row sums
Var sum_all(Var a);
Var row_norms(Var a);  // rows x 1 Euclidean norms; gradient 0 at a zero row

Var select_rows(Var a, std::span<const std::size_t> rows);
Var element(Var a, std::size_t r, std::size_t c);
/// a[rows, cols] in the given index orders.
Var submatrix(Var a, std::span<const std::size_t> rows, std::span<const std::size_t> cols);
/// rows x 1 with out[i] = a[i, cols[i]].
Var pick(Var a, std::span<const std::size_t> cols);

struct BatchNormStats {
  Matrix running_mean;  // 1 x width
  Matrix running_var;   // 1 x width
  double momentum = 0.1;
  double eps = 1e-5;

  explicit BatchNormStats(std::size_t width = 0)
      : running_mean(1, width, 0.0), running_var(1, width, 1.0) {}
};

/// Normalizes each column. Training mode uses batch statistics and updates
/// the running estimates; eval mode uses the running estimates only.
Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats& stats, bool training);

/// Mean negative log-likelihood of integer class labels under row logits.
Var cross_entropy(Var logits, std::span<const std::size_t> labels);

}  // namespace maxcorr::ad
