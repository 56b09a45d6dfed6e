#include "maxcorr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "maxcorr/error.hpp"
#include "maxcorr/kernels.hpp"

namespace maxcorr::ad {

std::string_view op_name(OpTag op) {
  switch (op) {
    case OpTag::Constant: return "constant";
    case OpTag::Parameter: return "parameter";
    case OpTag::MatMul: return "matmul";
    case OpTag::MatMulNT: return "matmul_nt";
    case OpTag::Add: return "add";
    case OpTag::Sub: return "sub";
    case OpTag::Mul: return "mul";
    case OpTag::Div: return "div";
    case OpTag::Scale: return "scale";
    case OpTag::AddScalar: return "add_scalar";
    case OpTag::Relu: return "relu";
    case OpTag::LeakyRelu: return "leaky_relu";
    case OpTag::Sigmoid: return "sigmoid";
    case OpTag::Abs: return "abs";
    case OpTag::SoftmaxRows: return "softmax_rows";
    case OpTag::LogSoftmaxRows: return "log_softmax_rows";
    case OpTag::ConcatCols: return "concat_cols";
    case OpTag::Blocks: return "blocks";
    case OpTag::Trace: return "trace";
    case OpTag::Transpose: return "transpose";
    case OpTag::MeanOverRows: return "mean_over_rows";
    case OpTag::MeanOverCols: return "mean_over_cols";
    case OpTag::SumOverCols: return "sum_over_cols";
    case OpTag::SumAll: return "sum_all";
    case OpTag::RowNorms: return "row_norms";
    case OpTag::SelectRows: return "select_rows";
    case OpTag::Submatrix: return "submatrix";
    case OpTag::Element: return "element";
    case OpTag::Pick: return "pick";
    case OpTag::BatchNorm: return "batch_norm";
  }
  return "unknown";
}

const Matrix& Var::value() const { return tape_->value(id_); }

// ---- tape --------------------------------------------------------------------

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  n.op = OpTag::Constant;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::parameter(const std::string& name, const Matrix& value) {
  for (const auto& [existing, id] : params_)
    if (existing == name) throw Error("Tape::parameter: duplicate parameter name '" + name + "'");
  Node n;
  n.value = value;
  n.op = OpTag::Parameter;
  n.requires_grad = grad_enabled_;
  nodes_.push_back(std::move(n));
  params_.emplace_back(name, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, OpTag op, std::vector<std::size_t> parents, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.op = op;
  if (grad_enabled_) {
    n.requires_grad = std::any_of(parents.begin(), parents.end(),
                                  [&](std::size_t p) { return nodes_[p].requires_grad; });
    if (n.requires_grad) n.backward = std::move(fn);
  }
  n.parents = std::move(parents);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Matrix& Tape::grad(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad.same_shape(n.value)) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

std::vector<std::string> Tape::parameter_names() const {
  std::vector<std::string> names;
  names.reserve(params_.size());
  for (const auto& p : params_) names.push_back(p.first);
  return names;
}

GradientMap Tape::backward(Var loss) {
  if (loss.tape() != this) throw Error("Tape::backward: loss belongs to another tape");
  const Matrix& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1)
    throw ShapeError("backward: loss must be 1x1, got " + lv.shape_str());
  if (!grad_enabled_) throw Error("backward: tape was created with gradients disabled");

  for (Node& n : nodes_)
    if (n.op != OpTag::Parameter) n.grad = Matrix();
  grad(loss.id())(0, 0) += 1.0;

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, id);
  }

  GradientMap out;
  for (const auto& [name, id] : params_) out.emplace(name, grad(id));
  return out;
}

// ---- helpers -----------------------------------------------------------------

namespace {

enum class Bcast { Same, Row, Col, Scalar };

Tape& tape_of(Var a, Var b, OpTag op) {
  if (!a.valid() || a.tape() != b.tape())
    throw Error(std::string(op_name(op)) + ": operands must live on the same tape");
  return *a.tape();
}

[[noreturn]] void shape_fail(OpTag op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op_name(op)) + ": shape mismatch " + a.shape_str() + " vs " +
                   b.shape_str());
}

Bcast broadcast_kind(OpTag op, const Matrix& a, const Matrix& b) {
  if (a.same_shape(b)) return Bcast::Same;
  if (b.rows() == 1 && b.cols() == 1) return Bcast::Scalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Bcast::Row;
  if (b.cols() == 1 && b.rows() == a.rows()) return Bcast::Col;
  shape_fail(op, a, b);
}

inline double bval(const Matrix& b, Bcast k, std::size_t i, std::size_t j) {
  switch (k) {
    case Bcast::Same: return b(i, j);
    case Bcast::Row: return b(0, j);
    case Bcast::Col: return b(i, 0);
    case Bcast::Scalar: return b(0, 0);
  }
  return 0.0;
}

inline double& bref(Matrix& b, Bcast k, std::size_t i, std::size_t j) {
  switch (k) {
    case Bcast::Same: return b(i, j);
    case Bcast::Row: return b(0, j);
    case Bcast::Col: return b(i, 0);
    case Bcast::Scalar: return b(0, 0);
  }
  return b(0, 0);
}

template <class F>
Matrix map_values(const Matrix& a, F f) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = f(a.data()[i]);
  return out;
}

// Elementwise unary op whose derivative is expressed via input x and output y.
template <class F, class D>
Var unary(Var a, OpTag op, F f, D dfdx) {
  Tape& t = *a.tape();
  Matrix out = map_values(a.value(), f);
  const std::size_t ia = a.id();
  return t.record(std::move(out), op, {ia}, [ia, dfdx](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Matrix& x = t.value(ia);
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < x.size(); ++i)
      ga.data()[i] += g.data()[i] * dfdx(x.data()[i], y.data()[i]);
  });
}

}  // namespace

// ---- matmul ------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b, OpTag::MatMul);
  if (a.cols() != b.rows()) shape_fail(OpTag::MatMul, a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(kernels::matmul(a.value(), b.value()), OpTag::MatMul, {ia, ib},
                  [ia, ib](Tape& t, std::size_t self) {
                    const Matrix& g = t.grad(self);
                    if (t.requires_grad(ia))
                      kernels::gemm_acc(kernels::Op::None, kernels::Op::Transpose, g, t.value(ib),
                                        t.grad(ia));
                    if (t.requires_grad(ib))
                      kernels::gemm_acc(kernels::Op::Transpose, kernels::Op::None, t.value(ia), g,
                                        t.grad(ib));
                  });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b, OpTag::MatMulNT);
  if (a.cols() != b.cols()) shape_fail(OpTag::MatMulNT, a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(kernels::matmul_nt(a.value(), b.value()), OpTag::MatMulNT, {ia, ib},
                  [ia, ib](Tape& t, std::size_t self) {
                    const Matrix& g = t.grad(self);
                    // out = a b^T: da = g b, db = g^T a
                    if (t.requires_grad(ia))
                      kernels::gemm_acc(kernels::Op::None, kernels::Op::None, g, t.value(ib),
                                        t.grad(ia));
                    if (t.requires_grad(ib))
                      kernels::gemm_acc(kernels::Op::Transpose, kernels::Op::None, g, t.value(ia),
                                        t.grad(ib));
                  });
}

// ---- broadcasting binary ops ---------------------------------------------------

namespace {

enum class Binary { Add, Sub, Mul, Div };

Var binary(Var a, Var b, Binary kind, OpTag op) {
  Tape& t = tape_of(a, b, op);
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  const Bcast bk = broadcast_kind(op, av, bv);
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) {
      const double x = av(i, j), y = bval(bv, bk, i, j);
      double r = 0.0;
      switch (kind) {
        case Binary::Add: r = x + y; break;
        case Binary::Sub: r = x - y; break;
        case Binary::Mul: r = x * y; break;
        case Binary::Div: r = x / y; break;
      }
      out(i, j) = r;
    }
  const std::size_t ia = a.id(), ib = b.id();
  return t.record(std::move(out), op, {ia, ib}, [ia, ib, bk, kind](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    const Matrix& av = t.value(ia);
    const Matrix& bv = t.value(ib);
    const bool need_a = t.requires_grad(ia), need_b = t.requires_grad(ib);
    Matrix* ga = need_a ? &t.grad(ia) : nullptr;
    Matrix* gb = need_b ? &t.grad(ib) : nullptr;
    for (std::size_t i = 0; i < g.rows(); ++i)
      for (std::size_t j = 0; j < g.cols(); ++j) {
        const double gij = g(i, j);
        const double y = bval(bv, bk, i, j);
        switch (kind) {
          case Binary::Add:
            if (ga) (*ga)(i, j) += gij;
            if (gb) bref(*gb, bk, i, j) += gij;
            break;
          case Binary::Sub:
            if (ga) (*ga)(i, j) += gij;
            if (gb) bref(*gb, bk, i, j) -= gij;
            break;
          case Binary::Mul:
            if (ga) (*ga)(i, j) += gij * y;
            if (gb) bref(*gb, bk, i, j) += gij * av(i, j);
            break;
          case Binary::Div:
            if (ga) (*ga)(i, j) += gij / y;
            if (gb) bref(*gb, bk, i, j) -= gij * av(i, j) / (y * y);
            break;
        }
      }
  });
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, Binary::Add, OpTag::Add); }
Var sub(Var a, Var b) { return binary(a, b, Binary::Sub, OpTag::Sub); }
Var mul(Var a, Var b) { return binary(a, b, Binary::Mul, OpTag::Mul); }
Var div(Var a, Var b) { return binary(a, b, Binary::Div, OpTag::Div); }

Var scale(Var a, double s) {
  return unary(
      a, OpTag::Scale, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(Var a, double s) {
  return unary(
      a, OpTag::AddScalar, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

// ---- activations ---------------------------------------------------------------

// Subgradient at 0 is the negative-side slope.
Var relu(Var a) {
  return unary(
      a, OpTag::Relu, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double slope) {
  return unary(
      a, OpTag::LeakyRelu, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

Var sigmoid(Var a) {
  return unary(
      a, OpTag::Sigmoid,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var abs(Var a) {
  return unary(
      a, OpTag::Abs, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var softmax_rows(Var a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double s = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) s += (out(i, j) = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= s;
  }
  const std::size_t ia = a.id();
  return t.record(std::move(out), OpTag::SoftmaxRows, {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto xr = x.row(i);
    const double mx = *std::max_element(xr.begin(), xr.end());
    double s = 0.0;
    for (double v : xr) s += std::exp(v - mx);
    const double lse = mx + std::log(s);
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) = xr[j] - lse;
  }
  const std::size_t ia = a.id();
  return t.record(std::move(out), OpTag::LogSoftmaxRows, {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double gs = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) gs += g(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j) ga(i, j) += g(i, j) - std::exp(y(i, j)) * gs;
    }
  });
}

// ---- structure -----------------------------------------------------------------

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw Error("concat_cols: no inputs");
  Tape& t = *parts.front().tape();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    if (p.tape() != &t) throw Error("concat_cols: operands must live on the same tape");
    if (p.rows() != rows) shape_fail(OpTag::ConcatCols, parts.front().value(), p.value());
    cols += p.cols();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (const Var& p : parts) {
    const Matrix& v = p.value();
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(v.row(i).begin(), v.row(i).end(), out.row(i).begin() + off);
    off += v.cols();
  }
  auto parents = ids;
  return t.record(std::move(out), OpTag::ConcatCols, std::move(parents),
                  [ids](Tape& t, std::size_t self) {
                    const Matrix& g = t.grad(self);
                    std::size_t off = 0;
                    for (std::size_t id : ids) {
                      const std::size_t w = t.value(id).cols();
                      if (t.requires_grad(id)) {
                        Matrix& gp = t.grad(id);
                        for (std::size_t i = 0; i < g.rows(); ++i)
                          for (std::size_t j = 0; j < w; ++j) gp(i, j) += g(i, off + j);
                      }
                      off += w;
                    }
                  });
}

Var blocks(const std::vector<std::vector<std::optional<Var>>>& grid) {
  const std::size_t br = grid.size();
  if (br == 0 || grid.front().empty()) throw Error("blocks: empty grid");
  const std::size_t bc = grid.front().size();
  Tape* tp = nullptr;
  std::vector<std::size_t> heights(br, 0), widths(bc, 0);
  std::vector<bool> h_set(br, false), w_set(bc, false);
  for (std::size_t r = 0; r < br; ++r) {
    if (grid[r].size() != bc) throw ShapeError("blocks: ragged block grid");
    for (std::size_t c = 0; c < bc; ++c) {
      if (!grid[r][c]) continue;
      const Var& v = *grid[r][c];
      if (tp == nullptr) tp = v.tape();
      if (v.tape() != tp) throw Error("blocks: operands must live on the same tape");
      if (h_set[r] && heights[r] != v.rows())
        throw ShapeError("blocks: block (" + std::to_string(r) + "," + std::to_string(c) +
                         ") is " + v.value().shape_str() + ", row height " +
                         std::to_string(heights[r]));
      if (w_set[c] && widths[c] != v.cols())
        throw ShapeError("blocks: block (" + std::to_string(r) + "," + std::to_string(c) +
                         ") is " + v.value().shape_str() + ", column width " +
                         std::to_string(widths[c]));
      heights[r] = v.rows();
      widths[c] = v.cols();
      h_set[r] = w_set[c] = true;
    }
  }
  if (tp == nullptr || std::find(h_set.begin(), h_set.end(), false) != h_set.end() ||
      std::find(w_set.begin(), w_set.end(), false) != w_set.end())
    throw ShapeError("blocks: every block row and column needs one present block");

  std::vector<std::size_t> row_off(br + 1, 0), col_off(bc + 1, 0);
  for (std::size_t r = 0; r < br; ++r) row_off[r + 1] = row_off[r] + heights[r];
  for (std::size_t c = 0; c < bc; ++c) col_off[c + 1] = col_off[c] + widths[c];

  struct Placed {
    std::size_t id, r0, c0;
  };
  std::vector<Placed> placed;
  std::vector<std::size_t> parents;
  Matrix out(row_off[br], col_off[bc]);
  for (std::size_t r = 0; r < br; ++r)
    for (std::size_t c = 0; c < bc; ++c) {
      if (!grid[r][c]) continue;
      const Var& v = *grid[r][c];
      const Matrix& m = v.value();
      for (std::size_t i = 0; i < m.rows(); ++i)
        std::copy(m.row(i).begin(), m.row(i).end(), out.row(row_off[r] + i).begin() + col_off[c]);
      placed.push_back({v.id(), row_off[r], col_off[c]});
      parents.push_back(v.id());
    }
  return tp->record(std::move(out), OpTag::Blocks, std::move(parents),
                    [placed](Tape& t, std::size_t self) {
                      const Matrix& g = t.grad(self);
                      for (const Placed& p : placed) {
                        if (!t.requires_grad(p.id)) continue;
                        Matrix& gp = t.grad(p.id);
                        for (std::size_t i = 0; i < gp.rows(); ++i)
                          for (std::size_t j = 0; j < gp.cols(); ++j)
                            gp(i, j) += g(p.r0 + i, p.c0 + j);
                      }
                    });
}

Var transpose(Var a) {
  Tape& t = *a.tape();
  const std::size_t ia = a.id();
  return t.record(a.value().transposed(), OpTag::Transpose, {ia},
                  [ia](Tape& t, std::size_t self) {
                    if (!t.requires_grad(ia)) return;
                    const Matrix& g = t.grad(self);
                    Matrix& ga = t.grad(ia);
                    for (std::size_t i = 0; i < g.rows(); ++i)
                      for (std::size_t j = 0; j < g.cols(); ++j) ga(j, i) += g(i, j);
                  });
}

Var trace(Var a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  if (x.rows() != x.cols())
    throw ShapeError("trace: shape mismatch " + x.shape_str() + " vs square");
  double s = 0.0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, i);
  const std::size_t ia = a.id();
  return t.record(Matrix::scalar(s), OpTag::Trace, {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const double g = t.grad(self)(0, 0);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.rows(); ++i) ga(i, i) += g;
  });
}

// ---- reductions ----------------------------------------------------------------

Var mean_over_rows(Var a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  if (x.rows() == 0) throw ShapeError("mean_over_rows: shape mismatch " + x.shape_str() + " vs non-empty");
  Matrix out(1, x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) += x(i, j);
  const double n = static_cast<double>(x.rows());
  for (std::size_t j = 0; j < x.cols(); ++j) out(0, j) /= n;
  const std::size_t ia = a.id();
  return t.record(std::move(out), OpTag::MeanOverRows, {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    const double n = static_cast<double>(ga.rows());
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(0, j) / n;
  });
}

Var mean_over_cols(Var a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  if (x.cols() == 0) throw ShapeError("mean_over_cols: shape mismatch " + x.shape_str() + " vs non-empty");
  Matrix out(x.rows(), 1);
  const double n = static_cast<double>(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v;
    out(i, 0) = s / n;
  }
  const std::size_t ia = a.id();
  return t.record(std::move(out), OpTag::MeanOverCols, {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    const double n = static_cast<double>(ga.cols());
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, 0) / n;
  });
}

Var sum_over_cols(Var a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v;
    out(i, 0) = s;
  }
  const std::size_t ia = a.id();
  return t.record(std::move(out), OpTag::SumOverCols, {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.rows(); ++i)
      for (std::size_t j = 0; j < ga.cols(); ++j) ga(i, j) += g(i, 0);
  });
}

Var sum_all(Var a) {
  Tape& t = *a.tape();
  double s = 0.0;
  for (double v : a.value().flat()) s += v;
  const std::size_t ia = a.id();
  return t.record(Matrix::scalar(s), OpTag::SumAll, {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const double g = t.grad(self)(0, 0);
    for (double& v : t.grad(ia).flat()) v += g;
  });
}

Var row_norms(Var a) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    out(i, 0) = std::sqrt(s);
  }
  const std::size_t ia = a.id();
  return t.record(std::move(out), OpTag::RowNorms, {ia}, [ia](Tape& t, std::size_t self) {
    if (!t.requires_grad(ia)) return;
    const Matrix& x = t.value(ia);
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad(ia);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      if (y(i, 0) == 0.0) continue;
      const double f = g(i, 0) / y(i, 0);
      for (std::size_t j = 0; j < x.cols(); ++j) ga(i, j) += f * x(i, j);
    }
  });
}

// ---- indexing ------------------------------------------------------------------

Var select_rows(Var a, std::span<const std::size_t> rows) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  Matrix out(rows.size(), x.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= x.rows())
      throw ShapeError("select_rows: row " + std::to_string(rows[r]) + " out of range for " +
                       x.shape_str());
    std::copy(x.row(rows[r]).begin(), x.row(rows[r]).end(), out.row(r).begin());
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return t.record(std::move(out), OpTag::SelectRows, {ia},
                  [ia, idx = std::move(idx)](Tape& t, std::size_t self) {
                    if (!t.requires_grad(ia)) return;
                    const Matrix& g = t.grad(self);
                    Matrix& ga = t.grad(ia);
                    for (std::size_t r = 0; r < idx.size(); ++r)
                      for (std::size_t j = 0; j < g.cols(); ++j) ga(idx[r], j) += g(r, j);
                  });
}

Var submatrix(Var a, std::span<const std::size_t> rows, std::span<const std::size_t> cols) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  for (std::size_t r : rows)
    if (r >= x.rows())
      throw ShapeError("submatrix: row " + std::to_string(r) + " out of range for " + x.shape_str());
  for (std::size_t c : cols)
    if (c >= x.cols())
      throw ShapeError("submatrix: column " + std::to_string(c) + " out of range for " +
                       x.shape_str());
  Matrix out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = x(rows[i], cols[j]);
  const std::size_t ia = a.id();
  std::vector<std::size_t> ri(rows.begin(), rows.end()), ci(cols.begin(), cols.end());
  return t.record(std::move(out), OpTag::Submatrix, {ia},
                  [ia, ri = std::move(ri), ci = std::move(ci)](Tape& t, std::size_t self) {
                    if (!t.requires_grad(ia)) return;
                    const Matrix& g = t.grad(self);
                    Matrix& ga = t.grad(ia);
                    for (std::size_t i = 0; i < ri.size(); ++i)
                      for (std::size_t j = 0; j < ci.size(); ++j) ga(ri[i], ci[j]) += g(i, j);
                  });
}

Var element(Var a, std::size_t r, std::size_t c) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  if (r >= x.rows() || c >= x.cols())
    throw ShapeError("element: index (" + std::to_string(r) + "," + std::to_string(c) +
                     ") out of range for " + x.shape_str());
  const std::size_t ia = a.id();
  return t.record(Matrix::scalar(x(r, c)), OpTag::Element, {ia},
                  [ia, r, c](Tape& t, std::size_t self) {
                    if (!t.requires_grad(ia)) return;
                    t.grad(ia)(r, c) += t.grad(self)(0, 0);
                  });
}

Var pick(Var a, std::span<const std::size_t> cols) {
  Tape& t = *a.tape();
  const Matrix& x = a.value();
  if (cols.size() != x.rows())
    throw ShapeError("pick: shape mismatch " + x.shape_str() + " vs " +
                     shape_str(cols.size(), 1));
  Matrix out(x.rows(), 1);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    if (cols[i] >= x.cols())
      throw ShapeError("pick: column " + std::to_string(cols[i]) + " out of range for " +
                       x.shape_str());
    out(i, 0) = x(i, cols[i]);
  }
  const std::size_t ia = a.id();
  std::vector<std::size_t> idx(cols.begin(), cols.end());
  return t.record(std::move(out), OpTag::Pick, {ia},
                  [ia, idx = std::move(idx)](Tape& t, std::size_t self) {
                    if (!t.requires_grad(ia)) return;
                    const Matrix& g = t.grad(self);
                    Matrix& ga = t.grad(ia);
                    for (std::size_t i = 0; i < idx.size(); ++i) ga(i, idx[i]) += g(i, 0);
                  });
}

// ---- batch normalization -------------------------------------------------------

Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats& stats, bool training) {
  Tape& t = tape_of(x, gamma, OpTag::BatchNorm);
  const Matrix& xv = x.value();
  const std::size_t n = xv.rows(), w = xv.cols();
  if (gamma.rows() != 1 || gamma.cols() != w) shape_fail(OpTag::BatchNorm, xv, gamma.value());
  if (beta.rows() != 1 || beta.cols() != w) shape_fail(OpTag::BatchNorm, xv, beta.value());
  if (stats.running_mean.cols() != w) shape_fail(OpTag::BatchNorm, xv, stats.running_mean);
  if (n == 0) throw ShapeError("batch_norm: shape mismatch " + xv.shape_str() + " vs non-empty");

  Matrix mean(1, w), inv_std(1, w);
  if (training) {
    Matrix var(1, w);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) mean(0, j) += xv(i, j);
    for (std::size_t j = 0; j < w; ++j) mean(0, j) /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) {
        const double d = xv(i, j) - mean(0, j);
        var(0, j) += d * d;
      }
    const double m = stats.momentum;
    for (std::size_t j = 0; j < w; ++j) {
      const double biased = var(0, j) / static_cast<double>(n);
      const double unbiased = n > 1 ? var(0, j) / static_cast<double>(n - 1) : biased;
      inv_std(0, j) = 1.0 / std::sqrt(biased + stats.eps);
      stats.running_mean(0, j) = (1.0 - m) * stats.running_mean(0, j) + m * mean(0, j);
      stats.running_var(0, j) = (1.0 - m) * stats.running_var(0, j) + m * unbiased;
    }
  } else {
    for (std::size_t j = 0; j < w; ++j) {
      mean(0, j) = stats.running_mean(0, j);
      inv_std(0, j) = 1.0 / std::sqrt(stats.running_var(0, j) + stats.eps);
    }
  }

  Matrix xhat(n, w), out(n, w);
  const Matrix& gv = gamma.value();
  const Matrix& bv = beta.value();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w; ++j) {
      xhat(i, j) = (xv(i, j) - mean(0, j)) * inv_std(0, j);
      out(i, j) = gv(0, j) * xhat(i, j) + bv(0, j);
    }

  const std::size_t ix = x.id(), ig = gamma.id(), ib = beta.id();
  return t.record(
      std::move(out), OpTag::BatchNorm, {ix, ig, ib},
      [ix, ig, ib, training, xhat = std::move(xhat), inv_std = std::move(inv_std)](
          Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const std::size_t n = g.rows(), w = g.cols();
        const Matrix& gv = t.value(ig);
        Matrix sum_g(1, w), sum_gx(1, w);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j) {
            sum_g(0, j) += g(i, j);
            sum_gx(0, j) += g(i, j) * xhat(i, j);
          }
        if (t.requires_grad(ig)) {
          Matrix& gg = t.grad(ig);
          for (std::size_t j = 0; j < w; ++j) gg(0, j) += sum_gx(0, j);
        }
        if (t.requires_grad(ib)) {
          Matrix& gb = t.grad(ib);
          for (std::size_t j = 0; j < w; ++j) gb(0, j) += sum_g(0, j);
        }
        if (!t.requires_grad(ix)) return;
        Matrix& gx = t.grad(ix);
        const double nn = static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < w; ++j) {
            const double k = gv(0, j) * inv_std(0, j);
            if (training)
              gx(i, j) += k * (g(i, j) - sum_g(0, j) / nn - xhat(i, j) * sum_gx(0, j) / nn);
            else
              gx(i, j) += k * g(i, j);
          }
      });
}

Var cross_entropy(Var logits, std::span<const std::size_t> labels) {
  if (labels.empty()) throw Error("cross_entropy: empty batch");
  Var picked = pick(log_softmax_rows(logits), labels);
  return scale(sum_all(picked), -1.0 / static_cast<double>(labels.size()));
}

}  // namespace maxcorr::ad
