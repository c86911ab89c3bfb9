#include "vdgr/autograd.hpp"

#include "vdgr/error.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace vdgr::ad {

namespace {

void check(bool cond, const char* what) {
  if (!cond) throw Error(ErrorCode::Internal, std::string("autograd shape error: ") + what);
}

Tape& tape_of(Var a) {
  check(a.valid(), "invalid var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  check(a.valid() && b.valid() && a.tape() == b.tape(), "vars from different tapes");
  return *a.tape();
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix(), nullptr, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Var Tape::param(Parameter& p) {
  if (auto it = param_nodes_.find(&p); it != param_nodes_.end()) return Var(this, it->second);
  nodes_.push_back(Node{p.value, Matrix(), nullptr, &p, true});
  const int id = static_cast<int>(nodes_.size() - 1);
  param_nodes_.emplace(&p, id);
  return Var(this, id);
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, Backward fn) {
  return record(std::move(value), std::span<const Var>(inputs.begin(), inputs.size()), std::move(fn));
}

Var Tape::record(Matrix value, std::span<const Var> inputs, Backward fn) {
  bool rg = false;
  for (const Var& v : inputs) rg = rg || requires_grad(v.id());
  nodes_.push_back(Node{std::move(value), Matrix(), rg ? std::move(fn) : Backward(), nullptr, rg});
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

Matrix& Tape::grad_slot(int id) {
  auto& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(int id, const Matrix& g) { accumulate_expr(id, g); }

void Tape::backward(Var loss) {
  check(loss.tape() == this && loss.rows() == 1 && loss.cols() == 1, "backward needs a scalar on this tape");
  if (!requires_grad(loss.id())) return;
  grad_slot(loss.id()).setOnes();
  for (int i = loss.id(); i >= 0; --i) {
    auto& n = nodes_[static_cast<std::size_t>(i)];
    if (n.grad.size() == 0) continue;
    if (n.backward) {
      // The closure may append to grads of earlier nodes only; copy the
      // gradient so the reference stays valid.
      const Matrix g = n.grad;
      nodes_[static_cast<std::size_t>(i)].backward(*this, g);
    }
  }
  for (auto& n : nodes_) {
    if (n.param != nullptr && n.grad.size() != 0) n.param->grad += n.grad;
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check(a.cols() == b.rows(), "matmul");
  Matrix out = a.value() * b.value();
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.accumulate_expr(ia, g * t.value(ib).transpose());
    if (t.requires_grad(ib)) t.accumulate_expr(ib, t.value(ia).transpose() * g);
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Matrix out = a.value() + b.value();
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate(ib, g);
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Matrix out = a.value() - b.value();
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    t.accumulate_expr(ib, -g);
  });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  check(a.rows() == b.rows() && a.cols() == b.cols(), "mul");
  Matrix out = a.value().cwiseProduct(b.value());
  const int ia = a.id(), ib = b.id();
  return t.record(std::move(out), {a, b}, [ia, ib](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.accumulate_expr(ia, g.cwiseProduct(t.value(ib)));
    if (t.requires_grad(ib)) t.accumulate_expr(ib, g.cwiseProduct(t.value(ia)));
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Matrix out = a.value() * s;
  const int ia = a.id();
  return t.record(std::move(out), {a}, [ia, s](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g * s); });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a, row);
  check(row.rows() == 1 && row.cols() == a.cols(), "add_row");
  Matrix out = a.value().rowwise() + row.value().row(0);
  const int ia = a.id(), ir = row.id();
  return t.record(std::move(out), {a, row}, [ia, ir](Tape& t, const Matrix& g) {
    t.accumulate(ia, g);
    if (t.requires_grad(ir)) t.accumulate_expr(ir, g.colwise().sum());
  });
}

Var mul_col(Var a, Var col) {
  Tape& t = tape_of(a, col);
  check(col.cols() == 1 && col.rows() == a.rows(), "mul_col");
  Matrix out = a.value().array().colwise() * col.value().col(0).array();
  const int ia = a.id(), ic = col.id();
  return t.record(std::move(out), {a, col}, [ia, ic](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) {
      Matrix ga = g.array().colwise() * t.value(ic).col(0).array();
      t.accumulate(ia, ga);
    }
    if (t.requires_grad(ic)) t.accumulate_expr(ic, g.cwiseProduct(t.value(ia)).rowwise().sum());
  });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().transpose();
  const int ia = a.id();
  return t.record(std::move(out), {a}, [ia](Tape& t, const Matrix& g) { t.accumulate_expr(ia, g.transpose()); });
}

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }

// ---------------------------------------------------------------------------

double gelu_value(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

Var gelu(Var a) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([](double x) { return gelu_value(x); });
  const int ia = a.id();
  return t.record(std::move(out), {a}, [ia](Tape& t, const Matrix& g) {
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
    Matrix d = t.value(ia).unaryExpr([inv_sqrt_2pi](double x) {
      return 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2)) + x * inv_sqrt_2pi * std::exp(-0.5 * x * x);
    });
    t.accumulate_expr(ia, g.cwiseProduct(d));
  });
}

Var leaky_relu(Var a, double slope) {
  Tape& t = tape_of(a);
  Matrix out = a.value().unaryExpr([slope](double x) { return x > 0.0 ? x : slope * x; });
  const int ia = a.id();
  return t.record(std::move(out), {a}, [ia, slope](Tape& t, const Matrix& g) {
    Matrix d = t.value(ia).unaryExpr([slope](double x) { return x > 0.0 ? 1.0 : slope; });
    t.accumulate_expr(ia, g.cwiseProduct(d));
  });
}

// ---------------------------------------------------------------------------

namespace {

Matrix softmax_of(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    if (!std::isfinite(m)) {
      // Fully masked row: no mass anywhere.
      out.row(r).setZero();
      continue;
    }
    // Vectorised exp(-inf) is not exactly zero; masked columns must be.
    const auto row = z.row(r).array();
    const Eigen::ArrayXXd e = (row == -std::numeric_limits<double>::infinity()).select(0.0, (row - m).exp());
    out.row(r) = (e / e.sum()).matrix();
  }
  return out;
}

}  // namespace

Var softmax_rows(Var a, const Matrix* bias) {
  Tape& t = tape_of(a);
  Matrix z = a.value();
  if (bias != nullptr) {
    check(bias->cols() == z.cols() && (bias->rows() == 1 || bias->rows() == z.rows()), "softmax bias");
    if (bias->rows() == 1)
      z.rowwise() += bias->row(0);
    else
      z += *bias;
  }
  Matrix y = softmax_of(z);
  const int ia = a.id();
  const int iy = static_cast<int>(t.size());
  return t.record(std::move(y), {a}, [ia, iy](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(iy);
    Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
    Matrix d = y.cwiseProduct(g - dot.replicate(1, g.cols()));
    t.accumulate(ia, d);
  });
}

Var log_softmax_rows(Var a) {
  Tape& t = tape_of(a);
  const Matrix& z = a.value();
  Matrix out(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    const double lse = m + std::log((z.row(r).array() - m).exp().sum());
    out.row(r) = z.row(r).array() - lse;
  }
  const int ia = a.id();
  const int iy = static_cast<int>(t.size());
  return t.record(std::move(out), {a}, [ia, iy](Tape& t, const Matrix& g) {
    Matrix p = t.value(iy).array().exp();
    Eigen::VectorXd gs = g.rowwise().sum();
    Matrix d = g - p.cwiseProduct(gs.replicate(1, g.cols()));
    t.accumulate(ia, d);
  });
}

Var layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
  Tape& t = tape_of(x, gamma);
  check(gamma.rows() == 1 && gamma.cols() == x.cols() && beta.rows() == 1 && beta.cols() == x.cols(), "layer_norm");
  const Matrix& xv = x.value();
  const Eigen::Index n = xv.rows(), d = xv.cols();
  Matrix xhat(n, d);
  Eigen::VectorXd inv_std(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = xv.row(r).mean();
    const double var = (xv.row(r).array() - mu).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mu) * inv_std(r);
  }
  Matrix out = (xhat.array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return t.record(std::move(out), {x, gamma, beta},
                  [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Matrix& g) {
                    if (t.requires_grad(ig)) t.accumulate_expr(ig, g.cwiseProduct(xhat).colwise().sum());
                    if (t.requires_grad(ib)) t.accumulate_expr(ib, g.colwise().sum());
                    if (t.requires_grad(ix)) {
                      Matrix gh = g.array().rowwise() * t.value(ig).row(0).array();
                      const double d = static_cast<double>(gh.cols());
                      Matrix dx(gh.rows(), gh.cols());
                      for (Eigen::Index r = 0; r < gh.rows(); ++r) {
                        const double m1 = gh.row(r).sum() / d;
                        const double m2 = gh.row(r).dot(xhat.row(r)) / d;
                        dx.row(r) = inv_std(r) * (gh.row(r).array() - m1 - xhat.row(r).array() * m2);
                      }
                      t.accumulate(ix, dx);
                    }
                  });
}

// ---------------------------------------------------------------------------

Var gather_rows(Var a, std::span<const int> idx) {
  Tape& t = tape_of(a);
  const Matrix& av = a.value();
  Matrix out(static_cast<Eigen::Index>(idx.size()), av.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] >= 0 && idx[i] < av.rows(), "gather_rows index");
    out.row(static_cast<Eigen::Index>(i)) = av.row(idx[i]);
  }
  const int ia = a.id();
  std::vector<int> ix(idx.begin(), idx.end());
  return t.record(std::move(out), {a}, [ia, ix = std::move(ix)](Tape& t, const Matrix& g) {
    if (!t.requires_grad(ia)) return;
    Matrix& ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < ix.size(); ++i) ga.row(ix[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var scatter_rows(Var base, Var src, std::span<const int> idx) {
  Tape& t = tape_of(base, src);
  check(src.rows() == static_cast<Eigen::Index>(idx.size()) && src.cols() == base.cols(), "scatter_rows");
  Matrix out = base.value();
  const Matrix& sv = src.value();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    check(idx[i] >= 0 && idx[i] < out.rows(), "scatter_rows index");
    out.row(idx[i]) = sv.row(static_cast<Eigen::Index>(i));
  }
  const int ib = base.id(), is = src.id();
  std::vector<int> ix(idx.begin(), idx.end());
  return t.record(std::move(out), {base, src}, [ib, is, ix = std::move(ix)](Tape& t, const Matrix& g) {
    if (t.requires_grad(ib)) {
      Matrix gb = g;
      for (int r : ix) gb.row(r).setZero();
      t.accumulate(ib, gb);
    }
    if (t.requires_grad(is)) {
      // With duplicate indices the last write wins in the forward pass.
      Matrix gs = Matrix::Zero(static_cast<Eigen::Index>(ix.size()), g.cols());
      std::vector<bool> seen(static_cast<std::size_t>(g.rows()), false);
      for (std::size_t i = ix.size(); i-- > 0;) {
        if (seen[static_cast<std::size_t>(ix[i])]) continue;
        seen[static_cast<std::size_t>(ix[i])] = true;
        gs.row(static_cast<Eigen::Index>(i)) = g.row(ix[i]);
      }
      t.accumulate(is, gs);
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  check(!parts.empty(), "concat_cols empty");
  Tape& t = tape_of(parts[0]);
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    check(p.tape() == &t && p.rows() == rows, "concat_cols rows");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    layout.emplace_back(p.id(), c);
    c += p.cols();
  }
  return t.record(std::move(out), parts, [layout = std::move(layout)](Tape& t, const Matrix& g) {
    for (const auto& [id, c0] : layout) {
      if (t.requires_grad(id)) t.accumulate_expr(id, g.middleCols(c0, t.value(id).cols()));
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  check(!parts.empty(), "concat_rows empty");
  Tape& t = tape_of(parts[0]);
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    check(p.tape() == &t && p.cols() == cols, "concat_rows cols");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  std::vector<std::pair<int, Eigen::Index>> layout;
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    layout.emplace_back(p.id(), r);
    r += p.rows();
  }
  return t.record(std::move(out), parts, [layout = std::move(layout)](Tape& t, const Matrix& g) {
    for (const auto& [id, r0] : layout) {
      if (t.requires_grad(id)) t.accumulate_expr(id, g.middleRows(r0, t.value(id).rows()));
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  check(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols");
  Matrix out = a.value().middleCols(start, count);
  const int ia = a.id();
  return t.record(std::move(out), {a}, [ia, start, count](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.grad_slot(ia).middleCols(start, count) += g;
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  check(start >= 0 && count >= 0 && start + count <= a.rows(), "slice_rows");
  Matrix out = a.value().middleRows(start, count);
  const int ia = a.id();
  return t.record(std::move(out), {a}, [ia, start, count](Tape& t, const Matrix& g) {
    if (t.requires_grad(ia)) t.grad_slot(ia).middleRows(start, count) += g;
  });
}

// ---------------------------------------------------------------------------

Var segment_softmax(Var logits, std::span<const int> seg, int n) {
  Tape& t = tape_of(logits);
  check(logits.cols() == 1 && logits.rows() == static_cast<Eigen::Index>(seg.size()), "segment_softmax");
  const Matrix& z = logits.value();
  std::vector<double> mx(static_cast<std::size_t>(n), -std::numeric_limits<double>::infinity());
  for (std::size_t e = 0; e < seg.size(); ++e) {
    check(seg[e] >= 0 && seg[e] < n, "segment id");
    mx[static_cast<std::size_t>(seg[e])] = std::max(mx[static_cast<std::size_t>(seg[e])], z(static_cast<Eigen::Index>(e), 0));
  }
  std::vector<double> denom(static_cast<std::size_t>(n), 0.0);
  Matrix y(z.rows(), 1);
  for (std::size_t e = 0; e < seg.size(); ++e) {
    const auto s = static_cast<std::size_t>(seg[e]);
    y(static_cast<Eigen::Index>(e), 0) = std::exp(z(static_cast<Eigen::Index>(e), 0) - mx[s]);
    denom[s] += y(static_cast<Eigen::Index>(e), 0);
  }
  for (std::size_t e = 0; e < seg.size(); ++e) y(static_cast<Eigen::Index>(e), 0) /= denom[static_cast<std::size_t>(seg[e])];
  const int ia = logits.id();
  const int iy = static_cast<int>(t.size());
  std::vector<int> sg(seg.begin(), seg.end());
  return t.record(std::move(y), {logits}, [ia, iy, n, sg = std::move(sg)](Tape& t, const Matrix& g) {
    const Matrix& y = t.value(iy);
    std::vector<double> dot(static_cast<std::size_t>(n), 0.0);
    for (std::size_t e = 0; e < sg.size(); ++e) dot[static_cast<std::size_t>(sg[e])] += g(static_cast<Eigen::Index>(e), 0) * y(static_cast<Eigen::Index>(e), 0);
    Matrix d(y.rows(), 1);
    for (std::size_t e = 0; e < sg.size(); ++e) {
      const auto ei = static_cast<Eigen::Index>(e);
      d(ei, 0) = y(ei, 0) * (g(ei, 0) - dot[static_cast<std::size_t>(sg[e])]);
    }
    t.accumulate(ia, d);
  });
}

Var segment_sum(Var x, std::span<const int> seg, int n) {
  Tape& t = tape_of(x);
  check(x.rows() == static_cast<Eigen::Index>(seg.size()), "segment_sum");
  const Matrix& xv = x.value();
  Matrix out = Matrix::Zero(n, xv.cols());
  for (std::size_t e = 0; e < seg.size(); ++e) {
    check(seg[e] >= 0 && seg[e] < n, "segment id");
    out.row(seg[e]) += xv.row(static_cast<Eigen::Index>(e));
  }
  const int ix = x.id();
  std::vector<int> sg(seg.begin(), seg.end());
  return t.record(std::move(out), {x}, [ix, sg = std::move(sg)](Tape& t, const Matrix& g) {
    if (!t.requires_grad(ix)) return;
    Matrix& gx = t.grad_slot(ix);
    for (std::size_t e = 0; e < sg.size(); ++e) gx.row(static_cast<Eigen::Index>(e)) += g.row(sg[e]);
  });
}

// ---------------------------------------------------------------------------

Var sum(Var a) {
  Tape& t = tape_of(a);
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const int ia = a.id();
  return t.record(std::move(out), {a}, [ia](Tape& t, const Matrix& g) {
    t.accumulate(ia, Matrix::Constant(t.value(ia).rows(), t.value(ia).cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const auto n = static_cast<double>(a.value().size());
  return scale(sum(a), n > 0 ? 1.0 / n : 0.0);
}

Var nll_mean(Var logp, std::span<const int> target) {
  Tape& t = tape_of(logp);
  check(logp.rows() == static_cast<Eigen::Index>(target.size()), "nll_mean");
  Matrix out = Matrix::Zero(1, 1);
  const auto n = static_cast<double>(target.size());
  for (std::size_t i = 0; i < target.size(); ++i) {
    check(target[i] >= 0 && target[i] < logp.cols(), "nll target");
    out(0, 0) -= logp.value()(static_cast<Eigen::Index>(i), target[i]);
  }
  if (n > 0) out(0, 0) /= n;
  const int ia = logp.id();
  std::vector<int> tg(target.begin(), target.end());
  return t.record(std::move(out), {logp}, [ia, tg = std::move(tg), n](Tape& t, const Matrix& g) {
    if (!t.requires_grad(ia) || n == 0) return;
    Matrix& ga = t.grad_slot(ia);
    for (std::size_t i = 0; i < tg.size(); ++i) ga(static_cast<Eigen::Index>(i), tg[i]) -= g(0, 0) / n;
  });
}

Var mse_mean(Var pred, const Matrix& target) {
  Tape& t = tape_of(pred);
  check(pred.rows() == target.rows() && pred.cols() == target.cols(), "mse_mean");
  Matrix diff = pred.value() - target;
  const auto n = static_cast<double>(diff.size());
  Matrix out(1, 1);
  out(0, 0) = n > 0 ? diff.squaredNorm() / n : 0.0;
  const int ia = pred.id();
  return t.record(std::move(out), {pred}, [ia, diff = std::move(diff), n](Tape& t, const Matrix& g) {
    if (n > 0) t.accumulate_expr(ia, diff * (2.0 * g(0, 0) / n));
  });
}

Var bce_with_logits(Var logit, double y) {
  Tape& t = tape_of(logit);
  check(logit.rows() == 1 && logit.cols() == 1, "bce_with_logits");
  const double z = logit.value()(0, 0);
  // log(1 + exp(-|z|)) + max(z, 0) - z y
  Matrix out(1, 1);
  out(0, 0) = std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - z * y;
  const int ia = logit.id();
  return t.record(std::move(out), {logit}, [ia, z, y](Tape& t, const Matrix& g) {
    const double s = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    Matrix d(1, 1);
    d(0, 0) = g(0, 0) * (s - y);
    t.accumulate(ia, d);
  });
}

Var soft_cross_entropy(Var logits_row, const RowVector& target) {
  check(logits_row.rows() == 1 && logits_row.cols() == target.cols(), "soft_cross_entropy");
  Var logp = log_softmax_rows(logits_row);
  Tape& t = *logits_row.tape();
  Var w = t.constant(Matrix(-target));
  return sum(mul(logp, w));
}

}  // namespace vdgr::ad
