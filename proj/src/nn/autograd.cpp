#include "subdivnet/nn/autograd.h"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <memory>

#include "subdivnet/error.h"
#include "subdivnet/parallel.h"

namespace subdivnet::nn {

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::grad() const { return tape->grad(id); }

Var Tape::constant(Matrix value) {
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

Var Tape::leaf(Matrix value) {
  Var v = constant(std::move(value));
  nodes_.back()->needs_grad = true;
  return v;
}

Var Tape::parameter(Parameter& p) {
  Var v = leaf(p.value);
  nodes_.back()->param = &p;
  return v;
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Adjoint adjoint) {
  assert(value.allFinite() && "layer produced NaN or Inf");
  auto n = std::make_unique<Node>();
  n->value = std::move(value);
  for (const Var& p : parents) {
    if (p.tape != this) throw Error("operands recorded on different tapes");
    n->needs_grad = n->needs_grad || nodes_[p.id]->needs_grad;
  }
  if (n->needs_grad) n->adjoint = std::move(adjoint);
  nodes_.push_back(std::move(n));
  return {this, static_cast<int>(nodes_.size()) - 1};
}

void Tape::accumulate(int id, const Matrix& delta) {
  Node& n = *nodes_[id];
  if (!n.needs_grad) return;
  if (!n.has_grad) {
    n.grad = delta;
    n.has_grad = true;
  } else {
    n.grad += delta;
  }
}

Matrix* Tape::grad_buffer(int id) {
  Node& n = *nodes_[id];
  if (!n.needs_grad) return nullptr;
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return &n.grad;
}

const Matrix& Tape::grad(int id) {
  Node& n = *nodes_[id];
  if (!n.has_grad) {
    n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(Var root) {
  const Matrix& v = value(root.id);
  if (v.rows() != 1 || v.cols() != 1) throw ShapeError("backward() without a seed needs a scalar root");
  backward(root, Matrix::Ones(1, 1));
}

void Tape::backward(Var root, const Matrix& seed) {
  if (root.tape != this) throw Error("root is not on this tape");
  const Matrix& v = value(root.id);
  if (seed.rows() != v.rows() || seed.cols() != v.cols()) throw ShapeError("seed shape does not match root");
  accumulate(root.id, seed);
  for (int i = root.id; i >= 0; --i) {
    Node& n = *nodes_[i];
    if (n.has_grad && n.adjoint) n.adjoint(*this, n.grad);
  }
  for (auto& n : nodes_) {
    if (n->param && n->has_grad) n->param->grad += n->grad;
  }
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

/// Sum of t[0..n) in ascending order of value.
double sorted_sum(double* t, int n) {
  std::sort(t, t + n);
  double s = 0;
  for (int i = 0; i < n; ++i) s += t[i];
  return s;
}

/// Sum of three values in ascending order, without branches.
double sum3(double a, double b, double c) {
  const double lo = std::min(std::min(a, b), c);
  const double hi = std::max(std::max(a, b), c);
  const double mid = std::max(std::min(a, b), std::min(std::max(a, b), c));
  return (lo + mid) + hi;
}

void check_neighborhood(const Neighborhood& nb, int input_rows) {
  require(nb.input_rows == input_rows, "mesh_conv input rows do not match the neighborhood");
  require(nb.index.size() == static_cast<std::size_t>(nb.rows()) * nb.row_length,
          "neighborhood index size mismatch");
}

}  // namespace

Var matmul(Var a, Var b) {
  require(a.cols() == b.rows(), "matmul shape mismatch");
  Matrix out = a.value() * b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    if (t.needs_grad(a.id)) t.accumulate(a.id, g * t.value(b.id).transpose());
    if (t.needs_grad(b.id)) t.accumulate(b.id, t.value(a.id).transpose() * g);
  });
}

Var add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add shape mismatch");
  Matrix out = a.value() + b.value();
  return a.tape->record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& g) {
    t.accumulate(a.id, g);
    t.accumulate(b.id, g);
  });
}

Var add_row(Var x, Var b) {
  require(b.rows() == 1 && b.cols() == x.cols(), "bias shape mismatch");
  Matrix out = x.value().rowwise() + b.value().row(0);
  return x.tape->record(std::move(out), {x, b}, [x, b](Tape& t, const Matrix& g) {
    t.accumulate(x.id, g);
    if (t.needs_grad(b.id)) t.accumulate(b.id, g.colwise().sum());
  });
}

Var relu(Var x) {
  Matrix out = x.value().cwiseMax(0.0);
  return x.tape->record(std::move(out), {x}, [x](Tape& t, const Matrix& g) {
    t.accumulate(x.id, (t.value(x.id).array() > 0).select(g, 0.0));
  });
}

Var concat_cols(Var a, Var b) {
  require(a.rows() == b.rows(), "concat row mismatch");
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  const int ca = a.cols(), cb = b.cols();
  return a.tape->record(std::move(out), {a, b}, [a, b, ca, cb](Tape& t, const Matrix& g) {
    if (t.needs_grad(a.id)) t.accumulate(a.id, g.leftCols(ca));
    if (t.needs_grad(b.id)) t.accumulate(b.id, g.rightCols(cb));
  });
}

Var standardize(Var x, const Matrix& mean, const Matrix& inv_std) {
  require(mean.cols() == x.cols() && inv_std.cols() == x.cols(), "standardize shape mismatch");
  Matrix out = (x.value().rowwise() - mean.row(0)).array().rowwise() * inv_std.row(0).array();
  return x.tape->record(std::move(out), {x}, [x, inv_std](Tape& t, const Matrix& g) {
    t.accumulate(x.id, g.array().rowwise() * inv_std.row(0).array());
  });
}

Var batch_norm(Var x, Var gamma, Var beta, BatchNormStats& stats, bool training) {
  const int n = x.rows(), c = x.cols();
  require(gamma.cols() == c && beta.cols() == c, "batch_norm parameter shape mismatch");
  require(n > 0, "batch_norm on an empty tensor");
  if (stats.mean.size() != c) {
    stats.mean = Matrix::Zero(1, c);
    stats.var = Matrix::Ones(1, c);
  }
  const Matrix& xv = x.value();
  Matrix mean, var;
  if (training) {
    mean = xv.colwise().mean();
    var = (xv.rowwise() - mean.row(0)).array().square().colwise().mean();
    stats.mean = stats.momentum * stats.mean + (1 - stats.momentum) * mean;
    stats.var = stats.momentum * stats.var + (1 - stats.momentum) * var;
  } else {
    mean = stats.mean;
    var = stats.var;
  }
  Matrix inv = (var.array() + stats.eps).rsqrt();
  auto xhat = std::make_shared<Matrix>((xv.rowwise() - mean.row(0)).array().rowwise() * inv.row(0).array());
  Matrix out = (xhat->array().rowwise() * gamma.value().row(0).array()).rowwise() + beta.value().row(0).array();
  return x.tape->record(std::move(out), {x, gamma, beta},
                        [x, gamma, beta, xhat, inv, training, n](Tape& t, const Matrix& g) {
    if (t.needs_grad(gamma.id)) t.accumulate(gamma.id, (g.array() * xhat->array()).colwise().sum().matrix());
    if (t.needs_grad(beta.id)) t.accumulate(beta.id, g.colwise().sum());
    if (!t.needs_grad(x.id)) return;
    const Matrix dxhat = g.array().rowwise() * t.value(gamma.id).row(0).array();
    if (!training) {
      t.accumulate(x.id, dxhat.array().rowwise() * inv.row(0).array());
      return;
    }
    const Eigen::RowVectorXd sum_d = dxhat.colwise().sum();
    const Eigen::RowVectorXd sum_dx = (dxhat.array() * xhat->array()).colwise().sum();
    Matrix dx = (static_cast<double>(n) * dxhat.array() - (xhat->array().rowwise() * sum_dx.array()))
                    .rowwise() - sum_d.array();
    dx = dx.array().rowwise() * (inv.row(0).array() / static_cast<double>(n));
    t.accumulate(x.id, dx);
  });
}

Matrix ring_terms(const Matrix& x, const Neighborhood& nb) {
  check_neighborhood(nb, static_cast<int>(x.rows()));
  const int rows = nb.rows(), c = static_cast<int>(x.cols()), len = nb.row_length;
  Matrix z(rows, 4 * c);
  const double* xs = x.data();
  parallel_for(
      0, rows,
      [&](int r) {
        const int* idx = nb.index.data() + static_cast<std::size_t>(r) * len;
        const double* e = xs + static_cast<std::size_t>(nb.anchor[r]) * c;
        double* out = z.data() + static_cast<std::size_t>(r) * 4 * c;
        if (len == 3) {
          const double* p0 = xs + static_cast<std::size_t>(idx[0]) * c;
          const double* p1 = xs + static_cast<std::size_t>(idx[1]) * c;
          const double* p2 = xs + static_cast<std::size_t>(idx[2]) * c;
          for (int ch = 0; ch < c; ++ch) {
            const double v0 = p0[ch], v1 = p1[ch], v2 = p2[ch];
            out[ch] = e[ch];
            out[c + ch] = sum3(v0, v1, v2);
            out[2 * c + ch] = sum3(std::abs(v1 - v0), std::abs(v2 - v1), std::abs(v0 - v2));
            out[3 * c + ch] = sum3(std::abs(e[ch] - v0), std::abs(e[ch] - v1), std::abs(e[ch] - v2));
          }
          return;
        }
        std::vector<double> v(len), terms(len);
        for (int ch = 0; ch < c; ++ch) {
          for (int j = 0; j < len; ++j) v[j] = xs[static_cast<std::size_t>(idx[j]) * c + ch];
          out[ch] = e[ch];
          terms = v;
          out[c + ch] = sorted_sum(terms.data(), len);
          for (int j = 0; j < len; ++j) terms[j] = std::abs(v[(j + 1) % len] - v[j]);
          out[2 * c + ch] = sorted_sum(terms.data(), len);
          for (int j = 0; j < len; ++j) terms[j] = std::abs(e[ch] - v[j]);
          out[3 * c + ch] = sorted_sum(terms.data(), len);
        }
      },
      512);
  return z;
}

Var mesh_conv(Var x, const Neighborhood& nb, const std::array<Var, 4>& w, Var bias) {
  const int c = x.cols();
  const int out_c = w[0].cols();
  for (const Var& wk : w) require(wk.rows() == c && wk.cols() == out_c, "mesh_conv weight shape mismatch");
  auto z = std::make_shared<Matrix>(ring_terms(x.value(), nb));
  Matrix wall(4 * c, out_c);
  for (int k = 0; k < 4; ++k) wall.middleRows(k * c, c) = w[k].value();
  Matrix out = (*z) * wall;
  const bool has_bias = bias.tape != nullptr;
  if (has_bias) {
    require(bias.rows() == 1 && bias.cols() == out_c, "mesh_conv bias shape mismatch");
    out.rowwise() += bias.value().row(0);
  }
  Tape& tape = *x.tape;
  auto adjoint = [x, w, bias, has_bias, z, wall, &nb, c](Tape& t, const Matrix& g) {
    if (has_bias && t.needs_grad(bias.id)) t.accumulate(bias.id, g.colwise().sum());
    bool any_w = false;
    for (const Var& wk : w) any_w = any_w || t.needs_grad(wk.id);
    if (any_w) {
      const Matrix dw = z->transpose() * g;
      for (int k = 0; k < 4; ++k) {
        if (t.needs_grad(w[k].id)) t.accumulate(w[k].id, dw.middleRows(k * c, c));
      }
    }
    Matrix* dx = t.grad_buffer(x.id);
    if (!dx) return;
    const Matrix dz = g * wall.transpose();
    const double* xs = t.value(x.id).data();
    double* gx = dx->data();
    const int len = nb.row_length;
    for (int r = 0; r < nb.rows(); ++r) {
      const int* idx = nb.index.data() + static_cast<std::size_t>(r) * len;
      const std::size_t a = static_cast<std::size_t>(nb.anchor[r]) * c;
      const double* g = dz.data() + static_cast<std::size_t>(r) * 4 * c;
      for (int ch = 0; ch < c; ++ch) gx[a + ch] += g[ch];
      for (int j = 0; j < len; ++j) {
        const std::size_t p = static_cast<std::size_t>(idx[j]) * c;
        const std::size_t q = static_cast<std::size_t>(idx[(j + 1) % len]) * c;
        for (int ch = 0; ch < c; ++ch) {
          const double s2 = sign(xs[q + ch] - xs[p + ch]) * g[2 * c + ch];
          const double s3 = sign(xs[a + ch] - xs[p + ch]) * g[3 * c + ch];
          gx[p + ch] += g[c + ch] - s2 - s3;
          gx[q + ch] += s2;
          gx[a + ch] += s3;
        }
      }
    }
  };
  if (has_bias) return tape.record(std::move(out), {x, w[0], w[1], w[2], w[3], bias}, std::move(adjoint));
  return tape.record(std::move(out), {x, w[0], w[1], w[2], w[3]}, std::move(adjoint));
}

Var max_pool(Var x, std::span<const std::array<int, 4>> children) {
  const int rows = static_cast<int>(children.size()), c = x.cols();
  const Matrix& xv = x.value();
  Matrix out(rows, c);
  auto arg = std::make_shared<std::vector<int>>(static_cast<std::size_t>(rows) * c);
  for (int p = 0; p < rows; ++p) {
    for (int ch = 0; ch < c; ++ch) {
      int best = children[p][0];
      for (int k = 1; k < 4; ++k) {
        if (xv(children[p][k], ch) > xv(best, ch)) best = children[p][k];
      }
      out(p, ch) = xv(best, ch);
      (*arg)[static_cast<std::size_t>(p) * c + ch] = best;
    }
  }
  return x.tape->record(std::move(out), {x}, [x, arg, rows, c](Tape& t, const Matrix& g) {
    Matrix* dx = t.grad_buffer(x.id);
    for (int p = 0; p < rows; ++p) {
      for (int ch = 0; ch < c; ++ch) (*dx)((*arg)[static_cast<std::size_t>(p) * c + ch], ch) += g(p, ch);
    }
  });
}

Var mean_pool(Var x, std::span<const std::array<int, 4>> children) {
  const int rows = static_cast<int>(children.size());
  const Matrix& xv = x.value();
  Matrix out(rows, x.cols());
  for (int p = 0; p < rows; ++p) {
    const auto& ch = children[p];
    out.row(p) = ((xv.row(ch[0]) + xv.row(ch[1])) + (xv.row(ch[2]) + xv.row(ch[3]))) * 0.25;
  }
  std::vector<std::array<int, 4>> kids(children.begin(), children.end());
  return x.tape->record(std::move(out), {x}, [x, kids = std::move(kids)](Tape& t, const Matrix& g) {
    Matrix* dx = t.grad_buffer(x.id);
    for (std::size_t p = 0; p < kids.size(); ++p) {
      for (int k : kids[p]) dx->row(k) += 0.25 * g.row(static_cast<int>(p));
    }
  });
}

Var upsample_nearest(Var x, std::span<const int> parent) {
  const int rows = static_cast<int>(parent.size());
  Matrix out(rows, x.cols());
  for (int f = 0; f < rows; ++f) out.row(f) = x.value().row(parent[f]);
  std::vector<int> par(parent.begin(), parent.end());
  return x.tape->record(std::move(out), {x}, [x, par = std::move(par)](Tape& t, const Matrix& g) {
    Matrix* dx = t.grad_buffer(x.id);
    for (std::size_t f = 0; f < par.size(); ++f) dx->row(par[f]) += g.row(static_cast<int>(f));
  });
}

Var upsample_bilinear(Var x, std::span<const std::array<int, 3>> source,
                      std::span<const std::array<double, 3>> weight) {
  require(source.size() == weight.size(), "bilinear stencil size mismatch");
  const int rows = static_cast<int>(source.size());
  Matrix out = Matrix::Zero(rows, x.cols());
  for (int f = 0; f < rows; ++f) {
    for (int k = 0; k < 3; ++k) {
      if (source[f][k] >= 0 && weight[f][k] != 0) out.row(f) += weight[f][k] * x.value().row(source[f][k]);
    }
  }
  std::vector<std::array<int, 3>> src(source.begin(), source.end());
  std::vector<std::array<double, 3>> wt(weight.begin(), weight.end());
  return x.tape->record(std::move(out), {x}, [x, src = std::move(src), wt = std::move(wt)](Tape& t, const Matrix& g) {
    Matrix* dx = t.grad_buffer(x.id);
    for (std::size_t f = 0; f < src.size(); ++f) {
      for (int k = 0; k < 3; ++k) {
        if (src[f][k] >= 0 && wt[f][k] != 0) dx->row(src[f][k]) += wt[f][k] * g.row(static_cast<int>(f));
      }
    }
  });
}

Var segment_mean(Var x, std::span<const int> offsets) {
  require(offsets.size() >= 2 && offsets.back() == x.rows(), "segment offsets do not cover the tensor");
  const int segs = static_cast<int>(offsets.size()) - 1;
  Matrix out(segs, x.cols());
  for (int s = 0; s < segs; ++s) {
    const int lo = offsets[s], n = offsets[s + 1] - lo;
    require(n > 0, "empty segment");
    out.row(s) = x.value().middleRows(lo, n).colwise().sum() / static_cast<double>(n);
  }
  std::vector<int> off(offsets.begin(), offsets.end());
  return x.tape->record(std::move(out), {x}, [x, off = std::move(off)](Tape& t, const Matrix& g) {
    Matrix* dx = t.grad_buffer(x.id);
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      const int n = off[s + 1] - off[s];
      dx->middleRows(off[s], n).rowwise() += g.row(static_cast<int>(s)) / static_cast<double>(n);
    }
  });
}

Matrix softmax(const Matrix& logits) {
  Matrix p = logits.colwise() - logits.rowwise().maxCoeff();
  p = p.array().exp();
  p = p.array().colwise() / p.rowwise().sum().array();
  return p;
}

std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(m.rows());
  for (int r = 0; r < m.rows(); ++r) m.row(r).maxCoeff(&out[r]);
  return out;
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  require(static_cast<int>(labels.size()) == logits.rows(), "label count does not match logits");
  const int k = logits.cols();
  auto p = std::make_shared<Matrix>(softmax(logits.value()));
  double loss = 0;
  int counted = 0;
  for (int r = 0; r < logits.rows(); ++r) {
    if (labels[r] < 0) continue;
    if (labels[r] >= k) throw ShapeError("label " + std::to_string(labels[r]) + " out of range");
    loss -= std::log(std::max((*p)(r, labels[r]), 1e-300));
    ++counted;
  }
  if (counted == 0) throw Error("no labeled rows for the loss");
  Matrix out(1, 1);
  out(0, 0) = loss / counted;
  std::vector<int> lab(labels.begin(), labels.end());
  return logits.tape->record(std::move(out), {logits}, [logits, p, lab = std::move(lab), counted](Tape& t, const Matrix& g) {
    Matrix d = *p;
    for (std::size_t r = 0; r < lab.size(); ++r) {
      if (lab[r] < 0) {
        d.row(static_cast<int>(r)).setZero();
      } else {
        d(static_cast<int>(r), lab[r]) -= 1.0;
      }
    }
    t.accumulate(logits.id, d * (g(0, 0) / counted));
  });
}

}  // namespace subdivnet::nn
