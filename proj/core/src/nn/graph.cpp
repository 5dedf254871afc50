#include "promptevc/nn/graph.hpp"

#include <cmath>

namespace promptevc::nn {
namespace {
constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluA = 0.044715;
}  // namespace

int conv_out_len(int t, int k, int stride, int pad, int dilation) {
  int span = dilation * (k - 1) + 1;
  int n = t + 2 * pad - span;
  require(n >= 0, "conv: input too short for kernel");
  return n / stride + 1;
}

int conv_transpose_out_len(int t, int k, int stride, int pad) {
  int n = (t - 1) * stride + k - 2 * pad;
  require(n > 0, "conv_transpose: degenerate output length");
  return n;
}

Var Graph::push(Mat value, bool needs_grad, std::function<void()> backprop) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Graph::accum(int idx, const Mat& delta) {
  Node& n = nodes_[static_cast<size_t>(idx)];
  if (!n.needs_grad) return;
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  n.grad += delta;
}

Var Graph::constant(Mat v) { return push(std::move(v), false); }

Var Graph::leaf(const Mat& v, Mat* grad_sink) {
  Var out = push(v, true);
  nodes_.back().grad_sink = grad_sink;
  return out;
}

const Mat& Graph::value(Var v) const {
  require(v.valid() && v.idx < static_cast<int>(nodes_.size()), "invalid Var");
  return nodes_[static_cast<size_t>(v.idx)].value;
}

Mat Graph::grad(Var v) const {
  const Node& n = nodes_[static_cast<size_t>(v.idx)];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Graph::backward(Var loss) {
  require(loss.valid(), "backward: invalid loss");
  Node& top = nodes_[static_cast<size_t>(loss.idx)];
  require(top.value.rows() == 1 && top.value.cols() == 1,
          "backward: loss must be scalar");
  require(top.needs_grad, "backward: loss does not depend on any parameter");
  if (top.grad.size() == 0) top.grad = Mat::Zero(1, 1);
  top.grad(0, 0) += 1.0;
  for (int i = loss.idx; i >= 0; --i) {
    Node& n = nodes_[static_cast<size_t>(i)];
    if (n.grad.size() == 0) continue;
    if (n.backprop) n.backprop();
    if (n.grad_sink) {
      if (n.grad_sink->size() == 0)
        *n.grad_sink = Mat::Zero(n.value.rows(), n.value.cols());
      *n.grad_sink += n.grad;
    }
  }
}

// --- linear algebra ---

Var Graph::matmul(Var a, Var b, bool ta, bool tb) {
  const Mat& A = value(a);
  const Mat& B = value(b);
  auto opA = [&]() { return ta ? A.transpose() : A; };
  auto opB = [&]() { return tb ? B.transpose() : B; };
  require(opA().cols() == opB().rows(), "matmul: inner dimensions disagree");
  Mat v = opA() * opB();
  bool g = ng(a) || ng(b);
  Var out = push(std::move(v), g);
  if (!g) return out;
  int ai = a.idx, bi = b.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, bi, oi, ta, tb] {
    const Mat& dC = gr(oi);
    const Mat& A = val(ai);
    const Mat& B = val(bi);
    if (nodes_[static_cast<size_t>(ai)].needs_grad) {
      Mat dA;
      if (!ta && !tb) dA = dC * B.transpose();
      else if (ta && !tb) dA = B * dC.transpose();
      else if (!ta && tb) dA = dC * B;
      else dA = B.transpose() * dC.transpose();
      accum(ai, dA);
    }
    if (nodes_[static_cast<size_t>(bi)].needs_grad) {
      Mat dB;
      if (!ta && !tb) dB = A.transpose() * dC;
      else if (ta && !tb) dB = A * dC;
      else if (!ta && tb) dB = dC.transpose() * A;
      else dB = dC.transpose() * A.transpose();
      accum(bi, dB);
    }
  };
  return out;
}

Var Graph::add(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
          "add: shape mismatch");
  bool g = ng(a) || ng(b);
  Var out = push(value(a) + value(b), g);
  if (!g) return out;
  int ai = a.idx, bi = b.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, bi, oi] {
    accum(ai, gr(oi));
    accum(bi, gr(oi));
  };
  return out;
}

Var Graph::sub(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
          "sub: shape mismatch");
  bool g = ng(a) || ng(b);
  Var out = push(value(a) - value(b), g);
  if (!g) return out;
  int ai = a.idx, bi = b.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, bi, oi] {
    accum(ai, gr(oi));
    accum(bi, Mat(-gr(oi)));
  };
  return out;
}

Var Graph::hadamard(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
          "hadamard: shape mismatch");
  bool g = ng(a) || ng(b);
  Var out = push(value(a).cwiseProduct(value(b)), g);
  if (!g) return out;
  int ai = a.idx, bi = b.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, bi, oi] {
    accum(ai, gr(oi).cwiseProduct(val(bi)));
    accum(bi, gr(oi).cwiseProduct(val(ai)));
  };
  return out;
}

Var Graph::cdiv(Var a, Var b) {
  require(value(a).rows() == value(b).rows() && value(a).cols() == value(b).cols(),
          "cdiv: shape mismatch");
  bool g = ng(a) || ng(b);
  Var out = push(value(a).cwiseQuotient(value(b)), g);
  if (!g) return out;
  int ai = a.idx, bi = b.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, bi, oi] {
    accum(ai, gr(oi).cwiseQuotient(val(bi)));
    Mat db = -gr(oi).cwiseProduct(val(ai)).cwiseQuotient(val(bi).cwiseProduct(val(bi)));
    accum(bi, db);
  };
  return out;
}

Var Graph::scale(Var a, double s) {
  Var out = push(value(a) * s, ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, s] { accum(ai, Mat(gr(oi) * s)); };
  return out;
}

Var Graph::add_scalar(Var a, double s) {
  Var out = push((value(a).array() + s).matrix(), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi] { accum(ai, gr(oi)); };
  return out;
}

Var Graph::add_colvec(Var a, Var col) {
  require(value(col).cols() == 1 && value(col).rows() == value(a).rows(),
          "add_colvec: bias must be n x 1 matching rows");
  bool g = ng(a) || ng(col);
  Var out = push(value(a).colwise() + Vec(value(col).col(0)), g);
  if (!g) return out;
  int ai = a.idx, ci = col.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, ci, oi] {
    accum(ai, gr(oi));
    accum(ci, Mat(gr(oi).rowwise().sum()));
  };
  return out;
}

Var Graph::mul_colvec(Var a, Var col) {
  require(value(col).cols() == 1 && value(col).rows() == value(a).rows(),
          "mul_colvec: scale must be n x 1 matching rows");
  bool g = ng(a) || ng(col);
  Mat v = value(a).array().colwise() * value(col).col(0).array();
  Var out = push(std::move(v), g);
  if (!g) return out;
  int ai = a.idx, ci = col.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, ci, oi] {
    accum(ai, Mat(gr(oi).array().colwise() * val(ci).col(0).array()));
    accum(ci, Mat(gr(oi).cwiseProduct(val(ai)).rowwise().sum()));
  };
  return out;
}

Var Graph::tile_cols(Var col, int t) {
  require(value(col).cols() == 1, "tile_cols: input must be n x 1");
  Var out = push(value(col).replicate(1, t), ng(col));
  if (!ng(col)) return out;
  int ci = col.idx, oi = out.idx;
  nodes_.back().backprop = [this, ci, oi] {
    accum(ci, Mat(gr(oi).rowwise().sum()));
  };
  return out;
}

// --- elementwise ---

Var Graph::elementwise(Var a, std::function<Mat(const Mat&)> fwd,
                       std::function<Mat(const Mat&, const Mat&, const Mat&)> dfn) {
  Var out = push(fwd(value(a)), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, dfn] {
    accum(ai, dfn(val(ai), val(oi), gr(oi)));
  };
  return out;
}

Var Graph::tanh_(Var a) {
  return elementwise(
      a, [](const Mat& x) { return Mat(x.array().tanh()); },
      [](const Mat&, const Mat& y, const Mat& d) {
        return Mat(d.array() * (1.0 - y.array().square()));
      });
}

Var Graph::sigmoid(Var a) {
  return elementwise(
      a,
      [](const Mat& x) { return Mat(1.0 / (1.0 + (-x.array()).exp())); },
      [](const Mat&, const Mat& y, const Mat& d) {
        return Mat(d.array() * y.array() * (1.0 - y.array()));
      });
}

Var Graph::relu(Var a) {
  return elementwise(
      a, [](const Mat& x) { return Mat(x.array().max(0.0)); },
      [](const Mat& x, const Mat&, const Mat& d) {
        return Mat(d.array() * (x.array() > 0.0).cast<double>());
      });
}

Var Graph::lrelu(Var a, double alpha) {
  return elementwise(
      a,
      [alpha](const Mat& x) {
        return Mat((x.array() > 0.0).select(x.array(), x.array() * alpha));
      },
      [alpha](const Mat& x, const Mat&, const Mat& d) {
        return Mat(d.array() * (x.array() > 0.0).select(
                                   Eigen::ArrayXXd::Ones(x.rows(), x.cols()),
                                   Eigen::ArrayXXd::Constant(x.rows(), x.cols(), alpha)));
      });
}

Var Graph::gelu(Var a) {
  return elementwise(
      a,
      [](const Mat& x) {
        auto u = kGeluC * (x.array() + kGeluA * x.array().cube());
        return Mat(0.5 * x.array() * (1.0 + u.tanh()));
      },
      [](const Mat& x, const Mat&, const Mat& d) {
        auto u = kGeluC * (x.array() + kGeluA * x.array().cube());
        auto t = u.tanh();
        auto du = kGeluC * (1.0 + 3.0 * kGeluA * x.array().square());
        auto g = 0.5 * (1.0 + t) + 0.5 * x.array() * (1.0 - t.square()) * du;
        return Mat(d.array() * g);
      });
}

Var Graph::exp_(Var a) {
  return elementwise(
      a, [](const Mat& x) { return Mat(x.array().exp()); },
      [](const Mat&, const Mat& y, const Mat& d) {
        return Mat(d.array() * y.array());
      });
}

Var Graph::log_(Var a) {
  return elementwise(
      a, [](const Mat& x) { return Mat(x.array().log()); },
      [](const Mat& x, const Mat&, const Mat& d) {
        return Mat(d.array() / x.array());
      });
}

Var Graph::sqrt_(Var a) {
  return elementwise(
      a, [](const Mat& x) { return Mat(x.array().sqrt()); },
      [](const Mat&, const Mat& y, const Mat& d) {
        return Mat(d.array() * 0.5 / y.array().max(1e-300));
      });
}

Var Graph::square(Var a) {
  return elementwise(
      a, [](const Mat& x) { return Mat(x.array().square()); },
      [](const Mat& x, const Mat&, const Mat& d) {
        return Mat(d.array() * 2.0 * x.array());
      });
}

Var Graph::abs_(Var a) {
  return elementwise(
      a, [](const Mat& x) { return Mat(x.array().abs()); },
      [](const Mat& x, const Mat&, const Mat& d) {
        return Mat(d.array() * x.array().sign());
      });
}

Var Graph::logcosh(Var a) {
  // |x| + log1p(exp(-2|x|)) - log 2 avoids overflow for large |x|.
  return elementwise(
      a,
      [](const Mat& x) {
        auto ax = x.array().abs();
        return Mat(ax + (1.0 + (-2.0 * ax).exp()).log() - std::log(2.0));
      },
      [](const Mat& x, const Mat&, const Mat& d) {
        return Mat(d.array() * x.array().tanh());
      });
}

Var Graph::clamp(Var a, double lo, double hi) {
  return elementwise(
      a,
      [lo, hi](const Mat& x) { return Mat(x.array().max(lo).min(hi)); },
      [lo, hi](const Mat& x, const Mat&, const Mat& d) {
        auto pass = (x.array() > lo && x.array() < hi).cast<double>();
        return Mat(d.array() * pass);
      });
}

// --- reductions ---

Var Graph::sum_all(Var a) {
  Mat v(1, 1);
  v(0, 0) = value(a).sum();
  Var out = push(std::move(v), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi] {
    const Mat& x = val(ai);
    accum(ai, Mat(Mat::Constant(x.rows(), x.cols(), gr(oi)(0, 0))));
  };
  return out;
}

Var Graph::mean_all(Var a) {
  double n = static_cast<double>(value(a).size());
  require(n > 0, "mean_all: empty matrix");
  Mat v(1, 1);
  v(0, 0) = value(a).sum() / n;
  Var out = push(std::move(v), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, n] {
    const Mat& x = val(ai);
    accum(ai, Mat(Mat::Constant(x.rows(), x.cols(), gr(oi)(0, 0) / n)));
  };
  return out;
}

Var Graph::sum_cols(Var a) {
  Var out = push(value(a).rowwise().sum(), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi] {
    accum(ai, Mat(gr(oi).replicate(1, val(ai).cols())));
  };
  return out;
}

Var Graph::mean_cols(Var a) {
  double t = static_cast<double>(value(a).cols());
  require(t > 0, "mean_cols: empty matrix");
  Var out = push(value(a).rowwise().mean(), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, t] {
    accum(ai, Mat(gr(oi).replicate(1, val(ai).cols()) / t));
  };
  return out;
}

Var Graph::sum_rows(Var a) {
  Var out = push(value(a).colwise().sum(), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi] {
    accum(ai, Mat(gr(oi).replicate(val(ai).rows(), 1)));
  };
  return out;
}

// --- shape ---

Var Graph::transpose(Var a) {
  Var out = push(value(a).transpose(), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi] {
    accum(ai, Mat(gr(oi).transpose()));
  };
  return out;
}

Var Graph::block(Var a, int r, int c, int nr, int nc) {
  require(r >= 0 && c >= 0 && r + nr <= value(a).rows() && c + nc <= value(a).cols(),
          "block: out of range");
  Var out = push(value(a).block(r, c, nr, nc), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, r, c, nr, nc] {
    Mat d = Mat::Zero(val(ai).rows(), val(ai).cols());
    d.block(r, c, nr, nc) = gr(oi);
    accum(ai, d);
  };
  return out;
}

Var Graph::concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: empty");
  int cols = cols_of(parts[0]);
  int total = 0;
  bool g = false;
  for (Var p : parts) {
    require(cols_of(p) == cols, "concat_rows: column mismatch");
    total += rows_of(p);
    g = g || ng(p);
  }
  Mat v(total, cols);
  int r = 0;
  for (Var p : parts) {
    v.middleRows(r, rows_of(p)) = value(p);
    r += rows_of(p);
  }
  Var out = push(std::move(v), g);
  if (!g) return out;
  std::vector<int> idxs;
  std::vector<int> sizes;
  for (Var p : parts) {
    idxs.push_back(p.idx);
    sizes.push_back(rows_of(p));
  }
  int oi = out.idx;
  nodes_.back().backprop = [this, idxs, sizes, oi] {
    int r = 0;
    for (size_t i = 0; i < idxs.size(); ++i) {
      accum(idxs[i], Mat(gr(oi).middleRows(r, sizes[i])));
      r += sizes[i];
    }
  };
  return out;
}

Var Graph::concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: empty");
  int rows = rows_of(parts[0]);
  int total = 0;
  bool g = false;
  for (Var p : parts) {
    require(rows_of(p) == rows, "concat_cols: row mismatch");
    total += cols_of(p);
    g = g || ng(p);
  }
  Mat v(rows, total);
  int c = 0;
  for (Var p : parts) {
    v.middleCols(c, cols_of(p)) = value(p);
    c += cols_of(p);
  }
  Var out = push(std::move(v), g);
  if (!g) return out;
  std::vector<int> idxs;
  std::vector<int> sizes;
  for (Var p : parts) {
    idxs.push_back(p.idx);
    sizes.push_back(cols_of(p));
  }
  int oi = out.idx;
  nodes_.back().backprop = [this, idxs, sizes, oi] {
    int c = 0;
    for (size_t i = 0; i < idxs.size(); ++i) {
      accum(idxs[i], Mat(gr(oi).middleCols(c, sizes[i])));
      c += sizes[i];
    }
  };
  return out;
}

Var Graph::fold_row(Var a, int rows) {
  require(value(a).rows() == 1, "fold_row: input must be a row vector");
  int n = cols_of(a);
  require(n % rows == 0, "fold_row: length not divisible by rows");
  int cols = n / rows;
  Mat v(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) v(i, j) = value(a)(0, j * rows + i);
  Var out = push(std::move(v), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, rows, cols] {
    Mat d(1, rows * cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) d(0, j * rows + i) = gr(oi)(i, j);
    accum(ai, d);
  };
  return out;
}

Var Graph::gather_cols(Var a, const std::vector<int>& idx) {
  const Mat& x = value(a);
  Mat v(x.rows(), static_cast<int>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < x.cols(), "gather_cols: index out of range");
    v.col(static_cast<int>(i)) = x.col(idx[i]);
  }
  Var out = push(std::move(v), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, idx] {
    Mat d = Mat::Zero(val(ai).rows(), val(ai).cols());
    for (size_t i = 0; i < idx.size(); ++i)
      d.col(idx[i]) += gr(oi).col(static_cast<int>(i));
    accum(ai, d);
  };
  return out;
}

Var Graph::repeat_cols(Var a, const std::vector<int>& counts) {
  require(static_cast<int>(counts.size()) == cols_of(a),
          "repeat_cols: one count per column");
  int total = 0;
  for (int c : counts) {
    require(c >= 0, "repeat_cols: negative count");
    total += c;
  }
  require(total > 0, "repeat_cols: expansion collapsed to zero length");
  Mat v(rows_of(a), total);
  int w = 0;
  for (int j = 0; j < cols_of(a); ++j)
    for (int r = 0; r < counts[static_cast<size_t>(j)]; ++r)
      v.col(w++) = value(a).col(j);
  Var out = push(std::move(v), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, counts] {
    Mat d = Mat::Zero(val(ai).rows(), val(ai).cols());
    int w = 0;
    for (int j = 0; j < d.cols(); ++j)
      for (int r = 0; r < counts[static_cast<size_t>(j)]; ++r)
        d.col(j) += gr(oi).col(w++);
    accum(ai, d);
  };
  return out;
}

Var Graph::pad_reflect_cols(Var a, int pad) {
  int t = cols_of(a);
  require(pad < t, "pad_reflect_cols: pad exceeds length");
  Mat v(rows_of(a), t + 2 * pad);
  for (int i = 0; i < pad; ++i) v.col(i) = value(a).col(pad - i);
  v.middleCols(pad, t) = value(a);
  for (int i = 0; i < pad; ++i) v.col(pad + t + i) = value(a).col(t - 2 - i);
  Var out = push(std::move(v), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, pad, t] {
    Mat d = Mat::Zero(val(ai).rows(), t);
    const Mat& g = gr(oi);
    for (int i = 0; i < pad; ++i) d.col(pad - i) += g.col(i);
    d += g.middleCols(pad, t);
    for (int i = 0; i < pad; ++i) d.col(t - 2 - i) += g.col(pad + t + i);
    accum(ai, d);
  };
  return out;
}

// --- normalization / attention ---

Var Graph::softmax_cols(Var a) {
  const Mat& x = value(a);
  Mat y(x.rows(), x.cols());
  for (int j = 0; j < x.cols(); ++j) {
    Vec col = x.col(j);
    double m = col.maxCoeff();
    Vec e = (col.array() - m).exp();
    y.col(j) = e / e.sum();
  }
  Var out = push(std::move(y), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi] {
    const Mat& y = val(oi);
    const Mat& dY = gr(oi);
    Eigen::RowVectorXd s = (y.array() * dY.array()).colwise().sum();
    Mat dX = y.array() * (dY.array().rowwise() - s.array());
    accum(ai, dX);
  };
  return out;
}

Var Graph::layernorm_cols(Var a, double eps) {
  const Mat& x = value(a);
  int n = static_cast<int>(x.rows());
  require(n > 1, "layernorm_cols: needs more than one row");
  Eigen::RowVectorXd mu = x.colwise().mean();
  Mat centered = x.rowwise() - mu;
  Eigen::RowVectorXd var = centered.array().square().colwise().mean();
  Eigen::RowVectorXd inv_std = (var.array() + eps).rsqrt();
  Mat y = centered.array().rowwise() * inv_std.array();
  Var out = push(std::move(y), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  // Capture inv_std; y is recoverable from the output node.
  Eigen::RowVectorXd istd = inv_std;
  nodes_.back().backprop = [this, ai, oi, istd] {
    const Mat& y = val(oi);
    const Mat& dY = gr(oi);
    Eigen::RowVectorXd mean_dy = dY.colwise().mean();
    Eigen::RowVectorXd mean_dyy = (dY.array() * y.array()).colwise().mean();
    Mat dX = ((dY.array().rowwise() - mean_dy.array()) -
              y.array().rowwise() * mean_dyy.array())
                 .rowwise() *
             istd.array();
    accum(ai, dX);
  };
  return out;
}

// --- convolution machinery ---

Var Graph::unfold(Var a, int k, int stride, int pad, int dilation) {
  const Mat& x = value(a);
  int ch = static_cast<int>(x.rows());
  int t = static_cast<int>(x.cols());
  int to = conv_out_len(t, k, stride, pad, dilation);
  Mat u = Mat::Zero(ch * k, to);
  for (int o = 0; o < to; ++o) {
    for (int j = 0; j < k; ++j) {
      int src = o * stride + j * dilation - pad;
      if (src < 0 || src >= t) continue;
      for (int c = 0; c < ch; ++c) u(c * k + j, o) = x(c, src);
    }
  }
  Var out = push(std::move(u), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, k, stride, pad, dilation, ch, t, to] {
    const Mat& dU = gr(oi);
    Mat d = Mat::Zero(ch, t);
    for (int o = 0; o < to; ++o) {
      for (int j = 0; j < k; ++j) {
        int src = o * stride + j * dilation - pad;
        if (src < 0 || src >= t) continue;
        for (int c = 0; c < ch; ++c) d(c, src) += dU(c * k + j, o);
      }
    }
    accum(ai, d);
  };
  return out;
}

Var Graph::col2im(Var a, int k, int stride, int pad, int out_len) {
  const Mat& g = value(a);
  require(g.rows() % k == 0, "col2im: rows not divisible by kernel size");
  int ch = static_cast<int>(g.rows()) / k;
  int t = static_cast<int>(g.cols());
  Mat y = Mat::Zero(ch, out_len);
  for (int j = 0; j < t; ++j) {
    for (int q = 0; q < k; ++q) {
      int dst = j * stride + q - pad;
      if (dst < 0 || dst >= out_len) continue;
      for (int c = 0; c < ch; ++c) y(c, dst) += g(c * k + q, j);
    }
  }
  Var out = push(std::move(y), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, k, stride, pad, out_len, ch, t] {
    const Mat& dY = gr(oi);
    Mat d = Mat::Zero(ch * k, t);
    for (int j = 0; j < t; ++j) {
      for (int q = 0; q < k; ++q) {
        int dst = j * stride + q - pad;
        if (dst < 0 || dst >= out_len) continue;
        for (int c = 0; c < ch; ++c) d(c * k + q, j) = dY(c, dst);
      }
    }
    accum(ai, d);
  };
  return out;
}

Var Graph::avg_pool1d(Var a, int k, int stride, int pad) {
  const Mat& x = value(a);
  int ch = static_cast<int>(x.rows());
  int t = static_cast<int>(x.cols());
  int to = conv_out_len(t, k, stride, pad);
  Mat y = Mat::Zero(ch, to);
  for (int o = 0; o < to; ++o)
    for (int j = 0; j < k; ++j) {
      int src = o * stride + j - pad;
      if (src < 0 || src >= t) continue;
      y.col(o) += x.col(src);
    }
  y /= static_cast<double>(k);
  Var out = push(std::move(y), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, k, stride, pad, t, to] {
    const Mat& dY = gr(oi);
    Mat d = Mat::Zero(val(ai).rows(), t);
    for (int o = 0; o < to; ++o)
      for (int j = 0; j < k; ++j) {
        int src = o * stride + j - pad;
        if (src < 0 || src >= t) continue;
        d.col(src) += dY.col(o) / static_cast<double>(k);
      }
    accum(ai, d);
  };
  return out;
}

// --- regularization ---

Var Graph::dropout(Var a, double rate, RngStream& rng) {
  if (rate <= 0.0) return a;
  require(rate < 1.0, "dropout: rate must be < 1");
  const Mat& x = value(a);
  Mat mask(x.rows(), x.cols());
  double keep = 1.0 - rate;
  for (int j = 0; j < x.cols(); ++j)
    for (int i = 0; i < x.rows(); ++i)
      mask(i, j) = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  Var out = push(x.cwiseProduct(mask), ng(a));
  if (!ng(a)) return out;
  int ai = a.idx, oi = out.idx;
  nodes_.back().backprop = [this, ai, oi, mask] {
    accum(ai, Mat(gr(oi).cwiseProduct(mask)));
  };
  return out;
}

}  // namespace promptevc::nn
