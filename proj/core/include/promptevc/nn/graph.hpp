#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "promptevc/common.hpp"
#include "promptevc/rng.hpp"

namespace promptevc::nn {

// Handle into a Graph's tape.
struct Var {
  int idx = -1;
  bool valid() const { return idx >= 0; }
};

// Eager tape-based reverse-mode autodiff over Eigen matrices. Every op
// computes its value immediately and records a closure that scatters
// gradients to its inputs. One Graph per training step; parameters enter
// as leaves with an external gradient sink.
//
// Matrix layout convention throughout: rows = channels/features,
// columns = time steps (or batch elements for vectors).
class Graph {
 public:
  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // --- leaves ---
  Var constant(Mat v);
  Var leaf(const Mat& v, Mat* grad_sink);
  Var stop_gradient(Var v) { return constant(value(v)); }

  const Mat& value(Var v) const;
  // Zero matrix if no gradient reached the node.
  Mat grad(Var v) const;

  // --- linear algebra ---
  Var matmul(Var a, Var b, bool trans_a = false, bool trans_b = false);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var hadamard(Var a, Var b);
  Var cdiv(Var a, Var b);
  Var scale(Var a, double s);
  Var add_scalar(Var a, double s);
  Var add_colvec(Var a, Var col);   // col is n x 1, broadcast over columns
  Var mul_colvec(Var a, Var col);
  Var tile_cols(Var col, int t);    // n x 1 -> n x t

  // --- elementwise ---
  Var tanh_(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var lrelu(Var a, double alpha = 0.1);
  Var gelu(Var a);
  Var exp_(Var a);
  Var log_(Var a);
  Var sqrt_(Var a);
  Var square(Var a);
  Var abs_(Var a);
  Var logcosh(Var a);  // log(cosh(x)), overflow-safe
  Var clamp(Var a, double lo, double hi);

  // --- reductions ---
  Var sum_all(Var a);    // 1 x 1
  Var mean_all(Var a);   // 1 x 1
  Var sum_cols(Var a);   // n x 1, summed over time
  Var mean_cols(Var a);  // n x 1
  Var sum_rows(Var a);   // 1 x t

  // --- shape ---
  Var transpose(Var a);
  Var block(Var a, int r, int c, int nr, int nc);
  Var rows(Var a, int r, int nr) { return block(a, r, 0, nr, cols_of(a)); }
  Var cols(Var a, int c, int nc) { return block(a, 0, c, rows_of(a), nc); }
  Var concat_rows(const std::vector<Var>& parts);
  Var concat_cols(const std::vector<Var>& parts);
  Var fold_row(Var a, int rows);  // 1 x n -> rows x n/rows, column-major fill
  Var gather_cols(Var a, const std::vector<int>& idx);
  Var repeat_cols(Var a, const std::vector<int>& counts);
  Var pad_reflect_cols(Var a, int pad);

  // --- normalization / attention ---
  Var softmax_cols(Var a);
  Var layernorm_cols(Var a, double eps = 1e-5);

  // --- convolution machinery ---
  // (c*k + j)-row unfold; conv1d(x, W) == matmul(W, unfold(x, ...)).
  Var unfold(Var a, int k, int stride, int pad, int dilation = 1);
  // Inverse scatter for transposed convolution; input rows = channels*k.
  Var col2im(Var a, int k, int stride, int pad, int out_len);
  Var avg_pool1d(Var a, int k, int stride, int pad = 0);

  // --- regularization ---
  Var dropout(Var a, double rate, RngStream& rng);

  // --- composite helpers ---
  Var mse(Var a, Var b) { return mean_all(square(sub(a, b))); }
  Var l1(Var a, Var b) { return mean_all(abs_(sub(a, b))); }
  Var norm2(Var a) { return sqrt_(add_scalar(sum_all(square(a)), 1e-12)); }

  void backward(Var loss);

  int rows_of(Var v) const { return static_cast<int>(value(v).rows()); }
  int cols_of(Var v) const { return static_cast<int>(value(v).cols()); }
  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    Mat* grad_sink = nullptr;
    std::function<void()> backprop;
  };

  Var push(Mat value, bool needs_grad, std::function<void()> backprop = {});
  void accum(int idx, const Mat& delta);
  bool ng(Var v) const { return nodes_[static_cast<size_t>(v.idx)].needs_grad; }
  const Mat& val(int idx) const { return nodes_[static_cast<size_t>(idx)].value; }
  const Mat& gr(int idx) const { return nodes_[static_cast<size_t>(idx)].grad; }
  Var elementwise(Var a, std::function<Mat(const Mat&)> fwd,
                  std::function<Mat(const Mat&, const Mat&, const Mat&)> dfn);

  std::deque<Node> nodes_;
};

int conv_out_len(int t, int k, int stride, int pad, int dilation = 1);
int conv_transpose_out_len(int t, int k, int stride, int pad);

}  // namespace promptevc::nn
