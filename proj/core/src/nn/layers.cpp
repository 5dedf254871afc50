#include "promptevc/nn/layers.hpp"

#include <cmath>

namespace promptevc::nn {

Mat& ensure_param(ParamStore& ps, const std::string& name, int rows, int cols,
                  double stddev) {
  if (ps.has(name)) {
    Mat& m = ps.value(name);
    require(m.rows() == rows && m.cols() == cols,
            "parameter shape mismatch for " + name);
    return m;
  }
  return ps.create(name, rows, cols, stddev);
}

Mat& ensure_const_param(ParamStore& ps, const std::string& name, int rows,
                        int cols, double fill) {
  if (ps.has(name)) {
    Mat& m = ps.value(name);
    require(m.rows() == rows && m.cols() == cols,
            "parameter shape mismatch for " + name);
    return m;
  }
  return ps.create_const(name, rows, cols, fill);
}

// --- Linear ---

Linear::Linear(ParamStore& ps, std::string name, int in, int out, bool bias,
               double gain)
    : ps_(&ps), name_(std::move(name)), bias_(bias) {
  ensure_param(ps, name_ + ".w", out, in, gain / std::sqrt(static_cast<double>(in)));
  if (bias_) ensure_param(ps, name_ + ".b", out, 1, 0.0);
}

Var Linear::apply(Graph& g, Var x) const {
  Var y = g.matmul(ps_->use(g, name_ + ".w"), x);
  if (bias_) y = g.add_colvec(y, ps_->use(g, name_ + ".b"));
  return y;
}

// --- Conv1d ---

Conv1d::Conv1d(ParamStore& ps, std::string name, int in, int out, int k,
               int stride, int pad, int dilation, bool bias, double gain)
    : ps_(&ps),
      name_(std::move(name)),
      k_(k),
      stride_(stride),
      pad_(pad < 0 ? dilation * (k - 1) / 2 : pad),
      dilation_(dilation),
      bias_(bias) {
  double stddev = gain / std::sqrt(static_cast<double>(in * k));
  ensure_param(ps, name_ + ".w", out, in * k, stddev);
  if (bias_) ensure_param(ps, name_ + ".b", out, 1, 0.0);
}

Conv1d Conv1d::zero_init(ParamStore& ps, std::string name, int in, int out,
                         int k, int stride, int pad, int dilation) {
  Conv1d c;
  c.ps_ = &ps;
  c.name_ = std::move(name);
  c.k_ = k;
  c.stride_ = stride;
  c.pad_ = pad < 0 ? dilation * (k - 1) / 2 : pad;
  c.dilation_ = dilation;
  c.bias_ = true;
  ensure_param(ps, c.name_ + ".w", out, in * k, 0.0);
  ensure_param(ps, c.name_ + ".b", out, 1, 0.0);
  return c;
}

Var Conv1d::apply(Graph& g, Var x) const {
  Var cols = g.unfold(x, k_, stride_, pad_, dilation_);
  Var y = g.matmul(ps_->use(g, name_ + ".w"), cols);
  if (bias_) y = g.add_colvec(y, ps_->use(g, name_ + ".b"));
  return y;
}

// --- ConvTranspose1d ---

ConvTranspose1d::ConvTranspose1d(ParamStore& ps, std::string name, int in,
                                 int out, int k, int stride, int pad, bool bias)
    : ps_(&ps),
      name_(std::move(name)),
      k_(k),
      stride_(stride),
      pad_(pad < 0 ? (k - stride) / 2 : pad),
      bias_(bias) {
  double stddev = 1.0 / std::sqrt(static_cast<double>(in * k));
  ensure_param(ps, name_ + ".w", out * k, in, stddev);
  if (bias_) ensure_param(ps, name_ + ".b", out, 1, 0.0);
}

Var ConvTranspose1d::apply(Graph& g, Var x) const {
  Var gemm = g.matmul(ps_->use(g, name_ + ".w"), x);
  Var y = g.col2im(gemm, k_, stride_, pad_, out_len(g.cols_of(x)));
  if (bias_) y = g.add_colvec(y, ps_->use(g, name_ + ".b"));
  return y;
}

// --- LayerNorm ---

LayerNorm::LayerNorm(ParamStore& ps, std::string name, int dim)
    : ps_(&ps), name_(std::move(name)) {
  ensure_const_param(ps, name_ + ".g", dim, 1, 1.0);
  ensure_param(ps, name_ + ".b", dim, 1, 0.0);
}

Var LayerNorm::apply(Graph& g, Var x) const {
  Var y = g.layernorm_cols(x);
  y = g.mul_colvec(y, ps_->use(g, name_ + ".g"));
  return g.add_colvec(y, ps_->use(g, name_ + ".b"));
}

// --- MultiHeadAttention ---

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, std::string name,
                                       int dim, int heads)
    : ps_(&ps), name_(std::move(name)), dim_(dim), heads_(heads) {
  require(dim % heads == 0, "attention dim must divide by heads");
  double s = 1.0 / std::sqrt(static_cast<double>(dim));
  ensure_param(ps, name_ + ".wq", dim, dim, s);
  ensure_param(ps, name_ + ".wk", dim, dim, s);
  ensure_param(ps, name_ + ".wv", dim, dim, s);
  ensure_param(ps, name_ + ".wo", dim, dim, s);
  ensure_param(ps, name_ + ".bo", dim, 1, 0.0);
}

Var MultiHeadAttention::apply(Graph& g, Var x) const {
  int dh = dim_ / heads_;
  Var q = g.matmul(ps_->use(g, name_ + ".wq"), x);
  Var k = g.matmul(ps_->use(g, name_ + ".wk"), x);
  Var v = g.matmul(ps_->use(g, name_ + ".wv"), x);
  std::vector<Var> heads;
  heads.reserve(static_cast<size_t>(heads_));
  double inv = 1.0 / std::sqrt(static_cast<double>(dh));
  for (int h = 0; h < heads_; ++h) {
    Var qh = g.rows(q, h * dh, dh);
    Var kh = g.rows(k, h * dh, dh);
    Var vh = g.rows(v, h * dh, dh);
    // scores(i, j) = <key_i, query_j>; softmax over keys per query column.
    Var scores = g.scale(g.matmul(kh, qh, true, false), inv);
    Var attn = g.softmax_cols(scores);
    heads.push_back(g.matmul(vh, attn));
  }
  Var cat = heads.size() == 1 ? heads[0] : g.concat_rows(heads);
  Var y = g.matmul(ps_->use(g, name_ + ".wo"), cat);
  return g.add_colvec(y, ps_->use(g, name_ + ".bo"));
}

// --- TransformerBlock ---

TransformerBlock::TransformerBlock(ParamStore& ps, std::string name, int dim,
                                   int heads, int ff_mult)
    : ln1_(ps, name + ".ln1", dim),
      ln2_(ps, name + ".ln2", dim),
      attn_(ps, name + ".attn", dim, heads),
      ff1_(ps, name + ".ff1", dim, dim * ff_mult),
      ff2_(ps, name + ".ff2", dim * ff_mult, dim) {}

Var TransformerBlock::apply(Graph& g, Var x, double dropout, RngStream* rng) const {
  Var a = attn_.apply(g, ln1_.apply(g, x));
  if (dropout > 0.0 && rng) a = g.dropout(a, dropout, *rng);
  x = g.add(x, a);
  Var f = ff2_.apply(g, g.gelu(ff1_.apply(g, ln2_.apply(g, x))));
  if (dropout > 0.0 && rng) f = g.dropout(f, dropout, *rng);
  return g.add(x, f);
}

Mat sinusoidal_embedding(double t, int dim) {
  require(dim % 2 == 0, "time embedding dim must be even");
  Mat e(dim, 1);
  int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    double freq = std::pow(10000.0, -static_cast<double>(i) / half);
    e(i, 0) = std::sin(t * 1000.0 * freq);
    e(half + i, 0) = std::cos(t * 1000.0 * freq);
  }
  return e;
}

}  // namespace promptevc::nn
