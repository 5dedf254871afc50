#pragma once

#include <string>

#include "promptevc/nn/graph.hpp"
#include "promptevc/nn/params.hpp"

namespace promptevc::nn {

// Layers register their parameters on construction (or adopt existing ones
// with matching shapes, so rebuilding a model over a loaded store works).
// `apply` stamps the computation onto a graph.

Mat& ensure_param(ParamStore& ps, const std::string& name, int rows, int cols,
                  double stddev);
Mat& ensure_const_param(ParamStore& ps, const std::string& name, int rows,
                        int cols, double fill);

class Linear {
 public:
  Linear(ParamStore& ps, std::string name, int in, int out, bool bias = true,
         double gain = 1.0);
  Var apply(Graph& g, Var x) const;  // in x T -> out x T

 private:
  ParamStore* ps_;
  std::string name_;
  bool bias_;
};

class Conv1d {
 public:
  // pad < 0 selects "same" padding: dilation*(k-1)/2.
  Conv1d(ParamStore& ps, std::string name, int in, int out, int k,
         int stride = 1, int pad = -1, int dilation = 1, bool bias = true,
         double gain = 1.0);
  // zero_init zeroes the weight so the layer starts as a no-op head.
  static Conv1d zero_init(ParamStore& ps, std::string name, int in, int out,
                          int k, int stride = 1, int pad = -1, int dilation = 1);
  Var apply(Graph& g, Var x) const;
  int out_len(int t) const { return conv_out_len(t, k_, stride_, pad_, dilation_); }

 private:
  Conv1d() = default;
  ParamStore* ps_ = nullptr;
  std::string name_;
  int k_ = 1, stride_ = 1, pad_ = 0, dilation_ = 1;
  bool bias_ = true;
};

class ConvTranspose1d {
 public:
  ConvTranspose1d(ParamStore& ps, std::string name, int in, int out, int k,
                  int stride, int pad = -1, bool bias = true);
  Var apply(Graph& g, Var x) const;
  int out_len(int t) const { return conv_transpose_out_len(t, k_, stride_, pad_); }

 private:
  ParamStore* ps_;
  std::string name_;
  int k_, stride_, pad_;
  bool bias_;
};

class LayerNorm {
 public:
  LayerNorm(ParamStore& ps, std::string name, int dim);
  Var apply(Graph& g, Var x) const;

 private:
  ParamStore* ps_;
  std::string name_;
};

class MultiHeadAttention {
 public:
  MultiHeadAttention(ParamStore& ps, std::string name, int dim, int heads);
  Var apply(Graph& g, Var x) const;  // bidirectional self-attention

 private:
  ParamStore* ps_;
  std::string name_;
  int dim_, heads_;
};

// Pre-norm block: x + MHA(LN(x)), then x + FF(LN(x)).
class TransformerBlock {
 public:
  TransformerBlock(ParamStore& ps, std::string name, int dim, int heads,
                   int ff_mult);
  Var apply(Graph& g, Var x, double dropout = 0.0, RngStream* rng = nullptr) const;

 private:
  LayerNorm ln1_, ln2_;
  MultiHeadAttention attn_;
  Linear ff1_, ff2_;
};

// Classic sin/cos position code for a scalar diffusion time in [0, 1].
Mat sinusoidal_embedding(double t, int dim);

}  // namespace promptevc::nn
