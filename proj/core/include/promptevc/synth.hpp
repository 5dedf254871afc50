#pragma once

#include <string>
#include <vector>

#include "promptevc/config.hpp"
#include "promptevc/dsp.hpp"
#include "promptevc/nn/layers.hpp"

namespace promptevc {

// Differentiable spectrogram path. Shares its basis matrices with the plain
// dsp functions so graph and offline features agree numerically.
class MelGraph {
 public:
  explicit MelGraph(const SystemConfig& cfg);
  nn::Var linear_magnitude(nn::Graph& g, nn::Var wave) const;  // 1xN -> bins x T
  nn::Var log_mel(nn::Graph& g, nn::Var wave) const;           // 1xN -> mels x T
  nn::Var log_mel_from_magnitude(nn::Graph& g, nn::Var mag) const;
  const StftBasis& basis() const { return basis_; }
  const Mat& mel_weights() const { return mel_w_; }

 private:
  StftBasis basis_;
  Mat mel_w_;
};

// q(z | spectrogram, speaker): strided-free conv stack with a zero-started
// Gaussian head.
class PosteriorEncoder {
 public:
  PosteriorEncoder(nn::ParamStore& ps, const std::string& name, int in_bins,
                   int channels, int d_latent, int cond_dim);
  struct Out {
    nn::Var mu;
    nn::Var log_sigma;
    nn::Var z;
  };
  Out apply(nn::Graph& g, nn::Var lin_spec, nn::Var cond, RngStream& rng) const;

 private:
  nn::Conv1d pre_, mid_, post_;
  nn::Linear cond_proj_;
  int d_latent_;
};

// Stack of affine coupling layers, alternating which half is transformed.
// Scale heads start at zero so the flow opens as the identity.
class ResidualCouplingFlow {
 public:
  ResidualCouplingFlow(nn::ParamStore& ps, const std::string& name, int d_latent,
                       int hidden, int layers, int cond_dim);
  struct Out {
    nn::Var z;
    nn::Var logdet;  // 1 x 1
  };
  Out forward(nn::Graph& g, nn::Var z, nn::Var cond) const;
  // Exact inverse, evaluated without gradients.
  Mat inverse(const Mat& y, const Vec& cond) const;

 private:
  struct Layer {
    nn::Conv1d pre, mid, head;
    nn::Linear cond_proj;
  };
  std::vector<Layer> layers_;
  int half_;
};

// Frame latents to waveform: transposed-conv upsampling totalling the hop
// length, one dilated residual block per stage, tanh output.
class Decoder {
 public:
  Decoder(nn::ParamStore& ps, const std::string& name, int d_latent,
          int channels, int hop, int cond_dim);
  nn::Var apply(nn::Graph& g, nn::Var z, nn::Var cond) const;  // 1 x (T*hop)
  int hop() const { return hop_; }

 private:
  struct Stage {
    nn::ConvTranspose1d up;
    nn::Conv1d res1, res2;
  };
  nn::Conv1d pre_, post_;
  nn::Linear cond_proj_;
  std::vector<Stage> stages_;
  int hop_;
};

// Factor a hop length into transposed-conv strides (largest of 8/4/2 first).
std::vector<int> upsample_factors(int hop);

struct DiscOutput {
  nn::Var logit;
  std::vector<nn::Var> feats;
};

// Multi-period + multi-scale waveform critics.
class DiscriminatorBank {
 public:
  DiscriminatorBank(nn::ParamStore& ps, const std::string& name,
                    const ModelDims& dims);
  std::vector<DiscOutput> apply(nn::Graph& g, nn::Var wave) const;
  int num_subs() const {
    return static_cast<int>(periods_.size()) + scales_;
  }

 private:
  DiscOutput apply_period(nn::Graph& g, nn::Var wave, size_t i) const;
  DiscOutput apply_scale(nn::Graph& g, nn::Var wave, int s) const;
  struct ConvStack {
    std::vector<nn::Conv1d> convs;
    nn::Conv1d head;
  };
  std::vector<int> periods_;
  int scales_;
  std::vector<ConvStack> period_stacks_, scale_stacks_;
};

// Least-squares adversarial objectives, summed over sub-discriminators.
nn::Var lsgan_d_loss(nn::Graph& g, const std::vector<DiscOutput>& real,
                     const std::vector<DiscOutput>& fake);
nn::Var lsgan_g_loss(nn::Graph& g, const std::vector<DiscOutput>& fake);
nn::Var feature_matching_loss(nn::Graph& g, const std::vector<DiscOutput>& real,
                              const std::vector<DiscOutput>& fake);

// Gaussian KL between the posterior sample and the flow-mapped prior,
// averaged per element; the flow's log-determinant enters with sign -1.
nn::Var kl_divergence_loss(nn::Graph& g, nn::Var mu_q, nn::Var log_sigma_q,
                           nn::Var z, nn::Var z_flow, nn::Var logdet,
                           nn::Var mu_p, nn::Var log_sigma_p);

}  // namespace promptevc
