#include "promptevc/synth.hpp"

#include <cmath>

namespace promptevc {

// --- MelGraph ---

MelGraph::MelGraph(const SystemConfig& cfg)
    : basis_(make_stft_basis(cfg.n_fft, cfg.hop_length, cfg.win_length)),
      mel_w_(mel_filterbank(cfg.sample_rate_hz, cfg.n_fft, cfg.n_mels)) {}

nn::Var MelGraph::linear_magnitude(nn::Graph& g, nn::Var wave) const {
  require(g.rows_of(wave) == 1, "mel graph: wave must be 1 x N");
  nn::Var padded = g.pad_reflect_cols(wave, basis_.n_fft / 2);
  nn::Var frames = g.unfold(padded, basis_.n_fft, basis_.hop, 0);
  nn::Var re = g.matmul(g.constant(basis_.cos_basis), frames);
  nn::Var im = g.matmul(g.constant(basis_.sin_basis), frames);
  nn::Var power = g.add(g.square(re), g.square(im));
  return g.sqrt_(g.add_scalar(power, 1e-12));
}

nn::Var MelGraph::log_mel_from_magnitude(nn::Graph& g, nn::Var mag) const {
  nn::Var mel = g.matmul(g.constant(mel_w_), mag);
  return g.log_(g.add_scalar(mel, kLogFloor));
}

nn::Var MelGraph::log_mel(nn::Graph& g, nn::Var wave) const {
  return log_mel_from_magnitude(g, linear_magnitude(g, wave));
}

// --- PosteriorEncoder ---

PosteriorEncoder::PosteriorEncoder(nn::ParamStore& ps, const std::string& name,
                                   int in_bins, int channels, int d_latent,
                                   int cond_dim)
    : pre_(ps, name + ".pre", in_bins, channels, 5),
      mid_(ps, name + ".mid", channels, channels, 5, 1, -1, 3),
      post_(nn::Conv1d::zero_init(ps, name + ".post", channels, 2 * d_latent, 1)),
      cond_proj_(ps, name + ".cond", cond_dim, channels),
      d_latent_(d_latent) {}

PosteriorEncoder::Out PosteriorEncoder::apply(nn::Graph& g, nn::Var lin_spec,
                                              nn::Var cond, RngStream& rng) const {
  nn::Var h = pre_.apply(g, lin_spec);
  h = g.add_colvec(h, cond_proj_.apply(g, cond));
  h = g.lrelu(h);
  h = g.add(h, mid_.apply(g, g.lrelu(h)));
  nn::Var stats = post_.apply(g, h);
  Out out;
  out.mu = g.rows(stats, 0, d_latent_);
  out.log_sigma = g.rows(stats, d_latent_, d_latent_);
  Mat eps = rng.normal_mat(d_latent_, g.cols_of(lin_spec));
  out.z = g.add(out.mu, g.hadamard(g.exp_(out.log_sigma), g.constant(eps)));
  return out;
}

// --- ResidualCouplingFlow ---

ResidualCouplingFlow::ResidualCouplingFlow(nn::ParamStore& ps,
                                           const std::string& name, int d_latent,
                                           int hidden, int layers, int cond_dim)
    : half_(d_latent / 2) {
  require(d_latent % 2 == 0, "flow needs an even latent dimension");
  for (int i = 0; i < layers; ++i) {
    std::string base = name + ".l" + std::to_string(i);
    layers_.push_back(Layer{
        nn::Conv1d(ps, base + ".pre", half_, hidden, 5),
        nn::Conv1d(ps, base + ".mid", hidden, hidden, 5),
        nn::Conv1d::zero_init(ps, base + ".head", hidden, 2 * half_, 1),
        nn::Linear(ps, base + ".cond", cond_dim, hidden),
    });
  }
}

ResidualCouplingFlow::Out ResidualCouplingFlow::forward(nn::Graph& g, nn::Var z,
                                                        nn::Var cond) const {
  nn::Var logdet = g.constant(Mat::Zero(1, 1));
  for (size_t i = 0; i < layers_.size(); ++i) {
    const Layer& ly = layers_[i];
    bool swap = (i % 2) == 1;  // alternate the transformed half
    nn::Var keep = g.rows(z, swap ? half_ : 0, half_);
    nn::Var move = g.rows(z, swap ? 0 : half_, half_);
    nn::Var h = ly.pre.apply(g, keep);
    h = g.add_colvec(h, ly.cond_proj.apply(g, cond));
    h = g.lrelu(h);
    h = g.lrelu(ly.mid.apply(g, h));
    nn::Var sb = ly.head.apply(g, h);
    nn::Var shift = g.rows(sb, 0, half_);
    nn::Var log_scale = g.rows(sb, half_, half_);
    nn::Var moved = g.add(g.hadamard(move, g.exp_(log_scale)), shift);
    logdet = g.add(logdet, g.sum_all(log_scale));
    z = swap ? g.concat_rows({moved, keep}) : g.concat_rows({keep, moved});
  }
  return Out{z, logdet};
}

Mat ResidualCouplingFlow::inverse(const Mat& y, const Vec& cond) const {
  // Gradient-free evaluation on a scratch graph.
  nn::Graph g;
  nn::Var z = g.constant(y);
  nn::Var c = g.constant(cond);
  for (size_t ri = layers_.size(); ri-- > 0;) {
    const Layer& ly = layers_[ri];
    bool swap = (ri % 2) == 1;
    nn::Var keep = g.rows(z, swap ? half_ : 0, half_);
    nn::Var moved = g.rows(z, swap ? 0 : half_, half_);
    nn::Var h = ly.pre.apply(g, keep);
    h = g.add_colvec(h, ly.cond_proj.apply(g, c));
    h = g.lrelu(h);
    h = g.lrelu(ly.mid.apply(g, h));
    nn::Var sb = ly.head.apply(g, h);
    nn::Var shift = g.rows(sb, 0, half_);
    nn::Var neg_scale = g.scale(g.rows(sb, half_, half_), -1.0);
    nn::Var back = g.hadamard(g.sub(moved, shift), g.exp_(neg_scale));
    z = swap ? g.concat_rows({back, keep}) : g.concat_rows({keep, back});
  }
  return g.value(z);
}

// --- Decoder ---

std::vector<int> upsample_factors(int hop) {
  std::vector<int> factors;
  int h = hop;
  while (h > 1) {
    int f = h % 8 == 0 ? 8 : h % 4 == 0 ? 4 : h % 2 == 0 ? 2 : 0;
    require(f != 0, "hop length must factor into 2/4/8 upsampling stages");
    factors.push_back(f);
    h /= f;
  }
  require(!factors.empty(), "hop length must be > 1");
  return factors;
}

Decoder::Decoder(nn::ParamStore& ps, const std::string& name, int d_latent,
                 int channels, int hop, int cond_dim)
    : pre_(ps, name + ".pre", d_latent, channels, 7),
      post_(ps, name + ".post",
            std::max(channels >> static_cast<int>(upsample_factors(hop).size()), 4),
            1, 7),
      cond_proj_(ps, name + ".cond", cond_dim, channels),
      hop_(hop) {
  auto factors = upsample_factors(hop);
  int ch = channels;
  for (size_t i = 0; i < factors.size(); ++i) {
    int out_ch = std::max(ch / 2, 4);
    int f = factors[i];
    std::string base = name + ".s" + std::to_string(i);
    stages_.push_back(Stage{
        nn::ConvTranspose1d(ps, base + ".up", ch, out_ch, 2 * f, f),
        nn::Conv1d(ps, base + ".r1", out_ch, out_ch, 3, 1, -1, 1),
        nn::Conv1d(ps, base + ".r2", out_ch, out_ch, 3, 1, -1, 3),
    });
    ch = out_ch;
  }
}

nn::Var Decoder::apply(nn::Graph& g, nn::Var z, nn::Var cond) const {
  nn::Var h = pre_.apply(g, z);
  h = g.add_colvec(h, cond_proj_.apply(g, cond));
  for (const Stage& st : stages_) {
    h = st.up.apply(g, g.lrelu(h));
    nn::Var r = st.res2.apply(g, g.lrelu(st.res1.apply(g, g.lrelu(h))));
    h = g.add(h, r);
  }
  return g.tanh_(post_.apply(g, g.lrelu(h)));
}

// --- DiscriminatorBank ---

DiscriminatorBank::DiscriminatorBank(nn::ParamStore& ps, const std::string& name,
                                     const ModelDims& dims)
    : periods_(dims.disc_periods), scales_(dims.disc_scales) {
  for (size_t i = 0; i < periods_.size(); ++i) {
    std::string base = name + ".p" + std::to_string(periods_[i]);
    ConvStack st{
        {
            nn::Conv1d(ps, base + ".c0", periods_[i], 32, 5, 3),
            nn::Conv1d(ps, base + ".c1", 32, 64, 5, 3),
            nn::Conv1d(ps, base + ".c2", 64, 64, 5, 3),
        },
        nn::Conv1d(ps, base + ".head", 64, 1, 3),
    };
    period_stacks_.push_back(std::move(st));
  }
  for (int s = 0; s < scales_; ++s) {
    std::string base = name + ".s" + std::to_string(s);
    ConvStack st{
        {
            nn::Conv1d(ps, base + ".c0", 1, 16, 15, 2),
            nn::Conv1d(ps, base + ".c1", 16, 32, 15, 4),
            nn::Conv1d(ps, base + ".c2", 32, 64, 15, 4),
        },
        nn::Conv1d(ps, base + ".head", 64, 1, 3),
    };
    scale_stacks_.push_back(std::move(st));
  }
}

DiscOutput DiscriminatorBank::apply_period(nn::Graph& g, nn::Var wave,
                                           size_t i) const {
  int p = periods_[i];
  int n = g.cols_of(wave);
  int rem = n % p;
  if (rem != 0) {
    nn::Var zeros = g.constant(Mat::Zero(1, p - rem));
    wave = g.concat_cols({wave, zeros});
  }
  nn::Var h = g.fold_row(wave, p);
  DiscOutput out;
  for (const auto& conv : period_stacks_[i].convs) {
    h = g.lrelu(conv.apply(g, h));
    out.feats.push_back(h);
  }
  out.logit = period_stacks_[i].head.apply(g, h);
  return out;
}

DiscOutput DiscriminatorBank::apply_scale(nn::Graph& g, nn::Var wave, int s) const {
  nn::Var h = wave;
  for (int i = 0; i < s; ++i) h = g.avg_pool1d(h, 4, 2, 1);
  DiscOutput out;
  for (const auto& conv : scale_stacks_[static_cast<size_t>(s)].convs) {
    h = g.lrelu(conv.apply(g, h));
    out.feats.push_back(h);
  }
  out.logit = scale_stacks_[static_cast<size_t>(s)].head.apply(g, h);
  return out;
}

std::vector<DiscOutput> DiscriminatorBank::apply(nn::Graph& g, nn::Var wave) const {
  require(g.rows_of(wave) == 1, "discriminator: wave must be 1 x N");
  std::vector<DiscOutput> outs;
  for (size_t i = 0; i < periods_.size(); ++i)
    outs.push_back(apply_period(g, wave, i));
  for (int s = 0; s < scales_; ++s) outs.push_back(apply_scale(g, wave, s));
  return outs;
}

// --- adversarial objectives ---

nn::Var lsgan_d_loss(nn::Graph& g, const std::vector<DiscOutput>& real,
                     const std::vector<DiscOutput>& fake) {
  require(real.size() == fake.size() && !real.empty(),
          "adversarial loss: sub-discriminator count mismatch");
  nn::Var total = g.constant(Mat::Zero(1, 1));
  for (size_t i = 0; i < real.size(); ++i) {
    nn::Var real_term = g.mean_all(g.square(g.add_scalar(real[i].logit, -1.0)));
    nn::Var fake_term = g.mean_all(g.square(fake[i].logit));
    total = g.add(total, g.add(real_term, fake_term));
  }
  return total;
}

nn::Var lsgan_g_loss(nn::Graph& g, const std::vector<DiscOutput>& fake) {
  require(!fake.empty(), "adversarial loss: no sub-discriminators");
  nn::Var total = g.constant(Mat::Zero(1, 1));
  for (const auto& f : fake)
    total = g.add(total, g.mean_all(g.square(g.add_scalar(f.logit, -1.0))));
  return total;
}

nn::Var feature_matching_loss(nn::Graph& g, const std::vector<DiscOutput>& real,
                              const std::vector<DiscOutput>& fake) {
  require(real.size() == fake.size(), "feature matching: sub count mismatch");
  nn::Var total = g.constant(Mat::Zero(1, 1));
  for (size_t i = 0; i < real.size(); ++i) {
    require(real[i].feats.size() == fake[i].feats.size(),
            "feature matching: layer count mismatch");
    for (size_t l = 0; l < real[i].feats.size(); ++l) {
      // Real-side features act as fixed targets.
      nn::Var target = g.stop_gradient(real[i].feats[l]);
      total = g.add(total, g.l1(fake[i].feats[l], target));
    }
  }
  return total;
}

nn::Var kl_divergence_loss(nn::Graph& g, nn::Var mu_q, nn::Var log_sigma_q,
                           nn::Var z, nn::Var z_flow, nn::Var logdet,
                           nn::Var mu_p, nn::Var log_sigma_p) {
  double n = static_cast<double>(g.rows_of(z)) * g.cols_of(z);
  nn::Var prior_quad =
      g.hadamard(g.square(g.sub(z_flow, mu_p)), g.exp_(g.scale(log_sigma_p, -2.0)));
  nn::Var post_quad =
      g.hadamard(g.square(g.sub(z, mu_q)), g.exp_(g.scale(log_sigma_q, -2.0)));
  nn::Var term = g.add(g.sub(log_sigma_p, log_sigma_q),
                       g.scale(g.sub(prior_quad, post_quad), 0.5));
  nn::Var total = g.sub(g.sum_all(term), logdet);
  return g.scale(total, 1.0 / n);
}

}  // namespace promptevc
