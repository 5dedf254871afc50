#include "promptevc/model.hpp"

#include <cmath>

#include "promptevc/rng.hpp"

namespace promptevc {

// --- PromptMapper ---

PromptMapper::PromptMapper(nn::ParamStore& ps, const std::string& name,
                           const SystemConfig& cfg)
    : ps_(&ps),
      name_(name),
      sched_(cfg.diffusion),
      d_emo_(cfg.d_emo),
      width_(cfg.model.mapper_width),
      time_dim_(cfg.model.time_embed_dim),
      in_x_(ps, name + ".in_x", cfg.d_emo, cfg.model.mapper_width),
      in_c_(ps, name + ".in_c", cfg.model.descriptor_dim, cfg.model.mapper_width),
      in_t_(ps, name + ".in_t", cfg.model.time_embed_dim, cfg.model.mapper_width),
      out_(ps, name + ".out", cfg.model.mapper_width, cfg.d_emo),
      final_ln_(ps, name + ".ln", cfg.model.mapper_width) {
  for (int i = 0; i < cfg.model.mapper_depth; ++i)
    blocks_.emplace_back(ps, name + ".b" + std::to_string(i),
                         cfg.model.mapper_width, cfg.model.mapper_heads,
                         cfg.model.mapper_ff_mult);
  nn::ensure_const_param(ps, name + ".stat_mu", cfg.d_emo, 1, 0.0);
  nn::ensure_const_param(ps, name + ".stat_sd", cfg.d_emo, 1, 1.0);
}

const Mat& PromptMapper::stat_mu() const { return ps_->value(name_ + ".stat_mu"); }
const Mat& PromptMapper::stat_sd() const { return ps_->value(name_ + ".stat_sd"); }

void PromptMapper::set_target_stats(const Vec& mu, const Vec& sd) {
  require(mu.size() == d_emo_ && sd.size() == d_emo_,
          "mapper: target stat dim mismatch");
  ps_->value(name_ + ".stat_mu") = mu;
  ps_->value(name_ + ".stat_sd") = sd.cwiseMax(1e-3);
}

nn::Var PromptMapper::denoise(nn::Graph& g, nn::Var x_t, double t,
                              nn::Var e_txt) const {
  require(g.rows_of(x_t) == d_emo_ && g.cols_of(x_t) == 1,
          "mapper: x_t must be d_emo x 1");
  // Three-token sequence: noisy state, prompt descriptor, diffusion time.
  nn::Var tok_x = in_x_.apply(g, x_t);
  nn::Var tok_c = in_c_.apply(g, e_txt);
  nn::Var tok_t = in_t_.apply(g, g.constant(nn::sinusoidal_embedding(t, time_dim_)));
  nn::Var seq = g.concat_cols({tok_x, tok_c, tok_t});
  for (const auto& b : blocks_) seq = b.apply(g, seq);
  nn::Var head = g.cols(final_ln_.apply(g, seq), 0, 1);
  return out_.apply(g, head);
}

nn::Var PromptMapper::train_loss(nn::Graph& g, const Vec& target,
                                 const Vec& e_txt, RngStream& rng) const {
  require(target.size() == d_emo_, "mapper: target dim mismatch");
  double t = rng.uniform(1e-3, 1.0);
  Mat eps = rng.normal_mat(d_emo_, 1);
  Mat x0 = (target - stat_mu()).cwiseQuotient(stat_sd());
  Mat x_t = x0 * sched_.mean_decay(t) + eps * sched_.noise_std(t);
  nn::Var pred = denoise(g, g.constant(x_t), t, g.constant(e_txt));
  return g.mean_all(g.square(g.sub(pred, g.constant(eps))));
}

namespace {
// Largest plausible magnitude, in whitened units, for a clean target
// coordinate. Clamping the implied x0 each step keeps the reverse ODE on the
// data manifold even when the noise estimate is off early in the trajectory.
constexpr double kX0Clamp = 4.0;
}  // namespace

Vec PromptMapper::sample(const Vec& e_txt, RngStream& rng) const {
  Mat x = rng.normal_mat(d_emo_, 1);
  int n = sched_.n_steps;
  double dt = 1.0 / n;
  for (int i = 0; i < n; ++i) {
    double t = 1.0 - i * dt;
    nn::Graph g;  // gradient-free scratch tape
    nn::Var eps_hat = denoise(g, g.constant(x), t, g.constant(e_txt));
    double sigma = std::sqrt(std::max(1.0 - std::exp(-sched_.cumulative(t)), 1e-5));
    double m = sched_.mean_decay(t);
    Mat x0_hat = ((x - sigma * g.value(eps_hat)) / m)
                     .cwiseMax(-kX0Clamp)
                     .cwiseMin(kX0Clamp);
    Mat eps_eff = (x - m * x0_hat) / sigma;
    // Probability-flow update: dx/dt = -beta/2 * (x - eps / sigma).
    Mat drift = x - eps_eff / sigma;
    x += 0.5 * dt * sched_.beta(t) * drift;
  }
  return stat_mu() + stat_sd().cwiseProduct(x.col(0));
}

// --- PromptEvcModel ---

PromptEvcModel::PromptEvcModel(const SystemConfig& cfg, nn::ParamStore& ps)
    : cfg_(cfg), ps_(&ps) {
  const ModelDims& md = cfg.model;
  int h = md.prosody_channels;
  int bins = cfg.n_fft / 2 + 1;

  if (!cfg.ablation.no_prompt_mapper)
    mapper_ = std::make_unique<PromptMapper>(ps, "pm", cfg);
  if (!cfg.ablation.no_speaker_encoder)
    spk_enc_ = std::make_unique<SpeakerEncoder>(ps, "spk", cfg.n_mels, cfg.d_spk,
                                                md.posterior_channels);
  if (!cfg.ablation.no_prosody_predictor) {
    dur_pred_ = std::make_unique<DurationPredictor>(ps, "dur", h,
                                                    md.duration_channels);
    f0_pred_ = std::make_unique<F0Predictor>(ps, "f0p", h, md.prosody_channels);
  }

  nn::ensure_param(ps, "txt.emb", h, cfg.codebook_size,
                   1.0 / std::sqrt(static_cast<double>(h)));
  emo_proj_ = std::make_unique<nn::Linear>(ps, "txt.emo", cfg.d_emo, h);
  spk_proj_ = std::make_unique<nn::Linear>(ps, "txt.spk", cfg.d_spk, h);
  txt_conv1_ = std::make_unique<nn::Conv1d>(ps, "txt.conv1", h, h, 3);
  txt_conv2_ = std::make_unique<nn::Conv1d>(ps, "txt.conv2", h, h, 3);
  txt_ln1_ = std::make_unique<nn::LayerNorm>(ps, "txt.ln1", h);
  txt_ln2_ = std::make_unique<nn::LayerNorm>(ps, "txt.ln2", h);
  prior_mid_ = std::make_unique<nn::Conv1d>(ps, "prior.mid", h, h, 3);
  prior_head_ = std::make_unique<nn::Conv1d>(
      nn::Conv1d::zero_init(ps, "prior.head", h, 2 * cfg.d_latent, 1));

  post_enc_ = std::make_unique<PosteriorEncoder>(ps, "post", bins,
                                                 md.posterior_channels,
                                                 cfg.d_latent, cfg.d_spk);
  flow_ = std::make_unique<ResidualCouplingFlow>(ps, "flow", cfg.d_latent,
                                                 md.flow_hidden, md.flow_layers,
                                                 cfg.d_spk);
  decoder_ = std::make_unique<Decoder>(ps, "dec", cfg.d_latent,
                                       md.decoder_channels, cfg.hop_length,
                                       cfg.d_emo + cfg.d_spk);
  disc_ = std::make_unique<DiscriminatorBank>(ps, "disc", md);

  if (cfg.ablation.no_prompt_mapper) {
    RngStream rng(cfg.seed, "ablate:txt2emo");
    txt2emo_fixed_ = rng.normal_mat(
        cfg.d_emo, md.descriptor_dim,
        1.0 / std::sqrt(static_cast<double>(md.descriptor_dim)));
  }
}

const PromptMapper& PromptEvcModel::mapper() const {
  require(mapper_ != nullptr, "prompt mapper is ablated");
  return *mapper_;
}

void PromptEvcModel::set_mapper_target_stats(const Vec& mu, const Vec& sd) {
  if (mapper_) mapper_->set_target_stats(mu, sd);
}

nn::Var PromptEvcModel::speaker_embedding(nn::Graph& g, nn::Var log_mel) const {
  if (!spk_enc_) return g.constant(Mat::Zero(cfg_.d_spk, 1));
  return spk_enc_->apply(g, log_mel);
}

PromptEvcModel::TextSide PromptEvcModel::encode_text_side(
    nn::Graph& g, const std::vector<int>& tokens, nn::Var h_emo, nn::Var h_spk,
    double dropout, RngStream* rng) const {
  require(!tokens.empty(), "text side: empty token sequence");
  nn::Var emb = g.gather_cols(ps_->use(g, "txt.emb"), tokens);
  int n = static_cast<int>(tokens.size());
  nn::Var cond = g.add(emo_proj_->apply(g, h_emo), spk_proj_->apply(g, h_spk));
  nn::Var x = g.add(emb, g.tile_cols(cond, n));
  x = txt_ln1_->apply(g, g.lrelu(txt_conv1_->apply(g, x)));
  if (dropout > 0.0 && rng) x = g.dropout(x, dropout, *rng);
  x = txt_ln2_->apply(g, g.lrelu(txt_conv2_->apply(g, x)));
  TextSide out;
  out.token_hidden = x;
  if (dur_pred_) out.dur_pred = dur_pred_->apply(g, x, dropout, rng);
  return out;
}

nn::Var PromptEvcModel::expand_tokens(nn::Graph& g, nn::Var token_hidden,
                                      const std::vector<int>& durations) const {
  return g.repeat_cols(token_hidden, durations);
}

nn::Var PromptEvcModel::predict_log_f0(nn::Graph& g, nn::Var frame_hidden) const {
  if (!f0_pred_) return nn::Var{};
  return f0_pred_->apply(g, frame_hidden);
}

PromptEvcModel::PriorOut PromptEvcModel::prior(nn::Graph& g,
                                               nn::Var frame_hidden) const {
  nn::Var mid = g.add(frame_hidden, g.lrelu(prior_mid_->apply(g, frame_hidden)));
  nn::Var stats = prior_head_->apply(g, mid);
  PriorOut out;
  out.mu = g.rows(stats, 0, cfg_.d_latent);
  out.log_sigma = g.rows(stats, cfg_.d_latent, cfg_.d_latent);
  return out;
}

nn::Var PromptEvcModel::conditioning(nn::Graph& g, nn::Var h_emo,
                                     nn::Var h_spk) const {
  require(g.rows_of(h_emo) == cfg_.d_emo && g.cols_of(h_emo) == 1,
          "conditioning: h_emo must be d_emo x 1");
  require(g.rows_of(h_spk) == cfg_.d_spk && g.cols_of(h_spk) == 1,
          "conditioning: h_spk must be d_spk x 1");
  return g.concat_rows({h_emo, h_spk});
}

Vec PromptEvcModel::ablated_prompt_embedding(const Vec& e_txt) const {
  require(txt2emo_fixed_.size() > 0, "fixed prompt projection only exists "
                                     "when the mapper is ablated");
  return txt2emo_fixed_ * e_txt;
}

bool PromptEvcModel::is_discriminator_param(const std::string& name) {
  return name.rfind("disc.", 0) == 0;
}

bool PromptEvcModel::is_mapper_param(const std::string& name) {
  return name.rfind("pm.", 0) == 0;
}

bool PromptEvcModel::is_frozen_stat(const std::string& name) {
  return name.find(".stat_") != std::string::npos;
}

}  // namespace promptevc
