#pragma once

#include <memory>
#include <string>
#include <vector>

#include "promptevc/config.hpp"
#include "promptevc/prosody.hpp"
#include "promptevc/speaker.hpp"
#include "promptevc/synth.hpp"
#include "promptevc/textmap.hpp"

namespace promptevc {

// Denoising mapper from prompt descriptors to emotion embeddings. Forward
// process is the variance-preserving SDE in closed form; the network
// predicts the injected noise; sampling integrates the probability-flow
// ODE backwards with Euler steps.
class PromptMapper {
 public:
  PromptMapper(nn::ParamStore& ps, const std::string& name,
               const SystemConfig& cfg);

  // x_t, e_txt are d x 1 columns; t is the diffusion time in (0, 1].
  nn::Var denoise(nn::Graph& g, nn::Var x_t, double t, nn::Var e_txt) const;

  // mean squared error between injected and predicted noise at a random t.
  nn::Var train_loss(nn::Graph& g, const Vec& target, const Vec& e_txt,
                     RngStream& rng) const;

  Vec sample(const Vec& e_txt, RngStream& rng) const;

  // Fix the target whitening stats (frozen, checkpoint-borne). The diffusion
  // runs in standardized coordinates so the unit-Gaussian start of the
  // reverse pass matches the data scale.
  void set_target_stats(const Vec& mu, const Vec& sd);

  const DiffusionSchedule& schedule() const { return sched_; }

 private:
  const Mat& stat_mu() const;
  const Mat& stat_sd() const;

  nn::ParamStore* ps_;
  std::string name_;
  DiffusionSchedule sched_;
  int d_emo_;
  int width_;
  int time_dim_;
  nn::Linear in_x_, in_c_, in_t_, out_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNorm final_ln_;
};

// Per-utterance distances and activations all training paths share.
struct FrameFeatures {
  std::vector<double> samples;
  Mat log_mel;   // n_mels x T
  Mat lin_mag;   // (n_fft/2+1) x T
  Vec f0_hz;     // T entries, 0 = unvoiced
  Mat content;   // content_dim x T
  Vec e_ref;     // d_emo
};

struct LossReport {
  double l_sp = 0;     // spectral reconstruction
  double l_f = 0;      // feature matching
  double l_adv_g = 0;  // generator adversarial
  double l_pm = 0;     // prompt mapper denoising
  double l_rhy = 0;    // duration
  double l_spk = 0;    // speaker f0 constraint
  double l_kl = 0;     // latent prior term (reported separately)
  double l_adv_d = 0;  // discriminator side, not part of the total

  double total(const TrainingSchedule& s) const {
    double t = l_sp + l_f + l_adv_g + l_pm + l_rhy + l_spk;
    if (s.use_kl) t += s.kl_weight * l_kl;
    return t;
  }
};

// The full conversion system. Modules honoring the ablation flags are only
// constructed (and parameterized) when enabled.
class PromptEvcModel {
 public:
  PromptEvcModel(const SystemConfig& cfg, nn::ParamStore& ps);

  const SystemConfig& config() const { return cfg_; }
  nn::ParamStore& params() { return *ps_; }

  bool has_mapper() const { return mapper_ != nullptr; }
  bool has_speaker_encoder() const { return spk_enc_ != nullptr; }
  bool has_prosody_predictor() const { return dur_pred_ != nullptr; }

  // h_spk: d_spk x 1 (zeros when the speaker encoder is ablated).
  nn::Var speaker_embedding(nn::Graph& g, nn::Var log_mel) const;

  struct TextSide {
    nn::Var token_hidden;  // H x N
    nn::Var dur_pred;      // 1 x N, invalid when prosody predictor is off
  };
  TextSide encode_text_side(nn::Graph& g, const std::vector<int>& tokens,
                            nn::Var h_emo, nn::Var h_spk, double dropout = 0.0,
                            RngStream* rng = nullptr) const;

  nn::Var expand_tokens(nn::Graph& g, nn::Var token_hidden,
                        const std::vector<int>& durations) const;

  // 1 x T log-f0 regression; invalid Var when the prosody predictor is off.
  nn::Var predict_log_f0(nn::Graph& g, nn::Var frame_hidden) const;

  struct PriorOut {
    nn::Var mu;
    nn::Var log_sigma;
  };
  PriorOut prior(nn::Graph& g, nn::Var frame_hidden) const;

  const PosteriorEncoder& posterior() const { return *post_enc_; }
  const ResidualCouplingFlow& flow() const { return *flow_; }
  const Decoder& decoder() const { return *decoder_; }
  const DiscriminatorBank& discriminators() const { return *disc_; }
  const PromptMapper& mapper() const;

  // No-op when the mapper is ablated away.
  void set_mapper_target_stats(const Vec& mu, const Vec& sd);

  // Decoder conditioning vector [h_emo; h_spk].
  nn::Var conditioning(nn::Graph& g, nn::Var h_emo, nn::Var h_spk) const;

  // Prompt-side emotion embedding when the mapper is ablated: a fixed,
  // untrained projection of the descriptor.
  Vec ablated_prompt_embedding(const Vec& e_txt) const;

  // Fallback duration when the prosody predictor is ablated.
  static constexpr int kFallbackDuration = 2;

  static bool is_discriminator_param(const std::string& name);
  static bool is_mapper_param(const std::string& name);
  // Frozen data statistics: never touched by the optimizer.
  static bool is_frozen_stat(const std::string& name);

 private:
  SystemConfig cfg_;
  nn::ParamStore* ps_;
  std::unique_ptr<PromptMapper> mapper_;
  std::unique_ptr<SpeakerEncoder> spk_enc_;
  std::unique_ptr<DurationPredictor> dur_pred_;
  std::unique_ptr<F0Predictor> f0_pred_;
  std::unique_ptr<PosteriorEncoder> post_enc_;
  std::unique_ptr<ResidualCouplingFlow> flow_;
  std::unique_ptr<Decoder> decoder_;
  std::unique_ptr<DiscriminatorBank> disc_;
  std::unique_ptr<nn::Linear> emo_proj_, spk_proj_;
  std::unique_ptr<nn::Conv1d> txt_conv1_, txt_conv2_, prior_mid_, prior_head_;
  std::unique_ptr<nn::LayerNorm> txt_ln1_, txt_ln2_;
  Mat txt2emo_fixed_;  // used only when the mapper is ablated
};

}  // namespace promptevc
