#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "promptevc/common.hpp"

namespace promptevc {

// Linear noise schedule: beta(t) = beta_0 + (beta_1 - beta_0) * t on [0,1].
// Cumulative noise B(t) = beta_0*t + (beta_1 - beta_0)*t^2/2.
struct DiffusionSchedule {
  enum class Target { kEpsilon, kX0 };

  double beta_0 = 0.05;
  double beta_1 = 20.0;
  int n_steps = 100;
  Target prediction_target = Target::kEpsilon;

  double beta(double t) const { return beta_0 + (beta_1 - beta_0) * t; }
  double cumulative(double t) const {
    return beta_0 * t + 0.5 * (beta_1 - beta_0) * t * t;
  }
  // Closed-form marginal factors of the forward process at time t.
  double mean_decay(double t) const { return std::exp(-0.5 * cumulative(t)); }
  double noise_std(double t) const {
    return std::sqrt(1.0 - std::exp(-cumulative(t)));
  }
};

struct AblationFlags {
  bool no_prompt_mapper = false;
  bool no_prosody_predictor = false;
  bool no_speaker_encoder = false;
};

struct OptimizerConfig {
  double learning_rate = 2e-4;
  double lr_decay_per_epoch = 0.999875;
  double dropout = 0.1;
  double beta1 = 0.8;
  double beta2 = 0.99;
  double weight_decay = 0.01;
  double adam_eps = 1e-8;
};

// Network width/depth knobs. Defaults are the desk-scale sizes; everything
// here is overridable from the config file under "model.".
struct ModelDims {
  int content_dim = 64;        // content-feature provider output width
  int content_lifter_lo = 2;   // first kept cepstral coefficient
  int content_lifter_hi = 14;  // one past the last kept coefficient
  int descriptor_dim = 64;     // hashed word-embedding width
  int mapper_width = 256;      // transformer model width
  int mapper_depth = 4;
  int mapper_heads = 4;
  int mapper_ff_mult = 2;
  int time_embed_dim = 64;     // sinusoidal time embedding width
  int duration_channels = 192; // duration regulator conv channels
  int prosody_channels = 192;  // prosody predictor conv channels
  int posterior_channels = 96;
  int flow_layers = 4;
  int flow_hidden = 96;
  int decoder_channels = 128;
  int segment_frames = 24;     // training segment length (frames)
  std::vector<int> disc_periods = {2, 3, 5};
  int disc_scales = 2;
};

struct TrainingSchedule {
  int pretrain_epochs = 20;  // desk-scale; full-scale runs use 500
  int finetune_epochs = 10;  // desk-scale; full-scale runs use 200
  double mel_weight = 45.0;
  double kl_weight = 1.0;
  bool use_kl = true;
  int checkpoint_every = 200;  // steps between last-good snapshots
};

struct SystemConfig {
  int sample_rate_hz = 16000;
  int n_fft = 1024;
  int hop_length = 256;
  int win_length = 1024;
  int n_mels = 80;
  int d_emo = 256;
  int d_spk = 256;
  int d_latent = 64;
  int codebook_size = 100;
  DiffusionSchedule diffusion;
  AblationFlags ablation;
  OptimizerConfig optimizer;
  ModelDims model;
  TrainingSchedule schedule;
  uint64_t seed = 1234;
};

// Parses the flat key-value config format ("key = value", '#' comments).
// Unknown keys are rejected; PROMPTEVC_SEED overrides the seed when set.
SystemConfig load_config(const std::string& path);
SystemConfig parse_config_text(const std::string& text);
std::string serialize_config(const SystemConfig& cfg);
void validate_config(const SystemConfig& cfg);

bool config_equal(const SystemConfig& a, const SystemConfig& b);

// Hash over the fields that determine cached feature bytes.
uint64_t feature_config_hash(const SystemConfig& cfg);

}  // namespace promptevc
