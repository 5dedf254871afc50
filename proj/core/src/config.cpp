#include "promptevc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace promptevc {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) fail("config: bad numeric value for " + key);
    return d;
  } catch (const Error&) {
    throw;
  } catch (...) {
    fail("config: bad numeric value for " + key);
  }
}

int parse_int(const std::string& key, const std::string& v) {
  double d = parse_double(key, v);
  int i = static_cast<int>(d);
  if (static_cast<double>(i) != d) fail("config: expected integer for " + key);
  return i;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  fail("config: expected boolean for " + key);
}

std::vector<int> parse_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(parse_int(key, item));
  }
  if (out.empty()) fail("config: empty list for " + key);
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s;
}

using Setter = std::function<void(SystemConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = [] {
    std::map<std::string, Setter> s;
    auto i = [](int SystemConfig::*f) {
      return [f](SystemConfig& c, const std::string& k, const std::string& v) { c.*f = parse_int(k, v); };
    };
    s["sample_rate_hz"] = i(&SystemConfig::sample_rate_hz);
    s["n_fft"] = i(&SystemConfig::n_fft);
    s["hop_length"] = i(&SystemConfig::hop_length);
    s["win_length"] = i(&SystemConfig::win_length);
    s["n_mels"] = i(&SystemConfig::n_mels);
    s["d_emo"] = i(&SystemConfig::d_emo);
    s["d_spk"] = i(&SystemConfig::d_spk);
    s["d_latent"] = i(&SystemConfig::d_latent);
    s["codebook_size"] = i(&SystemConfig::codebook_size);
    s["seed"] = [](SystemConfig& c, const std::string& k, const std::string& v) {
      c.seed = static_cast<uint64_t>(parse_double(k, v));
    };

    s["diffusion.beta_0"] = [](SystemConfig& c, const std::string& k, const std::string& v) { c.diffusion.beta_0 = parse_double(k, v); };
    s["diffusion.beta_1"] = [](SystemConfig& c, const std::string& k, const std::string& v) { c.diffusion.beta_1 = parse_double(k, v); };
    s["diffusion.n_steps"] = [](SystemConfig& c, const std::string& k, const std::string& v) { c.diffusion.n_steps = parse_int(k, v); };
    s["diffusion.prediction_target"] = [](SystemConfig& c, const std::string& k, const std::string& v) {
      if (v == "epsilon") c.diffusion.prediction_target = DiffusionSchedule::Target::kEpsilon;
      else if (v == "x0") c.diffusion.prediction_target = DiffusionSchedule::Target::kX0;
      else fail("config: diffusion.prediction_target must be epsilon or x0");
    };

    s["ablation.no_prompt_mapper"] = [](SystemConfig& c, const std::string& k, const std::string& v) { c.ablation.no_prompt_mapper = parse_bool(k, v); };
    s["ablation.no_prosody_predictor"] = [](SystemConfig& c, const std::string& k, const std::string& v) { c.ablation.no_prosody_predictor = parse_bool(k, v); };
    s["ablation.no_speaker_encoder"] = [](SystemConfig& c, const std::string& k, const std::string& v) { c.ablation.no_speaker_encoder = parse_bool(k, v); };

    auto opt = [](double OptimizerConfig::*f) {
      return [f](SystemConfig& c, const std::string& k, const std::string& v) { c.optimizer.*f = parse_double(k, v); };
    };
    s["optimizer.learning_rate"] = opt(&OptimizerConfig::learning_rate);
    s["optimizer.lr_decay_per_epoch"] = opt(&OptimizerConfig::lr_decay_per_epoch);
    s["optimizer.dropout"] = opt(&OptimizerConfig::dropout);
    s["optimizer.beta1"] = opt(&OptimizerConfig::beta1);
    s["optimizer.beta2"] = opt(&OptimizerConfig::beta2);
    s["optimizer.weight_decay"] = opt(&OptimizerConfig::weight_decay);
    s["optimizer.adam_eps"] = opt(&OptimizerConfig::adam_eps);
    // Unqualified aliases for the optimizer trio.
    s["learning_rate"] = s["optimizer.learning_rate"];
    s["lr_decay_per_epoch"] = s["optimizer.lr_decay_per_epoch"];
    s["dropout"] = s["optimizer.dropout"];

    auto md = [](int ModelDims::*f) {
      return [f](SystemConfig& c, const std::string& k, const std::string& v) { c.model.*f = parse_int(k, v); };
    };
    s["model.content_dim"] = md(&ModelDims::content_dim);
    s["model.content_lifter_lo"] = md(&ModelDims::content_lifter_lo);
    s["model.content_lifter_hi"] = md(&ModelDims::content_lifter_hi);
    s["model.descriptor_dim"] = md(&ModelDims::descriptor_dim);
    s["model.mapper_width"] = md(&ModelDims::mapper_width);
    s["model.mapper_depth"] = md(&ModelDims::mapper_depth);
    s["model.mapper_heads"] = md(&ModelDims::mapper_heads);
    s["model.mapper_ff_mult"] = md(&ModelDims::mapper_ff_mult);
    s["model.time_embed_dim"] = md(&ModelDims::time_embed_dim);
    s["model.duration_channels"] = md(&ModelDims::duration_channels);
    s["model.prosody_channels"] = md(&ModelDims::prosody_channels);
    s["model.posterior_channels"] = md(&ModelDims::posterior_channels);
    s["model.flow_layers"] = md(&ModelDims::flow_layers);
    s["model.flow_hidden"] = md(&ModelDims::flow_hidden);
    s["model.decoder_channels"] = md(&ModelDims::decoder_channels);
    s["model.segment_frames"] = md(&ModelDims::segment_frames);
    s["model.disc_scales"] = md(&ModelDims::disc_scales);
    s["model.disc_periods"] = [](SystemConfig& c, const std::string& k, const std::string& v) { c.model.disc_periods = parse_int_list(k, v); };

    auto sch_i = [](int TrainingSchedule::*f) {
      return [f](SystemConfig& c, const std::string& k, const std::string& v) { c.schedule.*f = parse_int(k, v); };
    };
    auto sch_d = [](double TrainingSchedule::*f) {
      return [f](SystemConfig& c, const std::string& k, const std::string& v) { c.schedule.*f = parse_double(k, v); };
    };
    s["schedule.pretrain_epochs"] = sch_i(&TrainingSchedule::pretrain_epochs);
    s["schedule.finetune_epochs"] = sch_i(&TrainingSchedule::finetune_epochs);
    s["schedule.checkpoint_every"] = sch_i(&TrainingSchedule::checkpoint_every);
    s["schedule.mel_weight"] = sch_d(&TrainingSchedule::mel_weight);
    s["schedule.kl_weight"] = sch_d(&TrainingSchedule::kl_weight);
    s["schedule.use_kl"] = [](SystemConfig& c, const std::string& k, const std::string& v) { c.schedule.use_kl = parse_bool(k, v); };
    return s;
  }();
  return m;
}

}  // namespace

SystemConfig parse_config_text(const std::string& text) {
  SystemConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto sep = line.find('=');
    if (sep == std::string::npos) sep = line.find(':');
    if (sep == std::string::npos)
      fail("config: line " + std::to_string(lineno) + " is not key = value");
    std::string key = trim(line.substr(0, sep));
    std::string value = trim(line.substr(sep + 1));
    auto it = setters().find(key);
    if (it == setters().end()) fail("config: unknown key '" + key + "'");
    it->second(cfg, key, value);
  }
  if (const char* env = std::getenv("PROMPTEVC_SEED")) {
    cfg.seed = std::strtoull(env, nullptr, 10);
  }
  validate_config(cfg);
  return cfg;
}

SystemConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("config: cannot open " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void validate_config(const SystemConfig& cfg) {
  auto pos = [](int v, const char* name) {
    if (v <= 0) fail(std::string("config: ") + name + " must be positive");
  };
  pos(cfg.sample_rate_hz, "sample_rate_hz");
  pos(cfg.n_fft, "n_fft");
  pos(cfg.hop_length, "hop_length");
  pos(cfg.win_length, "win_length");
  pos(cfg.n_mels, "n_mels");
  pos(cfg.d_emo, "d_emo");
  pos(cfg.d_spk, "d_spk");
  pos(cfg.d_latent, "d_latent");
  if (cfg.codebook_size < 2) fail("config: codebook_size must be >= 2");
  if (cfg.win_length < cfg.hop_length)
    fail("config: win_length must be >= hop_length");
  if (cfg.win_length > cfg.n_fft) fail("config: win_length must be <= n_fft");
  if (cfg.d_latent % 2 != 0)
    fail("config: d_latent must be even (flow channel split)");
  if (!(cfg.diffusion.beta_0 > 0.0))
    fail("config: diffusion.beta_0 must be > 0");
  if (cfg.diffusion.beta_1 < cfg.diffusion.beta_0)
    fail("config: diffusion.beta_1 must be >= diffusion.beta_0");
  if (cfg.diffusion.n_steps < 1) fail("config: diffusion.n_steps must be >= 1");
  if (!(cfg.optimizer.learning_rate > 0.0))
    fail("config: optimizer.learning_rate must be > 0");
  if (cfg.optimizer.dropout < 0.0 || cfg.optimizer.dropout >= 1.0)
    fail("config: optimizer.dropout must be in [0, 1)");
  if (cfg.model.content_lifter_lo < 0 ||
      cfg.model.content_lifter_hi <= cfg.model.content_lifter_lo ||
      cfg.model.content_lifter_hi > cfg.n_mels)
    fail("config: model.content_lifter range invalid");
}

std::string serialize_config(const SystemConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "sample_rate_hz = " << c.sample_rate_hz << "\n"
    << "n_fft = " << c.n_fft << "\n"
    << "hop_length = " << c.hop_length << "\n"
    << "win_length = " << c.win_length << "\n"
    << "n_mels = " << c.n_mels << "\n"
    << "d_emo = " << c.d_emo << "\n"
    << "d_spk = " << c.d_spk << "\n"
    << "d_latent = " << c.d_latent << "\n"
    << "codebook_size = " << c.codebook_size << "\n"
    << "seed = " << c.seed << "\n"
    << "diffusion.beta_0 = " << c.diffusion.beta_0 << "\n"
    << "diffusion.beta_1 = " << c.diffusion.beta_1 << "\n"
    << "diffusion.n_steps = " << c.diffusion.n_steps << "\n"
    << "diffusion.prediction_target = "
    << (c.diffusion.prediction_target == DiffusionSchedule::Target::kEpsilon ? "epsilon" : "x0") << "\n"
    << "ablation.no_prompt_mapper = " << (c.ablation.no_prompt_mapper ? "true" : "false") << "\n"
    << "ablation.no_prosody_predictor = " << (c.ablation.no_prosody_predictor ? "true" : "false") << "\n"
    << "ablation.no_speaker_encoder = " << (c.ablation.no_speaker_encoder ? "true" : "false") << "\n"
    << "optimizer.learning_rate = " << c.optimizer.learning_rate << "\n"
    << "optimizer.lr_decay_per_epoch = " << c.optimizer.lr_decay_per_epoch << "\n"
    << "optimizer.dropout = " << c.optimizer.dropout << "\n"
    << "optimizer.beta1 = " << c.optimizer.beta1 << "\n"
    << "optimizer.beta2 = " << c.optimizer.beta2 << "\n"
    << "optimizer.weight_decay = " << c.optimizer.weight_decay << "\n"
    << "optimizer.adam_eps = " << c.optimizer.adam_eps << "\n"
    << "model.content_dim = " << c.model.content_dim << "\n"
    << "model.content_lifter_lo = " << c.model.content_lifter_lo << "\n"
    << "model.content_lifter_hi = " << c.model.content_lifter_hi << "\n"
    << "model.descriptor_dim = " << c.model.descriptor_dim << "\n"
    << "model.mapper_width = " << c.model.mapper_width << "\n"
    << "model.mapper_depth = " << c.model.mapper_depth << "\n"
    << "model.mapper_heads = " << c.model.mapper_heads << "\n"
    << "model.mapper_ff_mult = " << c.model.mapper_ff_mult << "\n"
    << "model.time_embed_dim = " << c.model.time_embed_dim << "\n"
    << "model.duration_channels = " << c.model.duration_channels << "\n"
    << "model.prosody_channels = " << c.model.prosody_channels << "\n"
    << "model.posterior_channels = " << c.model.posterior_channels << "\n"
    << "model.flow_layers = " << c.model.flow_layers << "\n"
    << "model.flow_hidden = " << c.model.flow_hidden << "\n"
    << "model.decoder_channels = " << c.model.decoder_channels << "\n"
    << "model.segment_frames = " << c.model.segment_frames << "\n"
    << "model.disc_periods = " << join_ints(c.model.disc_periods) << "\n"
    << "model.disc_scales = " << c.model.disc_scales << "\n"
    << "schedule.pretrain_epochs = " << c.schedule.pretrain_epochs << "\n"
    << "schedule.finetune_epochs = " << c.schedule.finetune_epochs << "\n"
    << "schedule.mel_weight = " << c.schedule.mel_weight << "\n"
    << "schedule.kl_weight = " << c.schedule.kl_weight << "\n"
    << "schedule.use_kl = " << (c.schedule.use_kl ? "true" : "false") << "\n"
    << "schedule.checkpoint_every = " << c.schedule.checkpoint_every << "\n";
  return o.str();
}

bool config_equal(const SystemConfig& a, const SystemConfig& b) {
  return serialize_config(a) == serialize_config(b);
}

uint64_t feature_config_hash(const SystemConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << c.sample_rate_hz << "|" << c.n_fft << "|" << c.hop_length << "|"
    << c.win_length << "|" << c.n_mels << "|" << c.d_emo << "|"
    << c.codebook_size << "|" << c.model.content_dim << "|"
    << c.model.content_lifter_lo << "|" << c.model.content_lifter_hi << "|"
    << c.seed;
  return fnv1a64(o.str());
}

}  // namespace promptevc
