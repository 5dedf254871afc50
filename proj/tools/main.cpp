#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "promptevc/audio.hpp"
#include "promptevc/checkpoint.hpp"
#include "promptevc/dataprep.hpp"
#include "promptevc/evalmetrics.hpp"
#include "promptevc/plot.hpp"
#include "promptevc/toygen.hpp"
#include "promptevc/trainer.hpp"

namespace fs = std::filesystem;
using namespace promptevc;

namespace {

SystemConfig config_from(const std::string& path) {
  SystemConfig cfg = path.empty() ? SystemConfig{} : load_config(path);
  validate_config(cfg);
  return cfg;
}

// Eval sets may arrive as a prepared cache or as a raw manifest.
DataCache cache_from(const std::string& path, const SystemConfig& cfg,
                     const Providers& providers) {
  if (path.size() > 6 && path.substr(path.size() - 6) == ".jsonl")
    return prepare_cache(load_manifest(path), cfg, providers);
  return load_cache(path, cfg);
}

FrameFeatures features_from_wav(const std::string& path,
                                const SystemConfig& cfg,
                                const Providers& providers) {
  Wave w = read_wav(path);
  w = resample(w, cfg.sample_rate_hz);
  normalize_peak(w);
  return extract_features(w.samples, cfg, providers);
}

void print_summary(const EvalSummary& s) {
  std::cout << "{\"n_items\":" << s.n_items << ",\"mcd_db\":" << s.mcd_db
            << ",\"rmse_log_f0\":" << s.rmse_log_f0
            << ",\"cer_percent\":" << s.cer_percent
            << ",\"emotion_agreement\":" << s.emotion_agreement
            << ",\"speaker_logf0_gap\":" << s.speaker_logf0_gap << "}"
            << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"prompt-driven emotional voice conversion"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, cache_path, out_path, ckpt_path;
  std::string phase = "pretrain", prompt, eval_set, train_cache_path;
  std::string flags_csv = "no_prompt_mapper,no_prosody_predictor,no_speaker_encoder";
  std::string init_ckpt, out_dir = "runs";
  std::vector<std::string> in_wavs;
  uint64_t seed = 1234;
  int epochs = -1;
  int toy_rate = 16000;
  bool quiet = false;

  auto* gen = app.add_subcommand("gen-toy", "write the synthetic toy corpus");
  gen->add_option("--out", out_path, "output directory")->required();
  gen->add_option("--sample-rate", toy_rate, "sample rate in Hz");
  gen->add_option("--seed", seed, "corpus seed");
  gen->callback([&] {
    ToySpec spec;
    spec.out_dir = out_path;
    spec.sample_rate = toy_rate;
    spec.seed = seed;
    ToyCorpus corpus = generate_toy_corpus(spec);
    std::cout << "wrote " << corpus.train.size() << " train and "
              << corpus.eval.size() << " eval utterances under " << out_path
              << std::endl;
  });

  auto* prep = app.add_subcommand("prepare", "extract features into a cache");
  prep->add_option("manifest", manifest_path, "JSONL manifest")->required();
  prep->add_option("--out", out_path, "cache file to write")->required();
  prep->add_option("--config", config_path, "config file");
  prep->callback([&] {
    SystemConfig cfg = config_from(config_path);
    Providers providers = make_default_providers(cfg);
    DataCache cache = prepare_cache(load_manifest(manifest_path), cfg, providers);
    save_cache(out_path, cache);
    std::cout << "cached " << cache.items.size() << " utterances to "
              << out_path << std::endl;
  });

  auto* train = app.add_subcommand("train", "run one training phase");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--phase", phase, "pretrain | finetune")->required();
  train->add_option("--cache", cache_path, "prepared feature cache")->required();
  train->add_option("--init", init_ckpt, "checkpoint to warm-start from");
  train->add_option("--out", out_dir, "run directory for checkpoints and logs");
  train->add_option("--epochs", epochs, "override the scheduled epoch count");
  train->add_flag("--quiet", quiet, "suppress per-epoch lines");
  train->callback([&] {
    SystemConfig cfg = config_from(config_path);
    DataCache cache = load_cache(cache_path, cfg);
    Trainer trainer(cfg, cache, init_ckpt);
    TrainOptions opt;
    opt.phase = phase;
    opt.out_dir = out_dir;
    opt.epochs_override = epochs;
    opt.quiet = quiet;
    LossReport last = trainer.run(opt);
    std::cout << "final mean total " << last.total(cfg.schedule) << " after "
              << trainer.global_step() << " steps" << std::endl;
  });

  auto* conv = app.add_subcommand("convert", "convert one utterance");
  conv->add_option("--ckpt", ckpt_path, "trained checkpoint")->required();
  conv->add_option("--in", manifest_path, "source wav")->required();
  conv->add_option("--prompt", prompt, "style prompt text")->required();
  conv->add_option("--seed", seed, "sampling seed");
  conv->add_option("--out", out_path, "converted wav")->required();
  conv->callback([&] {
    nn::ParamStore ps(1);
    Checkpoint ckpt = load_checkpoint(ckpt_path, ps);
    PromptEvcModel model(ckpt.config, ps);
    Providers providers = make_default_providers(ckpt.config);
    FrameFeatures src = features_from_wav(manifest_path, ckpt.config, providers);
    ConvertResult res = convert_utterance(model, ckpt.codebook, src, prompt,
                                          providers, seed);
    write_wav(out_path, res.wave);
    std::cout << "wrote " << res.wave.samples.size() << " samples ("
              << res.wave.duration_seconds() << " s) to " << out_path
              << std::endl;
  });

  auto* abl = app.add_subcommand("ablate", "train and score ablation arms");
  abl->add_option("--flags", flags_csv, "comma-separated module flags");
  abl->add_option("--config", config_path, "config file");
  abl->add_option("--cache", cache_path, "training cache")->required();
  abl->add_option("--eval-set", eval_set, "eval cache or manifest")->required();
  abl->add_option("--epochs", epochs, "per-phase epoch override");
  abl->add_option("--out", out_path, "also write the report as JSONL");
  abl->add_flag("--quiet", quiet, "suppress progress lines");
  abl->callback([&] {
    SystemConfig cfg = config_from(config_path);
    Providers providers = make_default_providers(cfg);
    DataCache train_cache = load_cache(cache_path, cfg);
    DataCache eval_cache = cache_from(eval_set, cfg, providers);
    TrainOptions opt;
    opt.epochs_override = epochs;
    opt.quiet = quiet;
    auto reports = run_ablation(cfg, train_cache, eval_cache, providers, opt,
                                parse_ablation_flags(flags_csv));
    std::ofstream out_file;
    if (!out_path.empty()) out_file.open(out_path);
    for (const auto& r : reports) {
      std::ostringstream row;
      row << "{\"arm\":\"" << r.arm << "\",\"mcd_db\":" << r.summary.mcd_db
          << ",\"rmse_log_f0\":" << r.summary.rmse_log_f0
          << ",\"cer_percent\":" << r.summary.cer_percent
          << ",\"emotion_agreement\":" << r.summary.emotion_agreement
          << ",\"speaker_logf0_gap\":" << r.summary.speaker_logf0_gap << "}";
      std::cout << row.str() << std::endl;
      if (out_file.is_open()) out_file << row.str() << "\n";
    }
  });

  auto* eval = app.add_subcommand("evaluate", "score a checkpoint on a set");
  eval->add_option("--ckpt", ckpt_path, "trained checkpoint")->required();
  eval->add_option("--set", eval_set, "eval cache or manifest")->required();
  eval->add_option("--train-cache", train_cache_path,
                   "cache for fitting the attribute classifier "
                   "(defaults to the eval set)");
  eval->add_option("--seed", seed, "sampling seed");
  eval->callback([&] {
    nn::ParamStore ps(1);
    Checkpoint ckpt = load_checkpoint(ckpt_path, ps);
    PromptEvcModel model(ckpt.config, ps);
    Providers providers = make_default_providers(ckpt.config);
    DataCache eval_cache = cache_from(eval_set, ckpt.config, providers);
    DataCache train_cache =
        train_cache_path.empty() ? eval_cache
                                 : load_cache(train_cache_path, ckpt.config);
    EvalSummary s = evaluate_model(model, ckpt.codebook, train_cache,
                                   eval_cache, providers, seed, &std::cout);
    print_summary(s);
  });

  auto* plot = app.add_subcommand("plot-mel", "render spectrograms to a PNG");
  plot->add_option("--in", in_wavs, "wav files, one panel each")->required();
  plot->add_option("--out", out_path, "png file")->required();
  plot->add_option("--config", config_path, "config file");
  plot->callback([&] {
    SystemConfig cfg = config_from(config_path);
    Providers providers = make_default_providers(cfg);
    std::vector<MelPanel> panels;
    for (const auto& wav : in_wavs) {
      FrameFeatures f = features_from_wav(wav, cfg, providers);
      panels.push_back({f.log_mel, f.f0_hz});
      std::cout << "panel " << panels.size() << ": " << wav << " ("
                << f.log_mel.cols() << " frames)" << std::endl;
    }
    Image img = render_mel_image(panels, cfg);
    write_png(out_path, img);
    std::cout << "wrote " << img.width << "x" << img.height << " png to "
              << out_path << std::endl;
  });

  try {
    CLI11_PARSE(app, argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
