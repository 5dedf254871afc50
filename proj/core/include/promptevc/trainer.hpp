#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "promptevc/audio.hpp"
#include "promptevc/checkpoint.hpp"
#include "promptevc/dataprep.hpp"
#include "promptevc/model.hpp"

namespace promptevc {

struct TrainOptions {
  std::string phase = "pretrain";  // "pretrain" | "finetune"
  std::string out_dir;             // checkpoints + loss log; empty => no files
  int epochs_override = -1;        // >= 0 replaces the schedule's epoch count
  bool quiet = false;
  std::function<void(int64_t, const LossReport&)> on_step;  // test hook
};

// Owns the parameter store, model, codebook and the optimization loop.
// Pretraining runs on the neutral subset without the prompt-mapper loss;
// finetuning runs on everything with it.
class Trainer {
 public:
  // A non-empty init_ckpt warm-starts parameters, codebook and counters.
  Trainer(const SystemConfig& cfg, const DataCache& cache,
          const std::string& init_ckpt = "");

  // Runs one phase; returns the mean loss over the final epoch.
  LossReport run(const TrainOptions& opt);

  // Single optimization step on one utterance (exposed for tests).
  LossReport step(const CachedUtterance& item, bool with_mapper_loss, double lr);

  Checkpoint snapshot(const std::string& phase) const;

  PromptEvcModel& model() { return *model_; }
  nn::ParamStore& params() { return ps_; }
  const Codebook& codebook() const { return codebook_; }
  const std::vector<std::string>& speakers() const { return speakers_; }
  int64_t global_step() const { return step_; }
  int epoch() const { return epoch_; }
  int nan_skips() const { return nan_skips_; }

 private:
  SystemConfig cfg_;
  const DataCache* cache_;
  nn::ParamStore ps_;
  Codebook codebook_;
  std::vector<std::string> speakers_;
  std::unique_ptr<PromptEvcModel> model_;
  std::unique_ptr<MelGraph> mel_;
  RngStream rng_;
  int64_t step_ = 0;
  int epoch_ = 0;
  int nan_skips_ = 0;
};

struct ConvertResult {
  Wave wave;
  FrameFeatures feats;  // features of the converted audio
  std::vector<int> durations;
  Vec h_emo;
};

// Full inference path: prompt -> emotion embedding -> text side ->
// durations -> prior latents -> inverse flow -> decoder.
ConvertResult convert_utterance(const PromptEvcModel& model, const Codebook& cb,
                                const FrameFeatures& source,
                                const std::string& prompt,
                                const Providers& providers, uint64_t seed);

struct EvalSummary {
  double mcd_db = 0;
  double rmse_log_f0 = 0;
  double cer_percent = 0;
  double emotion_agreement = 0;  // fraction in [0, 1]
  double speaker_logf0_gap = 0;  // |mean log f0, converted vs source|
  int n_items = 0;
};

// Converts every non-neutral eval item from its parallel neutral source and
// scores against the recorded target. Per-item rows go to `log` as JSONL.
EvalSummary evaluate_model(const PromptEvcModel& model, const Codebook& cb,
                           const DataCache& train_cache,
                           const DataCache& eval_cache,
                           const Providers& providers, uint64_t seed = 1,
                           std::ostream* log = nullptr);

struct AblationArm {
  std::string name;  // "baseline" or the flag that is switched off
  AblationFlags flags;
};

// "no_prompt_mapper,no_speaker_encoder" -> baseline + one arm per flag.
std::vector<AblationArm> parse_ablation_flags(const std::string& csv);

struct AblationReport {
  std::string arm;
  EvalSummary summary;
};

// Trains each arm from scratch with an identical budget, then evaluates.
std::vector<AblationReport> run_ablation(const SystemConfig& base,
                                         const DataCache& train_cache,
                                         const DataCache& eval_cache,
                                         const Providers& providers,
                                         const TrainOptions& opt,
                                         const std::vector<AblationArm>& arms);

}  // namespace promptevc
