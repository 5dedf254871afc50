#include "promptevc/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "promptevc/evalmetrics.hpp"
#include "promptevc/prosody.hpp"

namespace promptevc {

namespace {

constexpr double kGradClip = 5.0;

Mat row_from(const std::vector<double>& v, size_t at, size_t n) {
  Mat m = Mat::Zero(1, static_cast<Eigen::Index>(n));
  for (size_t i = 0; i < n && at + i < v.size(); ++i)
    m(0, static_cast<Eigen::Index>(i)) = v[at + i];
  return m;
}

}  // namespace

Trainer::Trainer(const SystemConfig& cfg, const DataCache& cache,
                 const std::string& init_ckpt)
    : cfg_(cfg), cache_(&cache), ps_(cfg.seed), rng_(cfg.seed, "trainer") {
  validate_config(cfg_);
  require(!cache.items.empty(), "trainer: empty data cache");

  if (!init_ckpt.empty()) {
    Checkpoint meta = load_checkpoint(init_ckpt, ps_);
    require(config_equal(meta.config, cfg_),
            "trainer: checkpoint config differs from the requested one");
    codebook_ = meta.codebook;
    speakers_ = meta.speakers;
    epoch_ = meta.epoch;
    step_ = meta.step;
  } else {
    // Codebook over every cached utterance so both phases share tokens.
    Eigen::Index total = 0;
    for (const auto& it : cache.items) total += it.feats.content.cols();
    Mat all(cache.items[0].feats.content.rows(), total);
    Eigen::Index at = 0;
    for (const auto& it : cache.items) {
      all.middleCols(at, it.feats.content.cols()) = it.feats.content;
      at += it.feats.content.cols();
    }
    codebook_ = build_codebook(all, cfg_.codebook_size, cfg_.seed);

    std::set<std::string> names;
    for (const auto& it : cache.items)
      names.insert(it.record.speaker_id.value_or("default"));
    speakers_.assign(names.begin(), names.end());
  }

  model_ = std::make_unique<PromptEvcModel>(cfg_, ps_);
  mel_ = std::make_unique<MelGraph>(cfg_);

  if (init_ckpt.empty()) {
    // Whitening stats for the mapper target, taken over the whole cache.
    Vec mu = Vec::Zero(cfg_.d_emo), m2 = Vec::Zero(cfg_.d_emo);
    for (const auto& it : cache.items) {
      mu += it.feats.e_ref;
      m2 += it.feats.e_ref.cwiseProduct(it.feats.e_ref);
    }
    double n = static_cast<double>(cache.items.size());
    mu /= n;
    Vec sd = (m2 / n - mu.cwiseProduct(mu)).cwiseMax(0.0).cwiseSqrt();
    model_->set_mapper_target_stats(mu, sd);
  }
}

LossReport Trainer::step(const CachedUtterance& item, bool with_mapper_loss,
                         double lr) {
  const auto& f = item.feats;
  int T = static_cast<int>(f.log_mel.cols());
  TokenRun runs = run_length_collapse(codebook_.tokenize(f.content));

  LossReport rep;
  nn::Graph g;

  nn::Var h_spk = model_->speaker_embedding(g, g.constant(f.log_mel));
  // During training the emotion side is conditioned on the reference
  // embedding; the mapper learns to reach it from the prompt.
  nn::Var h_emo = g.constant(f.e_ref);

  auto ts = model_->encode_text_side(g, runs.tokens, h_emo, h_spk,
                                     cfg_.optimizer.dropout, &rng_);
  nn::Var l_rhy, l_spk;
  if (model_->has_prosody_predictor())
    l_rhy = rhythm_loss(g, ts.dur_pred, runs.durations);

  nn::Var frame_hidden = model_->expand_tokens(g, ts.token_hidden, runs.durations);
  require(g.cols_of(frame_hidden) == T, "trainer: frame count mismatch");

  if (model_->has_prosody_predictor())
    l_spk = speaker_f0_loss(g, model_->predict_log_f0(g, frame_hidden), f.f0_hz);

  auto pr = model_->prior(g, frame_hidden);
  auto post = model_->posterior().apply(g, g.constant(f.lin_mag), h_spk, rng_);
  auto fl = model_->flow().forward(g, post.z, h_spk);
  nn::Var l_kl = kl_divergence_loss(g, post.mu, post.log_sigma, post.z, fl.z,
                                    fl.logdet, pr.mu, pr.log_sigma);

  // Decode a random latent segment; real/fake mels are both computed on
  // segment waveforms so their framing matches.
  int seg = std::min(cfg_.model.segment_frames, T);
  int start = T > seg ? static_cast<int>(rng_.randint(T - seg + 1)) : 0;
  nn::Var cond = model_->conditioning(g, h_emo, h_spk);
  nn::Var fake = model_->decoder().apply(g, g.cols(post.z, start, seg), cond);

  size_t n_req = static_cast<size_t>(seg) * static_cast<size_t>(cfg_.hop_length);
  Mat real_row = row_from(f.samples, static_cast<size_t>(start) *
                                         static_cast<size_t>(cfg_.hop_length),
                          n_req);
  nn::Var real_c = g.constant(real_row);

  nn::Var mel_fake = mel_->log_mel(g, fake);
  nn::Var mel_real = mel_->log_mel(g, real_c);
  nn::Var l_sp = g.scale(g.l1(mel_fake, g.stop_gradient(mel_real)),
                         cfg_.schedule.mel_weight);

  // Discriminator step on its own graph, against the current fake.
  {
    nn::Graph dg;
    auto d_real = model_->discriminators().apply(dg, dg.constant(real_row));
    auto d_fake = model_->discriminators().apply(dg, dg.constant(g.value(fake)));
    nn::Var l_d = lsgan_d_loss(dg, d_real, d_fake);
    rep.l_adv_d = dg.value(l_d)(0, 0);
    ps_.zero_grads();
    dg.backward(l_d);
    if (ps_.grads_finite()) {
      ps_.clip_grad_norm(kGradClip, PromptEvcModel::is_discriminator_param);
      ps_.adamw_step(cfg_.optimizer, lr, PromptEvcModel::is_discriminator_param);
    } else {
      ++nan_skips_;
    }
  }

  // Generator sees the just-updated critics.
  auto d_real2 = model_->discriminators().apply(g, real_c);
  auto d_fake2 = model_->discriminators().apply(g, fake);
  nn::Var l_adv_g = lsgan_g_loss(g, d_fake2);
  nn::Var l_fm = feature_matching_loss(g, d_real2, d_fake2);

  nn::Var l_pm;
  if (with_mapper_loss && model_->has_mapper()) {
    // Averaging several noise draws gives the little mapper a far less
    // noisy signal per step; it is cheap next to the waveform path.
    constexpr int kMapperDraws = 4;
    for (int i = 0; i < kMapperDraws; ++i) {
      nn::Var li = model_->mapper().train_loss(g, f.e_ref, item.e_txt, rng_);
      l_pm = i ? g.add(l_pm, li) : li;
    }
    l_pm = g.scale(l_pm, 1.0 / kMapperDraws);
  }

  nn::Var total = g.add(l_sp, g.add(l_adv_g, l_fm));
  if (l_rhy.valid()) total = g.add(total, l_rhy);
  if (l_spk.valid()) total = g.add(total, l_spk);
  if (l_pm.valid()) total = g.add(total, l_pm);
  if (cfg_.schedule.use_kl)
    total = g.add(total, g.scale(l_kl, cfg_.schedule.kl_weight));

  rep.l_sp = g.value(l_sp)(0, 0);
  rep.l_f = g.value(l_fm)(0, 0);
  rep.l_adv_g = g.value(l_adv_g)(0, 0);
  rep.l_kl = g.value(l_kl)(0, 0);
  if (l_rhy.valid()) rep.l_rhy = g.value(l_rhy)(0, 0);
  if (l_spk.valid()) rep.l_spk = g.value(l_spk)(0, 0);
  if (l_pm.valid()) rep.l_pm = g.value(l_pm)(0, 0);

  ps_.zero_grads();
  g.backward(total);
  auto gen_filter = [with_mapper_loss](const std::string& name) {
    if (PromptEvcModel::is_discriminator_param(name)) return false;
    if (PromptEvcModel::is_frozen_stat(name)) return false;
    if (!with_mapper_loss && PromptEvcModel::is_mapper_param(name)) return false;
    return true;
  };
  if (ps_.grads_finite()) {
    ps_.clip_grad_norm(kGradClip, gen_filter);
    ps_.adamw_step(cfg_.optimizer, lr, gen_filter);
  } else {
    ++nan_skips_;
  }
  return rep;
}

LossReport Trainer::run(const TrainOptions& opt) {
  bool finetune = opt.phase == "finetune";
  require(finetune || opt.phase == "pretrain",
          "unknown phase: " + opt.phase + " (expected pretrain or finetune)");
  int epochs = opt.epochs_override >= 0
                   ? opt.epochs_override
                   : (finetune ? cfg_.schedule.finetune_epochs
                               : cfg_.schedule.pretrain_epochs);

  std::vector<size_t> pool;
  for (size_t i = 0; i < cache_->items.size(); ++i)
    if (finetune || cache_->items[i].record.emotion == Emotion::kNeutral)
      pool.push_back(i);
  require(!pool.empty(), "no training items for phase " + opt.phase);

  namespace fs = std::filesystem;
  std::ofstream loss_log;
  if (!opt.out_dir.empty()) {
    fs::create_directories(opt.out_dir);
    loss_log.open((fs::path(opt.out_dir) / "loss_log.jsonl").string(),
                  std::ios::app);
  }

  auto save_snapshot = [&](const std::string& tag) {
    if (opt.out_dir.empty()) return;
    save_checkpoint(
        (fs::path(opt.out_dir) / ("ckpt_" + opt.phase + "_" + tag + ".pevc"))
            .string(),
        snapshot(opt.phase), ps_);
  };

  LossReport epoch_mean;
  for (int e = 0; e < epochs; ++e) {
    // Fisher-Yates with the trainer stream keeps runs reproducible.
    for (size_t i = pool.size(); i > 1; --i)
      std::swap(pool[i - 1], pool[static_cast<size_t>(rng_.randint(
                                 static_cast<int64_t>(i)))]);

    double lr = cfg_.optimizer.learning_rate *
                std::pow(cfg_.optimizer.lr_decay_per_epoch, epoch_);
    LossReport acc;
    for (size_t idx : pool) {
      LossReport rep = step(cache_->items[idx], finetune, lr);
      ++step_;
      acc.l_sp += rep.l_sp;
      acc.l_f += rep.l_f;
      acc.l_adv_g += rep.l_adv_g;
      acc.l_pm += rep.l_pm;
      acc.l_rhy += rep.l_rhy;
      acc.l_spk += rep.l_spk;
      acc.l_kl += rep.l_kl;
      acc.l_adv_d += rep.l_adv_d;
      if (opt.on_step) opt.on_step(step_, rep);
      if (loss_log.is_open()) {
        loss_log << "{\"step\":" << step_ << ",\"epoch\":" << epoch_
                 << ",\"phase\":\"" << opt.phase << "\",\"lr\":" << lr
                 << ",\"total\":" << rep.total(cfg_.schedule)
                 << ",\"l_sp\":" << rep.l_sp << ",\"l_f\":" << rep.l_f
                 << ",\"l_adv_g\":" << rep.l_adv_g << ",\"l_adv_d\":" << rep.l_adv_d
                 << ",\"l_pm\":" << rep.l_pm << ",\"l_rhy\":" << rep.l_rhy
                 << ",\"l_spk\":" << rep.l_spk << ",\"l_kl\":" << rep.l_kl
                 << "}\n";
      }
      if (cfg_.schedule.checkpoint_every > 0 &&
          step_ % cfg_.schedule.checkpoint_every == 0)
        save_snapshot("step" + std::to_string(step_));
    }
    double inv = 1.0 / static_cast<double>(pool.size());
    epoch_mean = acc;
    epoch_mean.l_sp *= inv;
    epoch_mean.l_f *= inv;
    epoch_mean.l_adv_g *= inv;
    epoch_mean.l_pm *= inv;
    epoch_mean.l_rhy *= inv;
    epoch_mean.l_spk *= inv;
    epoch_mean.l_kl *= inv;
    epoch_mean.l_adv_d *= inv;
    ++epoch_;
    if (!opt.quiet)
      std::cout << "[train] phase=" << opt.phase << " epoch=" << e + 1 << "/"
                << epochs << " lr=" << lr
                << " total=" << epoch_mean.total(cfg_.schedule)
                << " mel=" << epoch_mean.l_sp << " d=" << epoch_mean.l_adv_d
                << (nan_skips_ ? " nan_skips=" + std::to_string(nan_skips_) : "")
                << std::endl;
  }
  save_snapshot("final");
  return epoch_mean;
}

Checkpoint Trainer::snapshot(const std::string& phase) const {
  Checkpoint c;
  c.config = cfg_;
  c.phase = phase;
  c.epoch = epoch_;
  c.step = step_;
  c.codebook = codebook_;
  c.speakers = speakers_;
  c.extras["nan_skips"] = nan_skips_;
  return c;
}

ConvertResult convert_utterance(const PromptEvcModel& model, const Codebook& cb,
                                const FrameFeatures& source,
                                const std::string& prompt,
                                const Providers& providers, uint64_t seed) {
  const SystemConfig& cfg = model.config();
  require(prompt_allowed(prompt),
          "prompt mentions speaker identity, which conversion must preserve");
  RngStream rng(seed, "convert");

  Vec e_txt = providers.descriptor->embed(prompt);
  Vec h_emo_v = model.has_mapper() ? model.mapper().sample(e_txt, rng)
                                   : model.ablated_prompt_embedding(e_txt);

  TokenRun runs = run_length_collapse(cb.tokenize(source.content));

  nn::Graph g;
  nn::Var h_spk = model.speaker_embedding(g, g.constant(source.log_mel));
  nn::Var h_emo = g.constant(h_emo_v);
  auto ts = model.encode_text_side(g, runs.tokens, h_emo, h_spk);

  std::vector<int> durations;
  if (model.has_prosody_predictor()) {
    Vec pred = g.value(ts.dur_pred).row(0).transpose();
    durations = regulate_durations(pred);
  } else {
    durations.assign(runs.tokens.size(), PromptEvcModel::kFallbackDuration);
  }

  nn::Var frame_hidden = model.expand_tokens(g, ts.token_hidden, durations);
  auto pr = model.prior(g, frame_hidden);
  Mat mu = g.value(pr.mu);
  Mat log_sigma = g.value(pr.log_sigma);

  constexpr double kTemperature = 0.667;
  RngStream zr(seed, "convert:z");
  Mat eps = zr.normal_mat(static_cast<int>(mu.rows()), static_cast<int>(mu.cols()));
  Mat z_p = mu.array() + log_sigma.array().exp() * eps.array() * kTemperature;

  Mat z = model.flow().inverse(z_p, g.value(h_spk).col(0));
  nn::Var wave = model.decoder().apply(g, g.constant(z),
                                       model.conditioning(g, h_emo, h_spk));
  const Mat& w = g.value(wave);

  ConvertResult res;
  res.wave.sample_rate = cfg.sample_rate_hz;
  res.wave.samples.assign(w.data(), w.data() + w.size());
  res.durations = std::move(durations);
  res.h_emo = h_emo_v;
  res.feats = extract_features(res.wave.samples, cfg, providers);
  return res;
}

EvalSummary evaluate_model(const PromptEvcModel& model, const Codebook& cb,
                           const DataCache& train_cache,
                           const DataCache& eval_cache,
                           const Providers& providers, uint64_t seed,
                           std::ostream* log) {
  const SystemConfig& cfg = model.config();

  ToyAttributeClassifier clf;
  {
    std::vector<Vec> feats;
    std::vector<int> labels;
    for (const auto& it : train_cache.items) {
      feats.push_back(spectral_stat_features(it.feats.log_mel));
      labels.push_back(static_cast<int>(it.record.emotion));
    }
    clf.train(feats, labels, kNumEmotions, stream_hash(seed, "eval:clf"));
  }

  auto find_neutral_source = [&](const UtteranceRecord& r) -> const CachedUtterance* {
    for (const auto& it : eval_cache.items)
      if (it.record.emotion == Emotion::kNeutral &&
          it.record.speaker_id == r.speaker_id &&
          it.record.transcript == r.transcript)
        return &it;
    return nullptr;
  };

  EvalSummary s;
  int rmse_n = 0;
  for (const auto& item : eval_cache.items) {
    if (item.record.emotion == Emotion::kNeutral) continue;
    const CachedUtterance* src = find_neutral_source(item.record);
    if (!src) continue;

    ConvertResult conv =
        convert_utterance(model, cb, src->feats, item.prompt, providers,
                          stream_hash(seed, item.record.id));

    double mcd = mcd_db(conv.feats.log_mel, item.feats.log_mel);
    double rmse = rmse_log_f0(conv.feats.f0_hz, item.feats.f0_hz);
    std::string hyp = recognize_toy_transcript(conv.feats.log_mel, cfg);
    double cer = character_error_rate(src->record.transcript, hyp);
    int pred = clf.predict(spectral_stat_features(conv.feats.log_mel));
    bool agree = pred == static_cast<int>(item.record.emotion);
    double gap = std::abs(mean_log_f0(conv.feats.f0_hz) -
                          mean_log_f0(src->feats.f0_hz));

    s.mcd_db += mcd;
    if (std::isfinite(rmse)) {
      s.rmse_log_f0 += rmse;
      ++rmse_n;
    }
    s.cer_percent += cer;
    s.emotion_agreement += agree ? 1.0 : 0.0;
    s.speaker_logf0_gap += std::isfinite(gap) ? gap : 10.0;
    ++s.n_items;

    if (log)
      *log << "{\"id\":\"" << item.record.id << "\",\"mcd_db\":" << mcd
           << ",\"rmse_log_f0\":" << rmse << ",\"cer\":" << cer
           << ",\"pred_emotion\":\"" << emotion_name(static_cast<Emotion>(pred))
           << "\",\"want_emotion\":\"" << emotion_name(item.record.emotion)
           << "\",\"logf0_gap\":" << gap << ",\"hyp\":\"" << hyp << "\"}\n";
  }
  require(s.n_items > 0, "evaluate: no usable (source, target) pairs");
  double inv = 1.0 / s.n_items;
  s.mcd_db *= inv;
  s.rmse_log_f0 = rmse_n ? s.rmse_log_f0 / rmse_n
                         : std::numeric_limits<double>::quiet_NaN();
  s.cer_percent *= inv;
  s.emotion_agreement *= inv;
  s.speaker_logf0_gap *= inv;
  return s;
}

std::vector<AblationArm> parse_ablation_flags(const std::string& csv) {
  std::vector<AblationArm> arms;
  arms.push_back({"baseline", AblationFlags{}});
  std::istringstream ss(csv);
  std::string flag;
  while (std::getline(ss, flag, ',')) {
    if (flag.empty()) continue;
    AblationArm arm;
    arm.name = flag;
    if (flag == "no_prompt_mapper")
      arm.flags.no_prompt_mapper = true;
    else if (flag == "no_prosody_predictor")
      arm.flags.no_prosody_predictor = true;
    else if (flag == "no_speaker_encoder")
      arm.flags.no_speaker_encoder = true;
    else
      fail("unknown ablation flag: " + flag);
    arms.push_back(std::move(arm));
  }
  return arms;
}

std::vector<AblationReport> run_ablation(const SystemConfig& base,
                                         const DataCache& train_cache,
                                         const DataCache& eval_cache,
                                         const Providers& providers,
                                         const TrainOptions& opt,
                                         const std::vector<AblationArm>& arms) {
  std::vector<AblationReport> out;
  for (const auto& arm : arms) {
    SystemConfig cfg = base;
    cfg.ablation = arm.flags;

    Trainer trainer(cfg, train_cache);
    TrainOptions phase_opt = opt;
    phase_opt.out_dir.clear();  // arms stay in memory
    phase_opt.phase = "pretrain";
    trainer.run(phase_opt);
    phase_opt.phase = "finetune";
    trainer.run(phase_opt);

    AblationReport rep;
    rep.arm = arm.name;
    rep.summary = evaluate_model(trainer.model(), trainer.codebook(),
                                 train_cache, eval_cache, providers, base.seed);
    out.push_back(std::move(rep));
    if (!opt.quiet)
      std::cout << "[ablate] arm=" << rep.arm << " mcd=" << rep.summary.mcd_db
                << " rmse_logf0=" << rep.summary.rmse_log_f0
                << " agree=" << rep.summary.emotion_agreement
                << " logf0_gap=" << rep.summary.speaker_logf0_gap << std::endl;
  }
  return out;
}

}  // namespace promptevc
