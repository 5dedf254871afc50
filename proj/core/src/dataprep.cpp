#include "promptevc/dataprep.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "io_util.hpp"
#include "promptevc/audio.hpp"
#include "promptevc/dsp.hpp"
#include "promptevc/rng.hpp"
#include "promptevc/speaker.hpp"

namespace promptevc {

using nlohmann::json;

std::vector<UtteranceRecord> load_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("cannot open manifest: " + path);
  std::vector<UtteranceRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      fail("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    UtteranceRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.wav_path = j.at("wav").get<std::string>();
      r.transcript = j.at("text").get<std::string>();
      r.emotion = emotion_from_name(j.at("emotion").get<std::string>());
    } catch (const json::exception& e) {
      fail("manifest line " + std::to_string(lineno) + ": " + e.what());
    }
    if (j.contains("speaker")) r.speaker_id = j["speaker"].get<std::string>();
    if (j.contains("score")) r.emotion_score = j["score"].get<double>();
    if (j.contains("intensity"))
      r.intensity = level_from_name(j["intensity"].get<std::string>());
    out.push_back(std::move(r));
  }
  require(!out.empty(), "manifest is empty: " + path);
  return out;
}

void save_manifest(const std::string& path,
                   const std::vector<UtteranceRecord>& records) {
  std::ofstream f(path);
  if (!f) fail("cannot write manifest: " + path);
  for (const auto& r : records) {
    json j{{"id", r.id},
           {"wav", r.wav_path},
           {"text", r.transcript},
           {"emotion", emotion_name(r.emotion)}};
    if (r.speaker_id) j["speaker"] = *r.speaker_id;
    if (r.emotion_score) j["score"] = *r.emotion_score;
    if (r.intensity) j["intensity"] = level_name(*r.intensity);
    f << j.dump() << "\n";
  }
}

uint64_t manifest_digest(const std::vector<UtteranceRecord>& records) {
  uint64_t h = kFnvOffset;
  for (const auto& r : records) {
    h = fnv1a64(r.id, h);
    h = fnv1a64(r.wav_path, h);
    h = fnv1a64(r.transcript, h);
    h = fnv1a64(emotion_name(r.emotion), h);
    if (r.speaker_id) h = fnv1a64(*r.speaker_id, h);
  }
  return h;
}

RankerResult train_emotion_ranker(const Mat& feats,
                                  const std::vector<bool>& is_emotional,
                                  uint64_t seed, int iters) {
  int n = static_cast<int>(feats.cols());
  require(static_cast<int>(is_emotional.size()) == n,
          "ranker: label count mismatch");
  std::vector<int> emo, neu;
  for (int i = 0; i < n; ++i) (is_emotional[static_cast<size_t>(i)] ? emo : neu).push_back(i);
  require(!emo.empty() && !neu.empty(), "ranker: needs both emotional and neutral clips");

  RngStream rng(seed, "ranker");
  Vec w = rng.normal_mat(static_cast<int>(feats.rows()), 1, 0.01).col(0);
  constexpr double kSimWeight = 0.1;
  constexpr double kMaxNorm = 10.0;

  for (int it = 0; it < iters; ++it) {
    Vec grad = Vec::Zero(w.size());
    // Ordering pairs: every emotional clip should beat every neutral one.
    for (int e : emo) {
      for (int u : neu) {
        Vec d = feats.col(e) - feats.col(u);
        if (w.dot(d) < 1.0) grad -= d;
      }
    }
    // Similarity pairs: adjacent same-label clips score alike.
    auto sim = [&](const std::vector<int>& group) {
      for (size_t i = 0; i + 1 < group.size(); ++i) {
        Vec d = feats.col(group[i]) - feats.col(group[i + 1]);
        grad += 2.0 * kSimWeight * w.dot(d) * d;
      }
    };
    sim(emo);
    sim(neu);
    double step = 0.05 / std::sqrt(static_cast<double>(it + 1));
    w -= step * grad / static_cast<double>(emo.size() * neu.size());
    double norm = w.norm();
    if (norm > kMaxNorm) w *= kMaxNorm / norm;
  }

  RankerResult res;
  res.w = w;
  res.scores.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) res.scores[static_cast<size_t>(i)] = w.dot(feats.col(i));
  return res;
}

std::vector<Level> bucket_by_score(const std::vector<double>& scores,
                                   const std::vector<std::string>& ids) {
  size_t n = scores.size();
  require(ids.size() == n, "bucketing: id count mismatch");
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return ids[a] < ids[b];
  });
  auto edge = static_cast<size_t>(std::lround(0.3 * static_cast<double>(n)));
  std::vector<Level> out(n, Level::kMedium);
  for (size_t r = 0; r < n; ++r) {
    if (r < edge)
      out[order[r]] = Level::kHigh;
    else if (r >= n - edge)
      out[order[r]] = Level::kLow;
  }
  return out;
}

void annotate_intensity(std::vector<UtteranceRecord>& records,
                        const std::vector<Vec>& stat_feats, uint64_t seed) {
  require(records.size() == stat_feats.size(), "annotate: feature count mismatch");
  std::vector<size_t> neutral;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].emotion == Emotion::kNeutral) {
      neutral.push_back(i);
      records[i].intensity = Level::kMedium;
    }
  if (neutral.empty()) return;  // nothing to rank against

  for (int e = 1; e < kNumEmotions; ++e) {
    std::vector<size_t> members;
    for (size_t i = 0; i < records.size(); ++i)
      if (records[i].emotion == static_cast<Emotion>(e)) members.push_back(i);
    if (members.empty()) continue;

    int d = static_cast<int>(stat_feats[members[0]].size());
    Mat feats(d, static_cast<int>(members.size() + neutral.size()));
    std::vector<bool> flags;
    int col = 0;
    for (size_t i : members) {
      feats.col(col++) = stat_feats[i];
      flags.push_back(true);
    }
    for (size_t i : neutral) {
      feats.col(col++) = stat_feats[i];
      flags.push_back(false);
    }
    auto ranked = train_emotion_ranker(
        feats, flags, stream_hash(seed, std::string("rar:") + emotion_name(static_cast<Emotion>(e))));

    std::vector<double> scores(members.size());
    std::vector<std::string> ids(members.size());
    for (size_t i = 0; i < members.size(); ++i) {
      scores[i] = ranked.scores[i];
      ids[i] = records[members[i]].id;
      records[members[i]].emotion_score = scores[i];
    }
    auto levels = bucket_by_score(scores, ids);
    for (size_t i = 0; i < members.size(); ++i)
      records[members[i]].intensity = levels[i];
  }
}

Tempo relative_tempo(double duration_s, double neutral_duration_s) {
  if (neutral_duration_s <= 0.0) return Tempo::kEven;
  double ratio = duration_s / neutral_duration_s;
  if (ratio < 0.9) return Tempo::kFaster;
  if (ratio > 1.1) return Tempo::kSlower;
  return Tempo::kEven;
}

// --- prompt templating ---

namespace {

const std::vector<std::string>& builtin_templates() {
  static const std::vector<std::string> t = {
      "Convert this into a {adv}{emotion} tone with a {tempo} tempo",
      "Please say it with a {adv}{emotion} feeling and a {tempo} pace",
      "Give the line a {adv}{emotion} mood at a {tempo} speed",
      "Speak in a {adv}{emotion} manner and keep the delivery {tempo}",
  };
  return t;
}

std::string adv_for(Level l) {
  switch (l) {
    case Level::kLow: return "slightly ";
    case Level::kMedium: return "";
    case Level::kHigh: return "very ";
  }
  return "";
}

std::string tempo_word(Tempo t) {
  switch (t) {
    case Tempo::kSlower: return "slower";
    case Tempo::kEven: return "steady";
    case Tempo::kFaster: return "faster";
  }
  return "steady";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

}  // namespace

PromptTemplater PromptTemplater::builtin() {
  PromptTemplater t;
  t.templates_ = builtin_templates();
  return t;
}

PromptTemplater PromptTemplater::from_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail("cannot open template file: " + path);
  PromptTemplater t;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    t.templates_.push_back(line);
  }
  require(!t.templates_.empty(), "template file has no templates: " + path);
  return t;
}

std::string PromptTemplater::render(int index, const StyleFactors& f) const {
  require(index >= 0 && index < count(), "template index out of range");
  std::string s = templates_[static_cast<size_t>(index)];
  replace_all(s, "{adv}", adv_for(f.intensity));
  replace_all(s, "{emotion}", emotion_name(f.emotion));
  replace_all(s, "{tempo}", tempo_word(f.tempo));
  require(prompt_allowed(s), "rendered prompt hits the deny list: " + s);
  return s;
}

std::string PromptTemplater::render_seeded(const StyleFactors& f, uint64_t seed,
                                           const std::string& salt) const {
  RngStream rng(seed, "prompt:" + salt);
  return render(static_cast<int>(rng.randint(count())), f);
}

const std::vector<std::string>& prompt_deny_list() {
  static const std::vector<std::string> deny = {
      "man",   "woman",     "male",     "female", "boy",       "girl",
      "he",    "she",       "his",      "her",    "gender",    "masculine",
      "feminine", "lady",   "gentleman"};
  return deny;
}

bool prompt_allowed(const std::string& prompt) {
  auto words = tokenize_words(prompt);
  for (const auto& w : words)
    for (const auto& d : prompt_deny_list())
      if (w == d) return false;
  return true;
}

// --- feature extraction and cache ---

FrameFeatures extract_features(const std::vector<double>& samples,
                               const SystemConfig& cfg,
                               const Providers& providers) {
  static thread_local struct {
    int n_fft = -1, hop = -1, win = -1, sr = -1, mels = -1;
    StftBasis basis;
    Mat mel_w;
  } cacheb;
  if (cacheb.n_fft != cfg.n_fft || cacheb.hop != cfg.hop_length ||
      cacheb.win != cfg.win_length || cacheb.sr != cfg.sample_rate_hz ||
      cacheb.mels != cfg.n_mels) {
    cacheb.basis = make_stft_basis(cfg.n_fft, cfg.hop_length, cfg.win_length);
    cacheb.mel_w = mel_filterbank(cfg.sample_rate_hz, cfg.n_fft, cfg.n_mels);
    cacheb.n_fft = cfg.n_fft;
    cacheb.hop = cfg.hop_length;
    cacheb.win = cfg.win_length;
    cacheb.sr = cfg.sample_rate_hz;
    cacheb.mels = cfg.n_mels;
  }

  FrameFeatures f;
  f.samples = samples;
  f.lin_mag = stft_magnitude(samples, cacheb.basis);
  f.log_mel = log_compress(cacheb.mel_w * f.lin_mag);
  f.f0_hz = track_f0(samples, cfg.sample_rate_hz, cfg.hop_length);
  f.content = providers.content->features(f.log_mel);
  f.e_ref = providers.emotion->embed(f.log_mel);
  return f;
}

DataCache prepare_cache(const std::vector<UtteranceRecord>& records,
                        const SystemConfig& cfg, const Providers& providers) {
  DataCache cache;
  cache.manifest_hash = manifest_digest(records);
  cache.feature_hash = feature_config_hash(cfg);

  std::vector<UtteranceRecord> annotated = records;
  std::vector<Vec> stat_feats;
  std::vector<FrameFeatures> feats;
  feats.reserve(records.size());
  for (const auto& r : annotated) {
    Wave w = read_wav(r.wav_path);
    w = resample(w, cfg.sample_rate_hz);
    normalize_peak(w);
    require(static_cast<int>(w.samples.size()) >= cfg.n_fft,
            "utterance too short: " + r.id);
    feats.push_back(extract_features(w.samples, cfg, providers));
    stat_feats.push_back(spectral_stat_features(feats.back().log_mel));
  }

  annotate_intensity(annotated, stat_feats, cfg.seed);

  // Parallel neutral duration per (speaker, text) for tempo wording.
  auto neutral_duration = [&](const UtteranceRecord& r) -> double {
    for (size_t i = 0; i < annotated.size(); ++i) {
      const auto& o = annotated[i];
      if (o.emotion == Emotion::kNeutral && o.transcript == r.transcript &&
          o.speaker_id == r.speaker_id)
        return static_cast<double>(feats[i].samples.size()) / cfg.sample_rate_hz;
    }
    return 0.0;
  };

  PromptTemplater templater = PromptTemplater::builtin();
  for (size_t i = 0; i < annotated.size(); ++i) {
    const auto& r = annotated[i];
    CachedUtterance item;
    item.record = r;
    item.feats = std::move(feats[i]);
    StyleFactors style;
    style.emotion = r.emotion;
    style.intensity = r.intensity.value_or(Level::kMedium);
    double dur = static_cast<double>(item.feats.samples.size()) / cfg.sample_rate_hz;
    style.tempo = r.emotion == Emotion::kNeutral
                      ? Tempo::kEven
                      : relative_tempo(dur, neutral_duration(r));
    item.prompt = templater.render_seeded(style, cfg.seed, r.id);
    item.e_txt = providers.descriptor->embed(item.prompt);
    cache.items.push_back(std::move(item));
  }
  return cache;
}

namespace {
constexpr char kCacheMagic[8] = {'P', 'E', 'V', 'C', 'A', 'C', 'H', '1'};
}

void save_cache(const std::string& path, const DataCache& cache) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot write cache: " + path);
  f.write(kCacheMagic, 8);
  io::write_u64(f, cache.manifest_hash);
  io::write_u64(f, cache.feature_hash);
  io::write_u64(f, cache.items.size());
  for (const auto& it : cache.items) {
    io::write_string(f, it.record.id);
    io::write_string(f, it.record.wav_path);
    io::write_string(f, it.record.transcript);
    io::write_string(f, emotion_name(it.record.emotion));
    io::write_string(f, it.record.speaker_id.value_or(""));
    io::write_f64(f, it.record.emotion_score.value_or(
                         std::numeric_limits<double>::quiet_NaN()));
    io::write_string(f, it.record.intensity ? level_name(*it.record.intensity) : "");
    io::write_string(f, it.prompt);
    io::write_vec(f, it.e_txt);
    io::write_doubles(f, it.feats.samples);
    io::write_mat(f, it.feats.log_mel);
    io::write_mat(f, it.feats.lin_mag);
    io::write_vec(f, it.feats.f0_hz);
    io::write_mat(f, it.feats.content);
    io::write_vec(f, it.feats.e_ref);
  }
  require(f.good(), "cache write failed: " + path);
}

DataCache load_cache(const std::string& path, const SystemConfig& cfg,
                     bool verify) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open cache: " + path);
  char magic[8];
  f.read(magic, 8);
  require(std::equal(magic, magic + 8, kCacheMagic), "not a feature cache: " + path);
  DataCache cache;
  cache.manifest_hash = io::read_u64(f);
  cache.feature_hash = io::read_u64(f);
  if (verify)
    require(cache.feature_hash == feature_config_hash(cfg),
            "cache was built with different feature settings: " + path);
  uint64_t n = io::read_u64(f);
  require(n < (1u << 20), "cache: unreasonable item count");
  for (uint64_t i = 0; i < n; ++i) {
    CachedUtterance it;
    it.record.id = io::read_string(f);
    it.record.wav_path = io::read_string(f);
    it.record.transcript = io::read_string(f);
    it.record.emotion = emotion_from_name(io::read_string(f));
    std::string spk = io::read_string(f);
    if (!spk.empty()) it.record.speaker_id = spk;
    double score = io::read_f64(f);
    if (!std::isnan(score)) it.record.emotion_score = score;
    std::string lvl = io::read_string(f);
    if (!lvl.empty()) it.record.intensity = level_from_name(lvl);
    it.prompt = io::read_string(f);
    it.e_txt = io::read_vec(f);
    it.feats.samples = io::read_doubles(f);
    it.feats.log_mel = io::read_mat(f);
    it.feats.lin_mag = io::read_mat(f);
    it.feats.f0_hz = io::read_vec(f);
    it.feats.content = io::read_mat(f);
    it.feats.e_ref = io::read_vec(f);
    cache.items.push_back(std::move(it));
  }
  require(f.good(), "cache truncated: " + path);
  return cache;
}

}  // namespace promptevc
