#include "promptevc/evalmetrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "promptevc/dsp.hpp"
#include "promptevc/rng.hpp"
#include "promptevc/toygen.hpp"

namespace promptevc {

DtwResult dtw_align(const Mat& a, const Mat& b) {
  require(a.rows() == b.rows(), "dtw: feature dims differ");
  int n = static_cast<int>(a.cols()), m = static_cast<int>(b.cols());
  require(n > 0 && m > 0, "dtw: empty input");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Mat acc = Mat::Constant(n, m, kInf);
  Eigen::Matrix<int8_t, Eigen::Dynamic, Eigen::Dynamic> from(n, m);

  auto cost = [&](int i, int j) { return (a.col(i) - b.col(j)).norm(); };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      double c = cost(i, j);
      if (i == 0 && j == 0) {
        acc(0, 0) = c;
        from(0, 0) = 0;
        continue;
      }
      double best = kInf;
      int8_t dir = 0;
      if (i > 0 && j > 0 && acc(i - 1, j - 1) < best) { best = acc(i - 1, j - 1); dir = 3; }
      if (i > 0 && acc(i - 1, j) < best) { best = acc(i - 1, j); dir = 1; }
      if (j > 0 && acc(i, j - 1) < best) { best = acc(i, j - 1); dir = 2; }
      acc(i, j) = best + c;
      from(i, j) = dir;
    }
  }

  DtwResult res;
  res.cost = acc(n - 1, m - 1);
  int i = n - 1, j = m - 1;
  while (true) {
    res.path.emplace_back(i, j);
    int8_t dir = from(i, j);
    if (dir == 0) break;
    if (dir == 1) --i;
    else if (dir == 2) --j;
    else { --i; --j; }
  }
  std::reverse(res.path.begin(), res.path.end());
  return res;
}

double mcd_db(const Mat& log_mel_a, const Mat& log_mel_b, bool align) {
  require(log_mel_a.rows() == log_mel_b.rows(), "mcd: mel dims differ");
  int n_mels = static_cast<int>(log_mel_a.rows());
  require(n_mels > 14, "mcd: needs at least 15 mel bins");
  Mat dct = dct_matrix(n_mels);
  Mat ca = dct.middleRows(1, 13) * log_mel_a;
  Mat cb = dct.middleRows(1, 13) * log_mel_b;

  std::vector<std::pair<int, int>> path;
  if (align) {
    path = dtw_align(ca, cb).path;
  } else {
    require(ca.cols() == cb.cols(), "mcd: lengths differ without alignment");
    for (int t = 0; t < ca.cols(); ++t) path.emplace_back(t, t);
  }

  const double scale = 10.0 / std::log(10.0) * std::sqrt(2.0);
  double acc = 0;
  for (auto [i, j] : path) acc += scale * (ca.col(i) - cb.col(j)).norm();
  return acc / static_cast<double>(path.size());
}

namespace {

double rmse_voiced(const Vec& a, const Vec& b, bool log_domain) {
  auto n = std::min(a.size(), b.size());
  double acc = 0;
  int count = 0;
  for (Eigen::Index t = 0; t < n; ++t) {
    if (a[t] <= 0 || b[t] <= 0) continue;
    double d = log_domain ? std::log(a[t]) - std::log(b[t]) : a[t] - b[t];
    acc += d * d;
    ++count;
  }
  if (count == 0) return std::numeric_limits<double>::quiet_NaN();
  return std::sqrt(acc / count);
}

}  // namespace

double rmse_log_f0(const Vec& f0_a_hz, const Vec& f0_b_hz) {
  return rmse_voiced(f0_a_hz, f0_b_hz, true);
}

double rmse_f0_hz(const Vec& f0_a_hz, const Vec& f0_b_hz) {
  return rmse_voiced(f0_a_hz, f0_b_hz, false);
}

size_t levenshtein(const std::string& a, const std::string& b) {
  size_t n = a.size(), m = b.size();
  std::vector<size_t> prev(m + 1), cur(m + 1);
  for (size_t j = 0; j <= m; ++j) prev[j] = j;
  for (size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= m; ++j) {
      size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

double character_error_rate(const std::string& ref, const std::string& hyp) {
  require(!ref.empty(), "cer: empty reference");
  return 100.0 * static_cast<double>(levenshtein(ref, hyp)) /
         static_cast<double>(ref.size());
}

void ToyAttributeClassifier::train(const std::vector<Vec>& feats,
                                   const std::vector<int>& labels,
                                   int n_classes, uint64_t seed, int iters) {
  require(!feats.empty() && feats.size() == labels.size(),
          "classifier: bad training set");
  int d = static_cast<int>(feats[0].size());
  int n = static_cast<int>(feats.size());
  RngStream rng(seed, "toyclf");
  w_ = rng.normal_mat(n_classes, d, 0.01);
  b_ = Vec::Zero(n_classes);

  double lr = 0.5;
  for (int it = 0; it < iters; ++it) {
    Mat gw = Mat::Zero(n_classes, d);
    Vec gb = Vec::Zero(n_classes);
    for (int i = 0; i < n; ++i) {
      Vec logits = w_ * feats[static_cast<size_t>(i)] + b_;
      Vec p = (logits.array() - logits.maxCoeff()).exp();
      p /= p.sum();
      p[labels[static_cast<size_t>(i)]] -= 1.0;
      gw += p * feats[static_cast<size_t>(i)].transpose();
      gb += p;
    }
    w_ -= lr / n * gw + lr * 1e-4 * w_;
    b_ -= lr / n * gb;
  }
}

Vec ToyAttributeClassifier::probabilities(const Vec& feat) const {
  require(w_.size() > 0, "classifier: not trained");
  Vec logits = w_ * feat + b_;
  Vec p = (logits.array() - logits.maxCoeff()).exp();
  return p / p.sum();
}

int ToyAttributeClassifier::predict(const Vec& feat) const {
  Vec p = probabilities(feat);
  Eigen::Index best;
  p.maxCoeff(&best);
  return static_cast<int>(best);
}

// --- toy transcript recognizer ---

namespace {

struct ToyTemplates {
  uint64_t cfg_hash = 0;
  std::vector<std::string> names;  // one per template row
  std::vector<Vec> envelopes;      // centered mean log-mel
};

// Mean log-mel envelope reduced to mid-order cepstra: dropping c0 and c1
// discards overall gain and gross spectral tilt, which vary with style, while
// keeping the formant structure that identifies the syllable. The envelope is
// floored 5 nats below its peak first — inter-harmonic valley depth depends on
// the recording's noise floor, not on the syllable, and unbounded valleys
// otherwise dominate the comparison.
Vec centered_envelope(const Mat& log_spec, int from, int to) {
  static thread_local Mat dct;
  if (dct.rows() != log_spec.rows())
    dct = dct_matrix(static_cast<int>(log_spec.rows()));
  Vec env = log_spec.middleCols(from, to - from).rowwise().mean();
  env = env.cwiseMax(env.maxCoeff() - 5.0);
  int keep = std::min<int>(12, static_cast<int>(env.size()) - 2);
  return dct.middleRows(2, keep) * env;
}

const ToyTemplates& toy_templates(const SystemConfig& cfg) {
  static thread_local ToyTemplates tpl;
  uint64_t h = feature_config_hash(cfg);
  if (tpl.cfg_hash == h) return tpl;
  tpl = ToyTemplates{};
  tpl.cfg_hash = h;
  StftBasis basis = make_stft_basis(cfg.n_fft, cfg.hop_length, cfg.win_length);
  Mat mel_w = mel_filterbank(cfg.sample_rate_hz, cfg.n_fft, cfg.n_mels);
  // One template per (syllable, register, style, pitch offset): spectral tilt
  // varies a lot across styles, and utterance declination moves the harmonic
  // comb by a few percent, so both need template coverage to keep the cosine
  // test sharp.
  for (const auto& syl : toy_syllables()) {
    for (double reg : toy_speaker_registers()) {
      for (double decl : {0.96, 1.0, 1.04}) {
        for (int e = 0; e < kNumEmotions; ++e) {
          auto wav = synth_toy_syllable(syl, reg * decl, static_cast<Emotion>(e),
                                        cfg.sample_rate_hz, 1);
          Mat lm = log_compress(mel_w * stft_magnitude(wav, basis));
          int t0 = static_cast<int>(lm.cols()) / 4;
          int t1 = static_cast<int>(lm.cols()) - t0;
          tpl.names.push_back(syl.name);
          tpl.envelopes.push_back(
              centered_envelope(lm, t0, std::max(t1, t0 + 1)));
        }
      }
    }
  }
  return tpl;
}

}  // namespace

std::string recognize_toy_transcript(const Mat& log_mel,
                                     const SystemConfig& cfg) {
  const auto& tpl = toy_templates(cfg);
  int T = static_cast<int>(log_mel.cols());
  require(T > 0, "recognizer: empty spectrogram");

  // Per-frame linear energy, lightly smoothed.
  Vec energy(T);
  for (int t = 0; t < T; ++t)
    energy[t] = log_mel.col(t).array().exp().mean();
  Vec smooth = energy;
  for (int t = 1; t + 1 < T; ++t)
    smooth[t] = (energy[t - 1] + energy[t] + energy[t + 1]) / 3.0;

  // Sorted-quantile threshold keeps this robust to overall gain.
  std::vector<double> sorted(smooth.data(), smooth.data() + T);
  std::sort(sorted.begin(), sorted.end());
  double hi = sorted[static_cast<size_t>(0.95 * (T - 1))];
  double lo = sorted[static_cast<size_t>(0.05 * (T - 1))];
  double thr = lo + 0.15 * (hi - lo);

  // Runs above threshold; bridge 1-frame dropouts, drop tiny blips.
  std::vector<std::pair<int, int>> segs;
  int start = -1;
  for (int t = 0; t <= T; ++t) {
    bool on = t < T && smooth[t] > thr;
    if (on && start < 0) start = t;
    if (!on && start >= 0) {
      if (!segs.empty() && start - segs.back().second <= 1)
        segs.back().second = t;
      else
        segs.emplace_back(start, t);
      start = -1;
    }
  }
  std::erase_if(segs, [](const auto& s) { return s.second - s.first < 3; });

  std::ostringstream out;
  for (size_t k = 0; k < segs.size(); ++k) {
    auto [s0, s1] = segs[k];
    // Interior frames avoid attack/release smear.
    int margin = (s1 - s0) / 5;
    Vec env = centered_envelope(log_mel, s0 + margin, s1 - margin);
    double best = -std::numeric_limits<double>::infinity();
    const std::string* best_name = nullptr;
    for (size_t i = 0; i < tpl.envelopes.size(); ++i) {
      double sim = env.dot(tpl.envelopes[i]) /
                   (env.norm() * tpl.envelopes[i].norm() + 1e-12);
      if (sim > best) {
        best = sim;
        best_name = &tpl.names[i];
      }
    }
    if (k) out << ' ';
    out << *best_name;
  }
  return out.str();
}

}  // namespace promptevc
