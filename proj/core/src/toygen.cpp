#include "promptevc/toygen.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "promptevc/audio.hpp"
#include "promptevc/dataprep.hpp"
#include "promptevc/rng.hpp"

namespace promptevc {

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kMaxHarmonicHz = 7000.0;
constexpr double kSyllableSeconds = 0.22;
constexpr double kGapSeconds = 0.05;
constexpr double kEdgeSeconds = 0.06;

double resonance(double f, double center, double bw) {
  double d = (f - center) / bw;
  return 1.0 / (1.0 + d * d);
}

const ToySyllable& find_syllable(const std::string& name) {
  for (const auto& s : toy_syllables())
    if (s.name == name) return s;
  fail("unknown toy syllable: " + name);
}

// Renders one syllable into `out` starting at sample `at`.
void render_syllable(std::vector<double>& out, size_t at, const ToySyllable& syl,
                     int sr, double dur_s, const ToyEmotionStyle& style,
                     double reg_hz, double phase0, double decl_from,
                     double decl_to) {
  int n = static_cast<int>(dur_s * sr);
  double attack = 0.020 * sr, release = 0.030 * sr;
  std::vector<double> phase(64, phase0);
  for (int i = 0; i < n; ++i) {
    double u = static_cast<double>(i) / n;
    double f0 = reg_hz * (decl_from + (decl_to - decl_from) * u) *
                (1.0 + 0.015 * std::sin(2.0 * kPi * 5.5 * i / sr + phase0));
    double env = std::min({i / attack, (n - 1 - i) / release, 1.0});
    if (env < 0) env = 0;
    double s = 0.0;
    for (int k = 1; k * f0 < kMaxHarmonicHz && k < 64; ++k) {
      double f = k * f0;
      // The glottal-like base term keeps the fundamental strong, which
      // anchors the periodicity regardless of where the resonances sit.
      double a = (resonance(f, syl.f1_hz, 90.0) +
                  0.7 * resonance(f, syl.f2_hz, 130.0) +
                  0.45 * std::exp(-0.8 * (k - 1))) *
                 std::exp(-style.tilt_per_khz * f / 1000.0);
      phase[static_cast<size_t>(k)] += 2.0 * kPi * f / sr;
      s += a * std::sin(phase[static_cast<size_t>(k)]);
    }
    if (at + static_cast<size_t>(i) < out.size())
      out[at + static_cast<size_t>(i)] += style.amplitude * env * s;
  }
}

}  // namespace

const std::vector<ToySyllable>& toy_syllables() {
  // Formants sit off the harmonic combs of both speaker registers
  // (>= 60 Hz from any multiple of 250 or 330), so no single harmonic can
  // dominate and fool the period estimate into an octave error.
  static const std::vector<ToySyllable> s = {
      {"ba", 820, 1160}, {"du", 420, 1560}, {"ki", 590, 2370},
      {"mo", 420, 1060}, {"ne", 590, 1880}, {"po", 880, 1430},
      {"sa", 820, 2560}, {"tu", 930, 2060},
  };
  return s;
}

ToyEmotionStyle toy_emotion_style(Emotion e) {
  switch (e) {
    case Emotion::kNeutral: return {0.50, 0.20, 1.0};
    case Emotion::kHappy: return {0.25, 0.30, 0.8};
    case Emotion::kSad: return {0.90, 0.13, 1.3};
    case Emotion::kAngry: return {0.20, 0.35, 0.9};
    case Emotion::kSurprise: return {0.30, 0.28, 0.85};
    case Emotion::kFear: return {0.70, 0.16, 1.15};
    case Emotion::kDisgust: return {0.80, 0.18, 1.2};
    case Emotion::kContempt: return {0.60, 0.17, 1.1};
  }
  return {0.50, 0.20, 1.0};
}

const std::vector<double>& toy_speaker_registers() {
  // High registers keep the pitch period a small number of samples, which a
  // compact upsampling decoder can actually reproduce; they stay low enough
  // that the harmonic comb still samples the formant envelopes densely.
  static const std::vector<double> r = {250.0, 330.0};
  return r;
}

const std::vector<std::string>& toy_speaker_names() {
  static const std::vector<std::string> n = {"spk_a", "spk_b"};
  return n;
}

const std::vector<std::string>& toy_sentences() {
  static const std::vector<std::string> s = {
      "ba du ki mo",    "ne po sa tu",    "ki sa ba ne",
      "mo tu du po",    "sa ne ki tu ba", "du mo po ba sa",
  };
  return s;
}

std::vector<double> synth_toy_utterance(const std::string& transcript,
                                        double f0_register_hz, Emotion emotion,
                                        int sample_rate, uint64_t seed) {
  auto style = toy_emotion_style(emotion);
  RngStream rng(seed, "toy:" + transcript);

  std::istringstream iss(transcript);
  std::vector<const ToySyllable*> syls;
  std::string word;
  while (iss >> word) syls.push_back(&find_syllable(word));
  require(!syls.empty(), "toy transcript is empty");

  double syl_s = kSyllableSeconds * style.rate;
  // Vowels compress with speaking rate; the closure between syllables barely
  // does. A floored gap keeps syllables separable at the fastest styles.
  double gap_s = std::max(kGapSeconds * style.rate, 0.055);
  std::vector<double> durs;
  double total = kEdgeSeconds;
  for (size_t i = 0; i < syls.size(); ++i) {
    durs.push_back(syl_s * (1.0 + 0.05 * (rng.uniform() * 2.0 - 1.0)));
    total += durs.back() + (i + 1 < syls.size() ? gap_s : 0.0);
  }
  total += kEdgeSeconds;

  std::vector<double> out(static_cast<size_t>(total * sample_rate) + 1, 0.0);
  double reg = f0_register_hz * (1.0 + 0.015 * (rng.uniform() * 2.0 - 1.0));
  double t = kEdgeSeconds;
  // Gentle declination across the whole utterance.
  double spoken = total - 2 * kEdgeSeconds;
  for (size_t i = 0; i < syls.size(); ++i) {
    double u0 = (t - kEdgeSeconds) / spoken;
    double u1 = (t - kEdgeSeconds + durs[i]) / spoken;
    double d0 = 1.06 - 0.12 * u0, d1 = 1.06 - 0.12 * u1;
    render_syllable(out, static_cast<size_t>(t * sample_rate), *syls[i],
                    sample_rate, durs[i], style, reg, rng.uniform(0, 2 * kPi),
                    d0, d1);
    t += durs[i] + gap_s;
  }
  for (auto& v : out) v += 0.001 * rng.normal();
  return out;
}

std::vector<double> synth_toy_syllable(const ToySyllable& syl,
                                       double f0_register_hz, Emotion emotion,
                                       int sample_rate, uint64_t seed) {
  auto style = toy_emotion_style(emotion);
  RngStream rng(seed, "toysyl:" + syl.name);
  int n = static_cast<int>(kSyllableSeconds * style.rate * sample_rate);
  std::vector<double> out(static_cast<size_t>(n), 0.0);
  render_syllable(out, 0, syl, sample_rate, kSyllableSeconds * style.rate,
                  style, f0_register_hz, rng.uniform(0, 2 * kPi), 1.0, 1.0);
  return out;
}

ToyCorpus generate_toy_corpus(const ToySpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(spec.out_dir) / "wavs");

  ToyCorpus corpus;
  const auto& sentences = toy_sentences();
  size_t eval_from = sentences.size() - 1;

  for (size_t s = 0; s < sentences.size(); ++s) {
    for (size_t p = 0; p < toy_speaker_registers().size(); ++p) {
      for (Emotion e : spec.emotions) {
        UtteranceRecord r;
        r.id = toy_speaker_names()[p] + "_" + emotion_name(e) + "_s" +
               std::to_string(s);
        r.transcript = sentences[s];
        r.emotion = e;
        r.speaker_id = toy_speaker_names()[p];
        r.wav_path = (fs::path(spec.out_dir) / "wavs" / (r.id + ".wav")).string();

        auto samples = synth_toy_utterance(
            r.transcript, toy_speaker_registers()[p], e, spec.sample_rate,
            stream_hash(spec.seed, r.id));
        Wave w;
        w.sample_rate = spec.sample_rate;
        w.samples = std::move(samples);
        normalize_peak(w, 0.9);
        write_wav(r.wav_path, w);

        (s >= eval_from ? corpus.eval : corpus.train).push_back(std::move(r));
      }
    }
  }

  save_manifest((fs::path(spec.out_dir) / "train.jsonl").string(), corpus.train);
  save_manifest((fs::path(spec.out_dir) / "eval.jsonl").string(), corpus.eval);
  return corpus;
}

}  // namespace promptevc
