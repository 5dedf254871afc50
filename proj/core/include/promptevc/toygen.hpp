#pragma once

#include <string>
#include <vector>

#include "promptevc/types.hpp"

namespace promptevc {

// Tiny synthetic speech-like corpus for end-to-end runs and tests.
//
// Two "speakers" share everything except their F0 register, so pitch is a
// pure speaker trait. Emotions never move F0; they change spectral tilt,
// energy and speaking rate instead. Each syllable is a harmonic source
// shaped by a two-resonance envelope, which gives the content tokens and
// the toy recognizer something real to lock onto.

struct ToySyllable {
  std::string name;
  double f1_hz;
  double f2_hz;
};

struct ToyEmotionStyle {
  double tilt_per_khz;  // exponential high-frequency rolloff
  double amplitude;     // overall gain
  double rate;          // duration multiplier (<1 = faster)
};

const std::vector<ToySyllable>& toy_syllables();
ToyEmotionStyle toy_emotion_style(Emotion e);

// Speaker registers, index 0/1.
const std::vector<double>& toy_speaker_registers();
const std::vector<std::string>& toy_speaker_names();

// Sentences as space-joined syllable names; the last one is held out.
const std::vector<std::string>& toy_sentences();

// Deterministic rendering of one utterance.
std::vector<double> synth_toy_utterance(const std::string& transcript,
                                        double f0_register_hz, Emotion emotion,
                                        int sample_rate, uint64_t seed);

// Single syllable at a given register, neutral prosody; used as a matching
// template by the toy recognizer.
std::vector<double> synth_toy_syllable(const ToySyllable& syl,
                                       double f0_register_hz, Emotion emotion,
                                       int sample_rate, uint64_t seed);

struct ToySpec {
  std::string out_dir;
  int sample_rate = 16000;
  uint64_t seed = 77;
  std::vector<Emotion> emotions = {Emotion::kNeutral, Emotion::kHappy,
                                   Emotion::kSad};
};

struct ToyCorpus {
  std::vector<UtteranceRecord> train;
  std::vector<UtteranceRecord> eval;
};

// Writes wavs plus train.jsonl / eval.jsonl under spec.out_dir.
ToyCorpus generate_toy_corpus(const ToySpec& spec);

}  // namespace promptevc
