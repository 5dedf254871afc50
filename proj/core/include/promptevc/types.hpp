#pragma once

#include <optional>
#include <string>
#include <vector>

#include "promptevc/common.hpp"

namespace promptevc {

// Emotion inventory shared by the prompt templater, the reference-audio
// ranker, and the toy corpus generator.
enum class Emotion {
  kNeutral = 0,
  kHappy,
  kSad,
  kAngry,
  kSurprise,
  kFear,
  kDisgust,
  kContempt,
};

constexpr int kNumEmotions = 8;

enum class Level { kLow = 0, kMedium, kHigh };

// Relative speaking-rate bucket for prompt text.
enum class Tempo { kSlower = 0, kEven, kFaster };

const char* emotion_name(Emotion e);
Emotion emotion_from_name(const std::string& name);
const char* level_name(Level l);
Level level_from_name(const std::string& name);
const char* tempo_name(Tempo t);
Tempo tempo_from_name(const std::string& name);

// Controllable attributes a prompt can encode. Deliberately excludes any
// identity attributes; those stay with the speaker pathway.
struct StyleFactors {
  Emotion emotion = Emotion::kNeutral;
  Level intensity = Level::kMedium;
  Tempo tempo = Tempo::kEven;

  bool operator==(const StyleFactors&) const = default;
};

// One corpus row. `emotion_score` is the ranker output used for intensity
// bucketing; absent until annotation has run. `speaker_id` is optional in
// manifests and falls back to a per-file heuristic when missing.
struct UtteranceRecord {
  std::string id;
  std::string wav_path;
  std::string transcript;
  Emotion emotion = Emotion::kNeutral;
  std::optional<std::string> speaker_id;
  std::optional<double> emotion_score;
  std::optional<Level> intensity;

  bool parallel_with(const UtteranceRecord& other) const {
    return transcript == other.transcript && id != other.id;
  }
};

}  // namespace promptevc
