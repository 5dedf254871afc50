#include "promptevc/types.hpp"

#include <array>

namespace promptevc {
namespace {

constexpr std::array<const char*, kNumEmotions> kEmotionNames = {
    "neutral", "happy", "sad", "angry", "surprise", "fear", "disgust", "contempt"};
constexpr std::array<const char*, 3> kLevelNames = {"low", "medium", "high"};
constexpr std::array<const char*, 3> kTempoNames = {"slower", "even", "faster"};

}  // namespace

const char* emotion_name(Emotion e) {
  return kEmotionNames.at(static_cast<size_t>(e));
}

Emotion emotion_from_name(const std::string& name) {
  for (size_t i = 0; i < kEmotionNames.size(); ++i)
    if (name == kEmotionNames[i]) return static_cast<Emotion>(i);
  fail("unknown emotion '" + name + "'");
}

const char* level_name(Level l) { return kLevelNames.at(static_cast<size_t>(l)); }

Level level_from_name(const std::string& name) {
  for (size_t i = 0; i < kLevelNames.size(); ++i)
    if (name == kLevelNames[i]) return static_cast<Level>(i);
  fail("unknown level '" + name + "'");
}

const char* tempo_name(Tempo t) { return kTempoNames.at(static_cast<size_t>(t)); }

Tempo tempo_from_name(const std::string& name) {
  for (size_t i = 0; i < kTempoNames.size(); ++i)
    if (name == kTempoNames[i]) return static_cast<Tempo>(i);
  fail("unknown tempo '" + name + "'");
}

}  // namespace promptevc
