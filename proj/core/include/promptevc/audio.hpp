#pragma once

#include <string>
#include <vector>

#include "promptevc/common.hpp"

namespace promptevc {

struct Wave {
  int sample_rate = 0;
  std::vector<double> samples;  // mono, nominally in [-1, 1]

  double duration_seconds() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

// PCM16 mono/stereo WAV. Stereo is averaged to mono on read.
Wave read_wav(const std::string& path);
void write_wav(const std::string& path, const Wave& w);

// Linear-interpolation resampler; returns input untouched when rates match.
Wave resample(const Wave& w, int target_rate);

// Peak-normalize to the given amplitude; no-op on silence.
void normalize_peak(Wave& w, double peak = 0.95);

}  // namespace promptevc
