#pragma once

#include <string>
#include <vector>

#include "promptevc/common.hpp"
#include "promptevc/nn/layers.hpp"

namespace promptevc {

struct F0Options {
  double fmin_hz = 50.0;
  double fmax_hz = 600.0;
  double threshold = 0.45;  // cumulative-mean-normalized difference dip
};

// Autocorrelation-difference pitch tracker with parabolic refinement.
// One value per analysis frame (1 + floor(n/hop) frames, matching the
// spectrogram clock); 0 marks unvoiced frames.
Vec track_f0(const std::vector<double>& samples, int sample_rate, int hop,
             const F0Options& opt = {});

// Mean of log f0 over voiced frames; 0 when everything is unvoiced.
double mean_log_f0(const Vec& f0_hz);

// Utterance-level speaker embedding: strided convolutions over log-mel,
// mean/std pooling across time, bounded projection.
class SpeakerEncoder {
 public:
  SpeakerEncoder(nn::ParamStore& ps, const std::string& name, int n_mels,
                 int d_spk, int channels);
  nn::Var apply(nn::Graph& g, nn::Var log_mel) const;  // n_mels x T -> d_spk x 1

 private:
  nn::Conv1d conv1_, conv2_;
  nn::Linear proj_;
};

}  // namespace promptevc
