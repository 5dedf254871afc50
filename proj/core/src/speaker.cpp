#include "promptevc/speaker.hpp"

#include <algorithm>
#include <cmath>

namespace promptevc {
namespace {

// Cumulative mean normalized difference for one analysis window.
// frame points at 2*tau_max samples; d'(tau) in [0, ~2].
void cmnd(const double* frame, int tau_max, std::vector<double>& out) {
  out.assign(static_cast<size_t>(tau_max), 0.0);
  double running = 0.0;
  out[0] = 1.0;
  for (int tau = 1; tau < tau_max; ++tau) {
    double d = 0.0;
    for (int j = 0; j < tau_max; ++j) {
      double diff = frame[j] - frame[j + tau];
      d += diff * diff;
    }
    running += d;
    out[static_cast<size_t>(tau)] = running > 0.0 ? d * tau / running : 1.0;
  }
}

// Parabolic minimum refinement around integer lag tau.
double refine(const std::vector<double>& d, int tau) {
  if (tau <= 0 || tau + 1 >= static_cast<int>(d.size())) return tau;
  double a = d[static_cast<size_t>(tau - 1)];
  double b = d[static_cast<size_t>(tau)];
  double c = d[static_cast<size_t>(tau + 1)];
  double denom = a - 2.0 * b + c;
  if (std::abs(denom) < 1e-12) return tau;
  double shift = 0.5 * (a - c) / denom;
  return tau + std::clamp(shift, -1.0, 1.0);
}

}  // namespace

Vec track_f0(const std::vector<double>& samples, int sample_rate, int hop,
             const F0Options& opt) {
  require(sample_rate > 0 && hop > 0, "track_f0: bad rate or hop");
  require(opt.fmin_hz > 0 && opt.fmax_hz > opt.fmin_hz, "track_f0: bad f0 band");
  int tau_max = static_cast<int>(sample_rate / opt.fmin_hz);
  int tau_min = std::max(2, static_cast<int>(sample_rate / opt.fmax_hz));
  require(tau_min < tau_max, "track_f0: f0 band collapses at this sample rate");

  int frames = 1 + static_cast<int>(samples.size() / static_cast<size_t>(hop));
  int win = 2 * tau_max;
  Vec f0 = Vec::Zero(frames);
  std::vector<double> frame(static_cast<size_t>(win), 0.0);
  std::vector<double> d;

  for (int t = 0; t < frames; ++t) {
    int center = t * hop;
    int start = center - win / 2;
    double energy = 0.0;
    for (int i = 0; i < win; ++i) {
      int src = start + i;
      double v = (src >= 0 && src < static_cast<int>(samples.size()))
                     ? samples[static_cast<size_t>(src)]
                     : 0.0;
      frame[static_cast<size_t>(i)] = v;
      energy += v * v;
    }
    if (energy / win < 1e-6) continue;  // silence gate

    cmnd(frame.data(), tau_max, d);
    int best = -1;
    for (int tau = tau_min; tau < tau_max; ++tau) {
      if (d[static_cast<size_t>(tau)] < opt.threshold) {
        // Walk down to the bottom of this dip.
        while (tau + 1 < tau_max &&
               d[static_cast<size_t>(tau + 1)] < d[static_cast<size_t>(tau)])
          ++tau;
        best = tau;
        break;
      }
    }
    if (best < 0) continue;  // no dip below threshold: unvoiced
    double lag = refine(d, best);
    if (lag > 0) f0[t] = sample_rate / lag;
  }
  return f0;
}

double mean_log_f0(const Vec& f0_hz) {
  double acc = 0.0;
  int n = 0;
  for (int i = 0; i < f0_hz.size(); ++i) {
    if (f0_hz[i] > 0.0) {
      acc += std::log(f0_hz[i]);
      ++n;
    }
  }
  return n > 0 ? acc / n : 0.0;
}

SpeakerEncoder::SpeakerEncoder(nn::ParamStore& ps, const std::string& name,
                               int n_mels, int d_spk, int channels)
    : conv1_(ps, name + ".conv1", n_mels, channels, 5),
      conv2_(ps, name + ".conv2", channels, channels, 5),
      proj_(ps, name + ".proj", 2 * channels, d_spk) {}

nn::Var SpeakerEncoder::apply(nn::Graph& g, nn::Var log_mel) const {
  nn::Var h = g.lrelu(conv1_.apply(g, log_mel));
  h = g.lrelu(conv2_.apply(g, h));
  nn::Var mean = g.mean_cols(h);
  nn::Var centered = g.sub(h, g.tile_cols(mean, g.cols_of(h)));
  nn::Var stddev = g.sqrt_(g.add_scalar(g.mean_cols(g.square(centered)), 1e-6));
  nn::Var pooled = g.concat_rows({mean, stddev});
  return g.tanh_(proj_.apply(g, pooled));
}

}  // namespace promptevc
