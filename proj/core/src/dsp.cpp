#include "promptevc/dsp.hpp"

#include <cmath>

namespace promptevc {

Vec hann_periodic(int n) {
  require(n > 0, "hann window size must be positive");
  Vec w(n);
  for (int i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / n);
  return w;
}

StftBasis make_stft_basis(int n_fft, int hop, int win) {
  require(win <= n_fft, "win_length must be <= n_fft");
  StftBasis b;
  b.n_fft = n_fft;
  b.hop = hop;
  b.win = win;
  Vec w = Vec::Zero(n_fft);
  Vec h = hann_periodic(win);
  int off = (n_fft - win) / 2;  // center a short window in the frame
  w.segment(off, win) = h;

  int bins = n_fft / 2 + 1;
  b.cos_basis.resize(bins, n_fft);
  b.sin_basis.resize(bins, n_fft);
  for (int f = 0; f < bins; ++f) {
    for (int n = 0; n < n_fft; ++n) {
      double ang = 2.0 * M_PI * f * n / n_fft;
      b.cos_basis(f, n) = std::cos(ang) * w[n];
      b.sin_basis(f, n) = -std::sin(ang) * w[n];
    }
  }
  return b;
}

int num_frames(size_t n_samples, int hop) {
  require(hop > 0, "hop must be positive");
  return 1 + static_cast<int>(n_samples / static_cast<size_t>(hop));
}

std::vector<double> pad_reflect(const std::vector<double>& x, int pad) {
  require(!x.empty(), "cannot pad empty signal");
  require(static_cast<size_t>(pad) < x.size(), "reflect pad exceeds signal length");
  std::vector<double> out(x.size() + 2 * pad);
  for (int i = 0; i < pad; ++i) out[i] = x[pad - i];
  std::copy(x.begin(), x.end(), out.begin() + pad);
  size_t n = x.size();
  for (int i = 0; i < pad; ++i) out[pad + n + i] = x[n - 2 - i];
  return out;
}

Mat frame_signal(const std::vector<double>& padded, int n_fft, int hop, int frames) {
  require(padded.size() >= static_cast<size_t>((frames - 1) * hop + n_fft),
          "padded signal too short for requested frames");
  Mat f(n_fft, frames);
  for (int t = 0; t < frames; ++t)
    for (int n = 0; n < n_fft; ++n) f(n, t) = padded[t * hop + n];
  return f;
}

Mat stft_magnitude(const std::vector<double>& x, const StftBasis& basis) {
  int t = num_frames(x.size(), basis.hop);
  auto padded = pad_reflect(x, basis.n_fft / 2);
  Mat frames = frame_signal(padded, basis.n_fft, basis.hop, t);
  Mat re = basis.cos_basis * frames;
  Mat im = basis.sin_basis * frames;
  return (re.array().square() + im.array().square()).sqrt().matrix();
}

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

Mat mel_filterbank(int sample_rate, int n_fft, int n_mels, double fmin, double fmax) {
  if (fmax <= 0.0) fmax = sample_rate / 2.0;
  int bins = n_fft / 2 + 1;
  double mel_lo = hz_to_mel(fmin), mel_hi = hz_to_mel(fmax);
  std::vector<double> pts(n_mels + 2);
  for (int i = 0; i < n_mels + 2; ++i)
    pts[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));

  Mat w = Mat::Zero(n_mels, bins);
  for (int m = 0; m < n_mels; ++m) {
    double lo = pts[m], ctr = pts[m + 1], hi = pts[m + 2];
    for (int f = 0; f < bins; ++f) {
      double hz = static_cast<double>(f) * sample_rate / n_fft;
      if (hz >= lo && hz <= ctr && ctr > lo)
        w(m, f) = (hz - lo) / (ctr - lo);
      else if (hz > ctr && hz <= hi && hi > ctr)
        w(m, f) = (hi - hz) / (hi - ctr);
    }
  }
  return w;
}

Mat log_compress(const Mat& mel_power) {
  return (mel_power.array() + kLogFloor).log().matrix();
}

Mat log_mel_spectrogram(const std::vector<double>& x, const StftBasis& basis,
                        const Mat& mel_w) {
  return log_compress(mel_w * stft_magnitude(x, basis));
}

Mat dct_matrix(int n) {
  Mat d(n, n);
  double s0 = std::sqrt(1.0 / n), s = std::sqrt(2.0 / n);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      d(k, i) = (k == 0 ? s0 : s) * std::cos(M_PI * k * (2 * i + 1) / (2.0 * n));
  return d;
}

}  // namespace promptevc
