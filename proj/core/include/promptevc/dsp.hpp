#pragma once

#include <vector>

#include "promptevc/common.hpp"

namespace promptevc {

// Windowed Fourier basis. The analysis window is folded into the cosine and
// sine rows so a spectrogram is two GEMMs over a frame matrix — the same
// formulation the differentiable path uses.
struct StftBasis {
  int n_fft = 0;
  int hop = 0;
  int win = 0;
  Mat cos_basis;  // (n_fft/2+1) x n_fft
  Mat sin_basis;  // (n_fft/2+1) x n_fft
};

Vec hann_periodic(int n);
StftBasis make_stft_basis(int n_fft, int hop, int win);

// Centered analysis: reflect-pad by n_fft/2 on both sides, then one frame
// per hop. 1 second at 16 kHz with hop 256 yields 63 frames.
int num_frames(size_t n_samples, int hop);
std::vector<double> pad_reflect(const std::vector<double>& x, int pad);
Mat frame_signal(const std::vector<double>& padded, int n_fft, int hop, int frames);

// Magnitude spectrogram, (n_fft/2+1) x T.
Mat stft_magnitude(const std::vector<double>& x, const StftBasis& basis);

double hz_to_mel(double hz);
double mel_to_hz(double mel);

// Triangular mel filterbank, n_mels x (n_fft/2+1), fmax defaults to sr/2.
Mat mel_filterbank(int sample_rate, int n_fft, int n_mels, double fmin = 0.0,
                   double fmax = 0.0);

// log(mel_w * mag + 1e-5), elementwise.
Mat log_compress(const Mat& mel_power);

Mat log_mel_spectrogram(const std::vector<double>& x, const StftBasis& basis,
                        const Mat& mel_w);

// Orthonormal DCT-II, n x n; row k dotted with a log-mel column gives
// cepstral coefficient k.
Mat dct_matrix(int n);

constexpr double kLogFloor = 1e-5;

}  // namespace promptevc
