#pragma once

#include <string>
#include <utility>
#include <vector>

#include "promptevc/common.hpp"
#include "promptevc/config.hpp"

namespace promptevc {

// Dynamic time warping over column features with Euclidean frame cost and
// steps (1,0), (0,1), (1,1).
struct DtwResult {
  double cost = 0;
  std::vector<std::pair<int, int>> path;  // (col in a, col in b), increasing
};
DtwResult dtw_align(const Mat& a, const Mat& b);

// Mel-cepstral distortion in dB between two log-mel matrices (natural log).
// Cepstra are the orthonormal DCT of the log-mel columns; coefficients
// 1..13 enter the distance, c0 is dropped. Frames are DTW-aligned unless
// align=false, which requires equal lengths.
double mcd_db(const Mat& log_mel_a, const Mat& log_mel_b, bool align = true);

// RMSE between contours on frames voiced in both (f0 > 0), after trimming
// to the shorter contour. NaN when no frame qualifies.
double rmse_log_f0(const Vec& f0_a_hz, const Vec& f0_b_hz);
double rmse_f0_hz(const Vec& f0_a_hz, const Vec& f0_b_hz);

size_t levenshtein(const std::string& a, const std::string& b);
// Percent: 100 * edits / ref length.
double character_error_rate(const std::string& ref, const std::string& hyp);

// Multinomial logistic regression on fixed-length feature vectors. Seeded
// init + full-batch gradient descent keeps it deterministic.
class ToyAttributeClassifier {
 public:
  void train(const std::vector<Vec>& feats, const std::vector<int>& labels,
             int n_classes, uint64_t seed, int iters = 400);
  int predict(const Vec& feat) const;
  Vec probabilities(const Vec& feat) const;
  int n_classes() const { return static_cast<int>(w_.rows()); }

 private:
  Mat w_;
  Vec b_;
};

// Energy-segmented template matcher for the toy corpus: splits a log-mel
// into syllable segments and names each by its closest envelope template.
// Templates cover both toy speaker registers and every toy style.
std::string recognize_toy_transcript(const Mat& log_mel, const SystemConfig& cfg);

}  // namespace promptevc
