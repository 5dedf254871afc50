#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include "promptevc/common.hpp"

namespace promptevc {

// Seeded random stream. Distribution math is implemented here (not via
// <random> distributions) so sequences are identical across standard
// library implementations. One stream per worker; not thread-safe.
class RngStream {
 public:
  RngStream(uint64_t seed, std::string_view label)
      : eng_(stream_hash(seed, label)) {}

  uint64_t bits() { return eng_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // (0, 1]
  double uniform_pos() { return 1.0 - uniform(); }

  // Standard normal via Box-Muller; one value per call, no cached spare.
  double normal() {
    double u1 = uniform_pos();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Uniform integer in [0, n)
  int64_t randint(int64_t n) {
    return static_cast<int64_t>(uniform() * static_cast<double>(n));
  }

  Mat normal_mat(int rows, int cols, double stddev = 1.0) {
    Mat m(rows, cols);
    for (int c = 0; c < cols; ++c)
      for (int r = 0; r < rows; ++r) m(r, c) = stddev * normal();
    return m;
  }

  std::string save_state() const;
  void restore_state(const std::string& s);

 private:
  std::mt19937_64 eng_;
};

// Independent reproducible stream per (seed, label).
inline RngStream seeded_rng(uint64_t seed, std::string_view label) {
  return RngStream(seed, label);
}

}  // namespace promptevc
