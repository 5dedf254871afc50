#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace promptevc {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// Error type thrown by every module; messages name the offending field/id.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

constexpr uint64_t kFnvOffset = 1469598103934665603ull;
constexpr uint64_t kFnvPrime = 1099511628211ull;

inline uint64_t fnv1a64(std::string_view s, uint64_t h = kFnvOffset) {
  for (unsigned char c : s) {
    h ^= c;
    h *= kFnvPrime;
  }
  return h;
}

inline uint64_t fnv1a64(uint64_t x, uint64_t h = kFnvOffset) {
  for (int i = 0; i < 8; ++i) {
    h ^= (x >> (8 * i)) & 0xff;
    h *= kFnvPrime;
  }
  return h;
}

// Combined hash used to derive per-(seed,label) RNG streams and per-name
// parameter init seeds.
inline uint64_t stream_hash(uint64_t seed, std::string_view label) {
  return fnv1a64(label, fnv1a64(seed));
}

}  // namespace promptevc
