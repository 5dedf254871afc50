#pragma once

#include <vector>

#include "promptevc/common.hpp"

namespace promptevc {

struct KMeansResult {
  Mat centroids;  // d x k
  std::vector<int> assignments;
  double inertia = 0.0;
  int iterations = 0;
};

// Lloyd's algorithm with kmeans++ seeding. Deterministic for a given seed.
// Stops after max_iters or when no centroid moves more than tol.
KMeansResult kmeans(const Mat& data, int k, uint64_t seed, int max_iters = 50,
                    double tol = 1e-6);

// Frozen set of content-token centroids.
struct Codebook {
  Mat centroids;  // d x k

  int size() const { return static_cast<int>(centroids.cols()); }
  int dim() const { return static_cast<int>(centroids.rows()); }
  int nearest(const Vec& x) const;
  std::vector<int> tokenize(const Mat& features) const;  // one id per column
};

Codebook build_codebook(const Mat& features, int k, uint64_t seed);

// Consecutive duplicate collapse: [5,5,5,2,2,7] -> tokens [5,2,7],
// durations [3,2,1]. `expand` is its exact inverse.
struct TokenRun {
  std::vector<int> tokens;
  std::vector<int> durations;
};

TokenRun run_length_collapse(const std::vector<int>& frame_tokens);
std::vector<int> run_length_expand(const TokenRun& runs);

}  // namespace promptevc
