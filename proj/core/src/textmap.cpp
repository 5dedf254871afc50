#include "promptevc/textmap.hpp"

#include <cmath>
#include <limits>

#include "promptevc/rng.hpp"

namespace promptevc {
namespace {

// Squared distances from every data column to one centroid.
Vec sq_dist_to(const Mat& data, const Vec& c) {
  return (data.colwise() - c).colwise().squaredNorm().transpose();
}

}  // namespace

KMeansResult kmeans(const Mat& data, int k, uint64_t seed, int max_iters, double tol) {
  int n = static_cast<int>(data.cols());
  require(k >= 1, "kmeans: k must be >= 1");
  require(n >= k, "kmeans: fewer points than clusters");
  RngStream rng(seed, "kmeans");

  // kmeans++ seeding: each next centroid is drawn with probability
  // proportional to squared distance from the chosen set.
  Mat centroids(data.rows(), k);
  centroids.col(0) = data.col(rng.randint(n));
  Vec best_d = sq_dist_to(data, centroids.col(0));
  for (int c = 1; c < k; ++c) {
    double total = best_d.sum();
    int pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (int i = 0; i < n; ++i) {
        acc += best_d[i];
        if (acc >= r) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.randint(n));
    }
    centroids.col(c) = data.col(pick);
    best_d = best_d.cwiseMin(sq_dist_to(data, centroids.col(c)));
  }

  KMeansResult res;
  res.assignments.assign(n, 0);
  for (int iter = 0; iter < max_iters; ++iter) {
    res.iterations = iter + 1;
    // assignment step
    Mat d2(n, k);
    for (int c = 0; c < k; ++c) d2.col(c) = sq_dist_to(data, centroids.col(c));
    res.inertia = 0.0;
    for (int i = 0; i < n; ++i) {
      int best;
      res.inertia += d2.row(i).minCoeff(&best);
      res.assignments[static_cast<size_t>(i)] = best;
    }
    // update step
    Mat next = Mat::Zero(data.rows(), k);
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int i = 0; i < n; ++i) {
      next.col(res.assignments[static_cast<size_t>(i)]) += data.col(i);
      counts[static_cast<size_t>(res.assignments[static_cast<size_t>(i)])]++;
    }
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<size_t>(c)] > 0) {
        next.col(c) /= counts[static_cast<size_t>(c)];
      } else {
        // Re-seed an empty cluster at the point farthest from its centroid.
        int far = 0;
        double fd = -1.0;
        for (int i = 0; i < n; ++i) {
          double di = d2(i, res.assignments[static_cast<size_t>(i)]);
          if (di > fd) {
            fd = di;
            far = i;
          }
        }
        next.col(c) = data.col(far);
      }
    }
    double shift = (next - centroids).colwise().norm().maxCoeff();
    centroids = next;
    if (shift < tol) break;
  }
  // Final assignment against the last centroid update.
  res.inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    double best_dist = std::numeric_limits<double>::max();
    int best = 0;
    for (int c = 0; c < k; ++c) {
      double d = (data.col(i) - centroids.col(c)).squaredNorm();
      if (d < best_dist) {
        best_dist = d;
        best = c;
      }
    }
    res.assignments[static_cast<size_t>(i)] = best;
    res.inertia += best_dist;
  }
  res.centroids = std::move(centroids);
  return res;
}

int Codebook::nearest(const Vec& x) const {
  require(x.size() == centroids.rows(), "codebook: feature dim mismatch");
  int best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (int c = 0; c < centroids.cols(); ++c) {
    double d = (x - centroids.col(c)).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<int> Codebook::tokenize(const Mat& features) const {
  std::vector<int> ids(static_cast<size_t>(features.cols()));
  for (int t = 0; t < features.cols(); ++t)
    ids[static_cast<size_t>(t)] = nearest(features.col(t));
  return ids;
}

Codebook build_codebook(const Mat& features, int k, uint64_t seed) {
  return Codebook{kmeans(features, k, seed).centroids};
}

TokenRun run_length_collapse(const std::vector<int>& frame_tokens) {
  TokenRun out;
  for (int t : frame_tokens) {
    if (!out.tokens.empty() && out.tokens.back() == t) {
      out.durations.back()++;
    } else {
      out.tokens.push_back(t);
      out.durations.push_back(1);
    }
  }
  return out;
}

std::vector<int> run_length_expand(const TokenRun& runs) {
  require(runs.tokens.size() == runs.durations.size(),
          "run lengths: token/duration size mismatch");
  std::vector<int> out;
  for (size_t i = 0; i < runs.tokens.size(); ++i) {
    require(runs.durations[i] > 0, "run lengths: nonpositive duration");
    for (int r = 0; r < runs.durations[i]; ++r) out.push_back(runs.tokens[i]);
  }
  return out;
}

}  // namespace promptevc
