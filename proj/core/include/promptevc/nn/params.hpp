#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "promptevc/common.hpp"
#include "promptevc/config.hpp"
#include "promptevc/nn/graph.hpp"

namespace promptevc::nn {

// Named parameter bank with per-parameter AdamW state. Initialization is
// derived from (seed, name), so the set of created parameters — not their
// creation order — determines the weights.
class ParamStore {
 public:
  explicit ParamStore(uint64_t seed) : seed_(seed) {}

  // Gaussian init with the given stddev (0 => zeros). Fails on duplicates.
  Mat& create(const std::string& name, int rows, int cols, double stddev);
  Mat& create_const(const std::string& name, int rows, int cols, double fill);

  bool has(const std::string& name) const { return entries_.count(name) > 0; }
  Mat& value(const std::string& name);
  const Mat& value(const std::string& name) const;
  Mat& grad(const std::string& name);

  // Tape leaf whose gradient accumulates into this store.
  Var use(Graph& g, const std::string& name);

  void zero_grads();
  double grad_norm(const std::function<bool(const std::string&)>& filter = {}) const;
  void clip_grad_norm(double max_norm,
                      const std::function<bool(const std::string&)>& filter = {});
  bool grads_finite() const;

  // One AdamW update over parameters accepted by `filter` (all if empty).
  void adamw_step(const OptimizerConfig& opt, double lr,
                  const std::function<bool(const std::string&)>& filter = {});

  std::vector<std::string> names() const;
  size_t count() const { return entries_.size(); }
  size_t scalar_count() const;
  uint64_t seed() const { return seed_; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  struct Entry {
    Mat value;
    Mat grad;
    Mat m;
    Mat v;
    int64_t t = 0;
  };
  std::map<std::string, Entry> entries_;
  uint64_t seed_ = 0;
};

}  // namespace promptevc::nn
