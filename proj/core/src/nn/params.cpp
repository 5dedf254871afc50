#include "promptevc/nn/params.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include "../io_util.hpp"
#include "promptevc/rng.hpp"

namespace promptevc::nn {

using io::read_mat;
using io::read_string;
using io::read_u64;
using io::write_mat;
using io::write_string;
using io::write_u64;

Mat& ParamStore::create(const std::string& name, int rows, int cols, double stddev) {
  require(!has(name), "parameter already exists: " + name);
  Entry e;
  if (stddev == 0.0) {
    e.value = Mat::Zero(rows, cols);
  } else {
    RngStream rng(seed_, "param:" + name);
    e.value = rng.normal_mat(rows, cols, stddev);
  }
  e.grad = Mat::Zero(rows, cols);
  e.m = Mat::Zero(rows, cols);
  e.v = Mat::Zero(rows, cols);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

Mat& ParamStore::create_const(const std::string& name, int rows, int cols, double fill) {
  require(!has(name), "parameter already exists: " + name);
  Entry e;
  e.value = Mat::Constant(rows, cols, fill);
  e.grad = Mat::Zero(rows, cols);
  e.m = Mat::Zero(rows, cols);
  e.v = Mat::Zero(rows, cols);
  return entries_.emplace(name, std::move(e)).first->second.value;
}

Mat& ParamStore::value(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail("no such parameter: " + name);
  return it->second.value;
}

const Mat& ParamStore::value(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail("no such parameter: " + name);
  return it->second.value;
}

Mat& ParamStore::grad(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail("no such parameter: " + name);
  return it->second.grad;
}

Var ParamStore::use(Graph& g, const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) fail("no such parameter: " + name);
  return g.leaf(it->second.value, &it->second.grad);
}

void ParamStore::zero_grads() {
  for (auto& [name, e] : entries_) e.grad.setZero();
}

double ParamStore::grad_norm(const std::function<bool(const std::string&)>& filter) const {
  double acc = 0.0;
  for (const auto& [name, e] : entries_) {
    if (filter && !filter(name)) continue;
    acc += e.grad.squaredNorm();
  }
  return std::sqrt(acc);
}

void ParamStore::clip_grad_norm(double max_norm,
                                const std::function<bool(const std::string&)>& filter) {
  double n = grad_norm(filter);
  if (n <= max_norm || n == 0.0) return;
  double s = max_norm / n;
  for (auto& [name, e] : entries_) {
    if (filter && !filter(name)) continue;
    e.grad *= s;
  }
}

bool ParamStore::grads_finite() const {
  for (const auto& [name, e] : entries_)
    if (!e.grad.allFinite()) return false;
  return true;
}

void ParamStore::adamw_step(const OptimizerConfig& opt, double lr,
                            const std::function<bool(const std::string&)>& filter) {
  for (auto& [name, e] : entries_) {
    if (filter && !filter(name)) continue;
    e.t += 1;
    e.m = opt.beta1 * e.m + (1.0 - opt.beta1) * e.grad;
    e.v = (opt.beta2 * e.v.array() + (1.0 - opt.beta2) * e.grad.array().square()).matrix();
    double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(e.t));
    double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(e.t));
    Mat update = (e.m.array() / bc1) / ((e.v.array() / bc2).sqrt() + opt.adam_eps);
    e.value -= lr * (update + opt.weight_decay * e.value);
  }
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, e] : entries_) out.push_back(name);
  return out;
}

size_t ParamStore::scalar_count() const {
  size_t n = 0;
  for (const auto& [name, e] : entries_) n += static_cast<size_t>(e.value.size());
  return n;
}

void ParamStore::save(std::ostream& out) const {
  write_u64(out, seed_);
  write_u64(out, entries_.size());
  for (const auto& [name, e] : entries_) {
    write_string(out, name);
    write_u64(out, static_cast<uint64_t>(e.t));
    write_mat(out, e.value);
    write_mat(out, e.m);
    write_mat(out, e.v);
  }
}

void ParamStore::load(std::istream& in) {
  seed_ = read_u64(in);
  uint64_t n = read_u64(in);
  require(n < (1u << 20), "param blob: unreasonable entry count");
  entries_.clear();
  for (uint64_t i = 0; i < n; ++i) {
    std::string name = read_string(in);
    Entry e;
    e.t = static_cast<int64_t>(read_u64(in));
    e.value = read_mat(in);
    e.m = read_mat(in);
    e.v = read_mat(in);
    e.grad = Mat::Zero(e.value.rows(), e.value.cols());
    entries_.emplace(std::move(name), std::move(e));
  }
  require(in.good(), "param blob: truncated");
}

}  // namespace promptevc::nn
