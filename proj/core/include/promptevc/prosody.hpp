#pragma once

#include <string>
#include <vector>

#include "promptevc/common.hpp"
#include "promptevc/nn/layers.hpp"

namespace promptevc {

// Token-level duration model. Six same-padded convolutions with a linear
// head; trained with teacher forcing against log(1 + duration).
class DurationPredictor {
 public:
  DurationPredictor(nn::ParamStore& ps, const std::string& name, int in_dim,
                    int channels);
  // in_dim x N tokens -> 1 x N predicted log(1 + duration)
  nn::Var apply(nn::Graph& g, nn::Var x, double dropout = 0.0,
                RngStream* rng = nullptr) const;

 private:
  std::vector<nn::Conv1d> convs_;
  std::vector<nn::LayerNorm> norms_;
  nn::Linear head_;
};

// Frame-level fundamental-frequency regressor over the expanded
// (duration-replicated) conditioning sequence.
class F0Predictor {
 public:
  F0Predictor(nn::ParamStore& ps, const std::string& name, int in_dim,
              int channels);
  // in_dim x T -> 1 x T predicted log F0
  nn::Var apply(nn::Graph& g, nn::Var x, double dropout = 0.0,
                RngStream* rng = nullptr) const;

 private:
  std::vector<nn::Conv1d> convs_;
  std::vector<nn::LayerNorm> norms_;
  nn::Linear head_;
};

// Compressed duration target, elementwise log(1 + d).
Vec log_duration_target(const std::vector<int>& durations);

// Inference-side inverse: round(exp(y) - 1), clamped to at least one frame.
std::vector<int> regulate_durations(const Vec& predicted_log);

// mean(log cosh(pred - log(1 + target))) over tokens.
nn::Var rhythm_loss(nn::Graph& g, nn::Var pred_log_dur,
                    const std::vector<int>& target_durations);

// 2-norm of (log f0 - predicted log f0) over frames voiced in the target.
// Zero when nothing is voiced.
nn::Var speaker_f0_loss(nn::Graph& g, nn::Var pred_log_f0, const Vec& f0_hz);

std::vector<int> voiced_frames(const Vec& f0_hz);

}  // namespace promptevc
