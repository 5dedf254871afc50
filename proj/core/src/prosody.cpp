#include "promptevc/prosody.hpp"

#include <cmath>

namespace promptevc {

DurationPredictor::DurationPredictor(nn::ParamStore& ps, const std::string& name,
                                     int in_dim, int channels)
    : head_(ps, name + ".head", channels, 1) {
  for (int i = 0; i < 6; ++i) {
    int in = i == 0 ? in_dim : channels;
    convs_.emplace_back(ps, name + ".conv" + std::to_string(i), in, channels, 3);
    norms_.emplace_back(ps, name + ".ln" + std::to_string(i), channels);
  }
}

nn::Var DurationPredictor::apply(nn::Graph& g, nn::Var x, double dropout,
                                 RngStream* rng) const {
  for (size_t i = 0; i < convs_.size(); ++i) {
    x = norms_[i].apply(g, g.lrelu(convs_[i].apply(g, x)));
    if (dropout > 0.0 && rng) x = g.dropout(x, dropout, *rng);
  }
  // Offset so the untrained head already sits near a plausible log(1 + d)
  // instead of predicting empty tokens.
  return g.add_scalar(head_.apply(g, x), 1.0);
}

F0Predictor::F0Predictor(nn::ParamStore& ps, const std::string& name, int in_dim,
                         int channels)
    : head_(ps, name + ".head", channels, 1) {
  for (int i = 0; i < 3; ++i) {
    int in = i == 0 ? in_dim : channels;
    convs_.emplace_back(ps, name + ".conv" + std::to_string(i), in, channels, 5);
    norms_.emplace_back(ps, name + ".ln" + std::to_string(i), channels);
  }
}

nn::Var F0Predictor::apply(nn::Graph& g, nn::Var x, double dropout,
                           RngStream* rng) const {
  for (size_t i = 0; i < convs_.size(); ++i) {
    x = norms_[i].apply(g, g.lrelu(convs_[i].apply(g, x)));
    if (dropout > 0.0 && rng) x = g.dropout(x, dropout, *rng);
  }
  return head_.apply(g, x);
}

Vec log_duration_target(const std::vector<int>& durations) {
  Vec y(static_cast<int>(durations.size()));
  for (size_t i = 0; i < durations.size(); ++i) {
    require(durations[i] >= 0, "duration target must be nonnegative");
    y[static_cast<int>(i)] = std::log(1.0 + durations[i]);
  }
  return y;
}

std::vector<int> regulate_durations(const Vec& predicted_log) {
  std::vector<int> out(static_cast<size_t>(predicted_log.size()));
  for (int i = 0; i < predicted_log.size(); ++i) {
    double d = std::round(std::exp(predicted_log[i]) - 1.0);
    out[static_cast<size_t>(i)] = d < 1.0 ? 1 : static_cast<int>(d);
  }
  return out;
}

nn::Var rhythm_loss(nn::Graph& g, nn::Var pred_log_dur,
                    const std::vector<int>& target_durations) {
  require(g.rows_of(pred_log_dur) == 1, "rhythm loss: prediction must be 1 x N");
  require(g.cols_of(pred_log_dur) == static_cast<int>(target_durations.size()),
          "rhythm loss: token count mismatch");
  Vec y = log_duration_target(target_durations);
  nn::Var target = g.constant(y.transpose());
  return g.mean_all(g.logcosh(g.sub(pred_log_dur, target)));
}

std::vector<int> voiced_frames(const Vec& f0_hz) {
  std::vector<int> idx;
  for (int i = 0; i < f0_hz.size(); ++i)
    if (f0_hz[i] > 0.0) idx.push_back(i);
  return idx;
}

nn::Var speaker_f0_loss(nn::Graph& g, nn::Var pred_log_f0, const Vec& f0_hz) {
  require(g.rows_of(pred_log_f0) == 1, "f0 loss: prediction must be 1 x T");
  require(g.cols_of(pred_log_f0) == static_cast<int>(f0_hz.size()),
          "f0 loss: frame count mismatch");
  auto idx = voiced_frames(f0_hz);
  if (idx.empty()) return g.constant(Mat::Zero(1, 1));
  Mat target(1, static_cast<int>(idx.size()));
  for (size_t i = 0; i < idx.size(); ++i)
    target(0, static_cast<int>(i)) = std::log(f0_hz[idx[i]]);
  nn::Var pred_v = g.gather_cols(pred_log_f0, idx);
  return g.norm2(g.sub(g.constant(target), pred_v));
}

}  // namespace promptevc
