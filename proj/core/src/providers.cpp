#include "promptevc/providers.hpp"

#include <cctype>
#include <cmath>

#include "promptevc/dsp.hpp"
#include "promptevc/rng.hpp"

namespace promptevc {

CepstralContentProvider::CepstralContentProvider(const SystemConfig& cfg)
    : lo_(cfg.model.content_lifter_lo), hi_(cfg.model.content_lifter_hi) {
  require(lo_ >= 0 && hi_ > lo_ && hi_ <= cfg.n_mels, "content lifter range invalid");
  Mat full = dct_matrix(cfg.n_mels);
  dct_ = full.middleRows(lo_, hi_ - lo_);
  RngStream rng(cfg.seed, "provider:content");
  int band = hi_ - lo_;
  proj_ = rng.normal_mat(cfg.model.content_dim, band, 1.0 / std::sqrt(band));
}

Mat CepstralContentProvider::features(const Mat& log_mel) const {
  require(log_mel.rows() == dct_.cols(), "content provider: mel dim mismatch");
  return proj_ * (dct_ * log_mel);
}

HashedBagDescriptorProvider::HashedBagDescriptorProvider(int dim, uint64_t seed)
    : dim_(dim), seed_(seed) {}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch)) || ch == '\'') {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    } else if (!cur.empty()) {
      words.push_back(cur);
      cur.clear();
    }
  }
  if (!cur.empty()) words.push_back(cur);
  return words;
}

Vec HashedBagDescriptorProvider::embed(const std::string& prompt) const {
  auto words = tokenize_words(prompt);
  Vec acc = Vec::Zero(dim_);
  if (words.empty()) return acc;
  for (const auto& w : words) {
    RngStream rng(seed_, "word:" + w);
    acc += rng.normal_mat(dim_, 1, 1.0).col(0);
  }
  // 1/sqrt(n) keeps the norm roughly length-independent.
  return acc / std::sqrt(static_cast<double>(words.size()));
}

SpectralStatsEmotionProvider::SpectralStatsEmotionProvider(const SystemConfig& cfg) {
  RngStream rng(cfg.seed, "provider:emotion");
  int in = 2 * cfg.n_mels;
  proj_ = rng.normal_mat(cfg.d_emo, in, 1.0 / std::sqrt(in));
}

Vec spectral_stat_features(const Mat& log_mel) {
  require(log_mel.cols() > 0, "stat features: empty spectrogram");
  int n = static_cast<int>(log_mel.rows());
  Vec mean = log_mel.rowwise().mean();
  Vec var = (log_mel.colwise() - mean).array().square().rowwise().mean();
  Vec stats(2 * n);
  // Fixed affine standardization: log-mel of speech sits near -5 with a
  // spread of a few nats, so this lands features in a unit-ish range.
  stats.head(n) = (mean.array() + 5.0) / 4.0;
  stats.tail(n) = (var.array().sqrt() + 5.0) / 4.0;
  return stats;
}

Vec SpectralStatsEmotionProvider::embed(const Mat& log_mel) const {
  Vec stats = spectral_stat_features(log_mel);
  require(stats.size() == proj_.cols(), "emotion provider: mel dim mismatch");
  return proj_ * stats;
}

Providers make_default_providers(const SystemConfig& cfg) {
  Providers p;
  p.content = std::make_unique<CepstralContentProvider>(cfg);
  p.descriptor = std::make_unique<HashedBagDescriptorProvider>(
      cfg.model.descriptor_dim, cfg.seed);
  p.emotion = std::make_unique<SpectralStatsEmotionProvider>(cfg);
  return p;
}

}  // namespace promptevc
