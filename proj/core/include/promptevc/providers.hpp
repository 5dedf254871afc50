#pragma once

#include <memory>
#include <string>
#include <vector>

#include "promptevc/common.hpp"
#include "promptevc/config.hpp"

namespace promptevc {

// Three upstream feature roles. Each has a deterministic, self-contained
// stand-in so the whole system runs from raw audio and text alone; swapping
// in heavier pretrained extractors only requires honoring these interfaces.

// Frame-level content features. Must carry phonetic identity and as little
// pitch/loudness/speaker color as possible.
class ContentFeatureProvider {
 public:
  virtual ~ContentFeatureProvider() = default;
  virtual int dim() const = 0;
  virtual Mat features(const Mat& log_mel) const = 0;  // dim x T
};

// Prompt text -> style descriptor vector.
class TextDescriptorProvider {
 public:
  virtual ~TextDescriptorProvider() = default;
  virtual int dim() const = 0;
  virtual Vec embed(const std::string& prompt) const = 0;
};

// Reference audio -> emotion embedding (the mapper's regression target).
class ReferenceEmotionProvider {
 public:
  virtual ~ReferenceEmotionProvider() = default;
  virtual int dim() const = 0;
  virtual Vec embed(const Mat& log_mel) const = 0;
};

// Cepstral lifter + fixed random projection. Keeping a mid-quefrency band
// of the cepstrum drops overall energy (c0) and spectral tilt (c1), leaving
// envelope shape — a decent pitch-robust content proxy.
class CepstralContentProvider : public ContentFeatureProvider {
 public:
  CepstralContentProvider(const SystemConfig& cfg);
  int dim() const override { return static_cast<int>(proj_.rows()); }
  Mat features(const Mat& log_mel) const override;

 private:
  int lo_, hi_;
  Mat dct_;   // band of the DCT over mel bins
  Mat proj_;  // content_dim x (hi - lo)
};

// Order-free hashed word embeddings, averaged. Deterministic per word.
class HashedBagDescriptorProvider : public TextDescriptorProvider {
 public:
  HashedBagDescriptorProvider(int dim, uint64_t seed);
  int dim() const override { return dim_; }
  Vec embed(const std::string& prompt) const override;

 private:
  int dim_;
  uint64_t seed_;
};

// Per-bin mean/std of log-mel, standardized by fixed constants, then a
// fixed random projection. Carries register, tilt and energy statistics.
class SpectralStatsEmotionProvider : public ReferenceEmotionProvider {
 public:
  SpectralStatsEmotionProvider(const SystemConfig& cfg);
  int dim() const override { return static_cast<int>(proj_.rows()); }
  Vec embed(const Mat& log_mel) const override;

 private:
  Mat proj_;  // d_emo x (2 * n_mels)
};

// Lowercase word tokenizer shared by prompt handling code.
std::vector<std::string> tokenize_words(const std::string& text);

// Standardized per-bin mean/std stack of a log-mel matrix, 2*n_mels entries.
// Shared by the emotion provider, the intensity ranker and the eval helpers.
Vec spectral_stat_features(const Mat& log_mel);

struct Providers {
  std::unique_ptr<ContentFeatureProvider> content;
  std::unique_ptr<TextDescriptorProvider> descriptor;
  std::unique_ptr<ReferenceEmotionProvider> emotion;
};

Providers make_default_providers(const SystemConfig& cfg);

}  // namespace promptevc
