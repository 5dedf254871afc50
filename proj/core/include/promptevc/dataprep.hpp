#pragma once

#include <string>
#include <vector>

#include "promptevc/config.hpp"
#include "promptevc/model.hpp"
#include "promptevc/providers.hpp"
#include "promptevc/types.hpp"

namespace promptevc {

// JSONL manifests, one record per line:
//   {"id": "...", "wav": "...", "text": "...", "emotion": "...", "speaker": "..."}
// `speaker` is optional.
std::vector<UtteranceRecord> load_manifest(const std::string& path);
void save_manifest(const std::string& path,
                   const std::vector<UtteranceRecord>& records);
uint64_t manifest_digest(const std::vector<UtteranceRecord>& records);

// Linear relative ranker: emotional clips should outscore neutral ones by a
// margin; same-label pairs are pulled toward equal scores. Trained with a
// fixed-iteration projected subgradient method.
struct RankerResult {
  Vec w;
  std::vector<double> scores;
};
RankerResult train_emotion_ranker(const Mat& feats,
                                  const std::vector<bool>& is_emotional,
                                  uint64_t seed, int iters = 1000);

// 30/40/30 split by score: the top round(0.3 n) are high, the bottom
// round(0.3 n) low, the rest medium. Ties break stably by id.
std::vector<Level> bucket_by_score(const std::vector<double>& scores,
                                   const std::vector<std::string>& ids);

// Fills emotion_score and intensity on emotional records, grouped per
// emotion against the neutral ones.
void annotate_intensity(std::vector<UtteranceRecord>& records,
                        const std::vector<Vec>& stat_feats, uint64_t seed);

// Relative tempo versus the parallel neutral rendition of the same text.
Tempo relative_tempo(double duration_s, double neutral_duration_s);

class PromptTemplater {
 public:
  static PromptTemplater builtin();
  static PromptTemplater from_file(const std::string& path);

  int count() const { return static_cast<int>(templates_.size()); }
  std::string render(int index, const StyleFactors& f) const;
  // Deterministic template choice per (seed, salt).
  std::string render_seeded(const StyleFactors& f, uint64_t seed,
                            const std::string& salt) const;

 private:
  std::vector<std::string> templates_;
};

// Prompts must never talk about speaker identity.
const std::vector<std::string>& prompt_deny_list();
bool prompt_allowed(const std::string& prompt);

// Precomputed per-utterance features plus the rendered training prompt.
struct CachedUtterance {
  UtteranceRecord record;
  FrameFeatures feats;
  std::string prompt;
  Vec e_txt;
};

struct DataCache {
  uint64_t manifest_hash = 0;
  uint64_t feature_hash = 0;
  std::vector<CachedUtterance> items;
};

DataCache prepare_cache(const std::vector<UtteranceRecord>& records,
                        const SystemConfig& cfg, const Providers& providers);
void save_cache(const std::string& path, const DataCache& cache);
// Verifies the stored feature hash against cfg; pass verify=false to skip.
DataCache load_cache(const std::string& path, const SystemConfig& cfg,
                     bool verify = true);

// Feature extraction for one waveform (shared by prepare and convert).
FrameFeatures extract_features(const std::vector<double>& samples,
                               const SystemConfig& cfg,
                               const Providers& providers);

}  // namespace promptevc
