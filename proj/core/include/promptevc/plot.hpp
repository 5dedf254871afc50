#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promptevc/common.hpp"
#include "promptevc/config.hpp"

namespace promptevc {

struct Image {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> rgb;  // 3 bytes per pixel, rows top to bottom

  Image() = default;
  Image(int w, int h, uint8_t fill = 0)
      : width(w), height(h),
        rgb(static_cast<size_t>(w) * static_cast<size_t>(h) * 3, fill) {}
  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b);
};

// 8-bit RGB PNG, zlib-compressed.
void write_png(const std::string& path, const Image& img);

struct MelPanel {
  Mat log_mel;  // n_mels x T
  Vec f0_hz;    // optional overlay; empty to skip
};

// Stacked heatmaps (low mel bins at the bottom) with the F0 contour drawn
// on top at its mel-scale position.
Image render_mel_image(const std::vector<MelPanel>& panels,
                       const SystemConfig& cfg);

}  // namespace promptevc
