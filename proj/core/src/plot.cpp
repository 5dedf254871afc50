#include "promptevc/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "promptevc/dsp.hpp"

namespace promptevc {

void Image::set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
  if (x < 0 || y < 0 || x >= width || y >= height) return;
  size_t at = 3 * (static_cast<size_t>(y) * width + x);
  rgb[at] = r;
  rgb[at + 1] = g;
  rgb[at + 2] = b;
}

namespace {

void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void write_chunk(std::ofstream& f, const char type[4],
                 const std::vector<uint8_t>& data) {
  std::vector<uint8_t> head;
  put_u32(head, static_cast<uint32_t>(data.size()));
  f.write(reinterpret_cast<const char*>(head.data()), 4);
  f.write(type, 4);
  if (!data.empty())
    f.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty())
    crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  std::vector<uint8_t> tail;
  put_u32(tail, static_cast<uint32_t>(crc));
  f.write(reinterpret_cast<const char*>(tail.data()), 4);
}

// Dark-blue -> teal -> yellow gradient, linear between anchors.
void colormap(double v, uint8_t& r, uint8_t& g, uint8_t& b) {
  static const double anchors[][3] = {
      {0.10, 0.05, 0.25}, {0.15, 0.25, 0.55}, {0.10, 0.50, 0.55},
      {0.25, 0.70, 0.35}, {0.75, 0.85, 0.20}, {0.99, 0.95, 0.40},
  };
  constexpr int n = 6;
  v = std::clamp(v, 0.0, 1.0) * (n - 1);
  int i = std::min(static_cast<int>(v), n - 2);
  double u = v - i;
  r = static_cast<uint8_t>(255 * (anchors[i][0] + u * (anchors[i + 1][0] - anchors[i][0])));
  g = static_cast<uint8_t>(255 * (anchors[i][1] + u * (anchors[i + 1][1] - anchors[i][1])));
  b = static_cast<uint8_t>(255 * (anchors[i][2] + u * (anchors[i + 1][2] - anchors[i][2])));
}

}  // namespace

void write_png(const std::string& path, const Image& img) {
  require(img.width > 0 && img.height > 0, "png: empty image");
  require(img.rgb.size() == static_cast<size_t>(img.width) * img.height * 3,
          "png: pixel buffer size mismatch");
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot write image: " + path);

  static const uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
  f.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  put_u32(ihdr, static_cast<uint32_t>(img.width));
  put_u32(ihdr, static_cast<uint32_t>(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(2);  // truecolor
  ihdr.push_back(0);  // deflate
  ihdr.push_back(0);  // adaptive filtering
  ihdr.push_back(0);  // no interlace
  write_chunk(f, "IHDR", ihdr);

  // Scanlines, each with a leading filter byte of 0 (none).
  size_t stride = static_cast<size_t>(img.width) * 3;
  std::vector<uint8_t> raw((stride + 1) * static_cast<size_t>(img.height));
  for (int y = 0; y < img.height; ++y) {
    uint8_t* row = raw.data() + static_cast<size_t>(y) * (stride + 1);
    row[0] = 0;
    std::memcpy(row + 1, img.rgb.data() + static_cast<size_t>(y) * stride, stride);
  }
  uLongf bound = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> idat(bound);
  int rc = compress2(idat.data(), &bound, raw.data(),
                     static_cast<uLong>(raw.size()), 6);
  require(rc == Z_OK, "png: deflate failed");
  idat.resize(bound);
  write_chunk(f, "IDAT", idat);
  write_chunk(f, "IEND", {});
  require(f.good(), "png write failed: " + path);
}

Image render_mel_image(const std::vector<MelPanel>& panels,
                       const SystemConfig& cfg) {
  require(!panels.empty(), "plot: no panels");
  int max_t = 0;
  for (const auto& p : panels)
    max_t = std::max(max_t, static_cast<int>(p.log_mel.cols()));
  require(max_t > 0, "plot: empty spectrogram");

  int sx = std::max(1, 512 / max_t);  // integer upscale for short clips
  constexpr int sy = 2;
  constexpr int gap = 3;
  int n_mels = static_cast<int>(panels[0].log_mel.rows());
  int panel_h = n_mels * sy;
  int width = max_t * sx;
  int height = static_cast<int>(panels.size()) * panel_h +
               (static_cast<int>(panels.size()) - 1) * gap;
  Image img(width, height, 30);

  double fmax = cfg.sample_rate_hz / 2.0;
  double mel_top = hz_to_mel(fmax);

  for (size_t pi = 0; pi < panels.size(); ++pi) {
    const auto& p = panels[pi];
    require(p.log_mel.rows() == n_mels, "plot: mel bin counts differ");
    int y0 = static_cast<int>(pi) * (panel_h + gap);
    double lo = p.log_mel.minCoeff(), hi = p.log_mel.maxCoeff();
    double range = std::max(hi - lo, 1e-9);
    int T = static_cast<int>(p.log_mel.cols());
    for (int t = 0; t < T; ++t) {
      for (int m = 0; m < n_mels; ++m) {
        uint8_t r, g, b;
        colormap((p.log_mel(m, t) - lo) / range, r, g, b);
        // Bin 0 sits at the panel's bottom edge.
        int py = y0 + (n_mels - 1 - m) * sy;
        for (int dx = 0; dx < sx; ++dx)
          for (int dy = 0; dy < sy; ++dy)
            img.set(t * sx + dx, py + dy, r, g, b);
      }
    }
    for (Eigen::Index t = 0; t < p.f0_hz.size() && t < T; ++t) {
      if (p.f0_hz[t] <= 0) continue;
      double frac = hz_to_mel(p.f0_hz[t]) / mel_top;
      int py = y0 + panel_h - 1 - static_cast<int>(frac * (panel_h - 1));
      for (int dx = 0; dx < sx; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          img.set(static_cast<int>(t) * sx + dx, py + dy, 255, 64, 64);
    }
  }
  return img;
}

}  // namespace promptevc
