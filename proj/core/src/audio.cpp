#include "promptevc/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace promptevc {
namespace {

uint32_t read_u32(std::istream& f) {
  unsigned char b[4];
  f.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | uint32_t(b[1]) << 8 | uint32_t(b[2]) << 16 | uint32_t(b[3]) << 24;
}

uint16_t read_u16(std::istream& f) {
  unsigned char b[2];
  f.read(reinterpret_cast<char*>(b), 2);
  return uint16_t(b[0]) | uint16_t(b[1]) << 8;
}

void write_u32(std::ostream& f, uint32_t v) {
  char b[4] = {char(v & 0xff), char(v >> 8 & 0xff), char(v >> 16 & 0xff), char(v >> 24 & 0xff)};
  f.write(b, 4);
}

void write_u16(std::ostream& f, uint16_t v) {
  char b[2] = {char(v & 0xff), char(v >> 8 & 0xff)};
  f.write(b, 2);
}

}  // namespace

Wave read_wav(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open wav: " + path);

  char tag[4];
  f.read(tag, 4);
  if (std::memcmp(tag, "RIFF", 4) != 0) fail("not a RIFF file: " + path);
  read_u32(f);  // riff size
  f.read(tag, 4);
  if (std::memcmp(tag, "WAVE", 4) != 0) fail("not a WAVE file: " + path);

  uint16_t channels = 0, bits = 0;
  uint32_t rate = 0;
  std::vector<int16_t> pcm;
  bool have_fmt = false, have_data = false;

  while (f.read(tag, 4)) {
    uint32_t size = read_u32(f);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      uint16_t fmt = read_u16(f);
      channels = read_u16(f);
      rate = read_u32(f);
      read_u32(f);  // byte rate
      read_u16(f);  // block align
      bits = read_u16(f);
      if (size > 16) f.seekg(size - 16, std::ios::cur);
      if (fmt != 1) fail("wav must be PCM: " + path);
      if (bits != 16) fail("wav must be 16-bit: " + path);
      if (channels < 1 || channels > 2) fail("wav must be mono or stereo: " + path);
      have_fmt = true;
    } else if (std::memcmp(tag, "data", 4) == 0) {
      pcm.resize(size / 2);
      f.read(reinterpret_cast<char*>(pcm.data()), pcm.size() * 2);
      have_data = true;
    } else {
      f.seekg(size + (size & 1), std::ios::cur);
    }
  }
  if (!have_fmt || !have_data) fail("wav missing fmt or data chunk: " + path);

  Wave w;
  w.sample_rate = static_cast<int>(rate);
  size_t frames = pcm.size() / channels;
  w.samples.resize(frames);
  for (size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) acc += pcm[i * channels + c] / 32768.0;
    w.samples[i] = acc / channels;
  }
  return w;
}

void write_wav(const std::string& path, const Wave& w) {
  require(w.sample_rate > 0, "write_wav: sample_rate must be positive");
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot write wav: " + path);

  uint32_t data_bytes = static_cast<uint32_t>(w.samples.size() * 2);
  f.write("RIFF", 4);
  write_u32(f, 36 + data_bytes);
  f.write("WAVE", 4);
  f.write("fmt ", 4);
  write_u32(f, 16);
  write_u16(f, 1);  // PCM
  write_u16(f, 1);  // mono
  write_u32(f, static_cast<uint32_t>(w.sample_rate));
  write_u32(f, static_cast<uint32_t>(w.sample_rate * 2));
  write_u16(f, 2);
  write_u16(f, 16);
  f.write("data", 4);
  write_u32(f, data_bytes);
  for (double s : w.samples) {
    double c = std::clamp(s, -1.0, 1.0);
    int16_t v = static_cast<int16_t>(std::lrint(c * 32767.0));
    write_u16(f, static_cast<uint16_t>(v));
  }
}

Wave resample(const Wave& w, int target_rate) {
  require(target_rate > 0, "resample: target_rate must be positive");
  if (w.sample_rate == target_rate || w.samples.empty()) {
    Wave out = w;
    out.sample_rate = target_rate;
    return out;
  }
  double ratio = static_cast<double>(w.sample_rate) / target_rate;
  size_t out_len = static_cast<size_t>(std::floor((w.samples.size() - 1) / ratio)) + 1;
  Wave out;
  out.sample_rate = target_rate;
  out.samples.resize(out_len);
  for (size_t i = 0; i < out_len; ++i) {
    double pos = i * ratio;
    size_t i0 = static_cast<size_t>(pos);
    size_t i1 = std::min(i0 + 1, w.samples.size() - 1);
    double frac = pos - i0;
    out.samples[i] = w.samples[i0] * (1.0 - frac) + w.samples[i1] * frac;
  }
  return out;
}

void normalize_peak(Wave& w, double peak) {
  double m = 0.0;
  for (double s : w.samples) m = std::max(m, std::abs(s));
  if (m <= 0.0) return;
  double g = peak / m;
  for (double& s : w.samples) s *= g;
}

}  // namespace promptevc
