#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "promptevc/common.hpp"

namespace promptevc::io {

inline void write_u64(std::ostream& o, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = (v >> (8 * i)) & 0xff;
  o.write(reinterpret_cast<char*>(b), 8);
}

inline uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

inline void write_f64(std::ostream& o, double d) {
  o.write(reinterpret_cast<const char*>(&d), sizeof(double));
}

inline double read_f64(std::istream& in) {
  double d = 0;
  in.read(reinterpret_cast<char*>(&d), sizeof(double));
  return d;
}

inline void write_string(std::ostream& o, const std::string& s) {
  write_u64(o, s.size());
  o.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline std::string read_string(std::istream& in) {
  uint64_t n = read_u64(in);
  require(n < (1ull << 30), "blob: unreasonable string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  return s;
}

inline void write_mat(std::ostream& o, const Mat& m) {
  write_u64(o, static_cast<uint64_t>(m.rows()));
  write_u64(o, static_cast<uint64_t>(m.cols()));
  o.write(reinterpret_cast<const char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
}

inline Mat read_mat(std::istream& in) {
  uint64_t r = read_u64(in), c = read_u64(in);
  require(r < (1u << 24) && c < (1u << 24), "blob: unreasonable matrix size");
  Mat m(static_cast<int>(r), static_cast<int>(c));
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  return m;
}

inline void write_vec(std::ostream& o, const Vec& v) {
  write_u64(o, static_cast<uint64_t>(v.size()));
  o.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * v.size()));
}

inline Vec read_vec(std::istream& in) {
  uint64_t n = read_u64(in);
  require(n < (1u << 28), "blob: unreasonable vector size");
  Vec v(static_cast<int>(n));
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * v.size()));
  return v;
}

inline void write_doubles(std::ostream& o, const std::vector<double>& v) {
  write_u64(o, v.size());
  o.write(reinterpret_cast<const char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * v.size()));
}

inline std::vector<double> read_doubles(std::istream& in) {
  uint64_t n = read_u64(in);
  require(n < (1ull << 28), "blob: unreasonable sample count");
  std::vector<double> v(n);
  in.read(reinterpret_cast<char*>(v.data()),
          static_cast<std::streamsize>(sizeof(double) * v.size()));
  return v;
}

}  // namespace promptevc::io
