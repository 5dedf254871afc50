#include "promptevc/checkpoint.hpp"

#include <fstream>
#include <sstream>

#include "io_util.hpp"

namespace promptevc {

namespace {
constexpr char kMagic[4] = {'P', 'E', 'V', 'C'};
constexpr uint64_t kVersion = 1;

Checkpoint read_meta(std::istream& f, const std::string& path) {
  char magic[4];
  f.read(magic, 4);
  require(f.good() && std::equal(magic, magic + 4, kMagic),
          "not a checkpoint: " + path);
  require(io::read_u64(f) == kVersion, "unsupported checkpoint version: " + path);

  Checkpoint c;
  c.config = parse_config_text(io::read_string(f));
  c.phase = io::read_string(f);
  c.epoch = static_cast<int>(io::read_u64(f));
  c.step = static_cast<int64_t>(io::read_u64(f));
  c.codebook.centroids = io::read_mat(f);
  uint64_t n_spk = io::read_u64(f);
  for (uint64_t i = 0; i < n_spk; ++i) c.speakers.push_back(io::read_string(f));
  uint64_t n_extra = io::read_u64(f);
  for (uint64_t i = 0; i < n_extra; ++i) {
    std::string k = io::read_string(f);
    c.extras[k] = io::read_f64(f);
  }
  require(f.good(), "checkpoint truncated: " + path);
  return c;
}
}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& meta,
                     const nn::ParamStore& params) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail("cannot write checkpoint: " + path);
  f.write(kMagic, 4);
  io::write_u64(f, kVersion);
  io::write_string(f, serialize_config(meta.config));
  io::write_string(f, meta.phase);
  io::write_u64(f, static_cast<uint64_t>(meta.epoch));
  io::write_u64(f, static_cast<uint64_t>(meta.step));
  io::write_mat(f, meta.codebook.centroids);
  io::write_u64(f, meta.speakers.size());
  for (const auto& s : meta.speakers) io::write_string(f, s);
  io::write_u64(f, meta.extras.size());
  for (const auto& [k, v] : meta.extras) {
    io::write_string(f, k);
    io::write_f64(f, v);
  }
  params.save(f);
  require(f.good(), "checkpoint write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path, nn::ParamStore& params) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open checkpoint: " + path);
  Checkpoint c = read_meta(f, path);
  params.load(f);
  require(f.good(), "checkpoint truncated: " + path);
  return c;
}

Checkpoint read_checkpoint_meta(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail("cannot open checkpoint: " + path);
  return read_meta(f, path);
}

int speaker_index(const std::vector<std::string>& speakers,
                  const std::string& name) {
  for (size_t i = 0; i < speakers.size(); ++i)
    if (speakers[i] == name) return static_cast<int>(i);
  fail("unknown speaker: " + name);
}

}  // namespace promptevc
