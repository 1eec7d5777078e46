#pragma once

// Checkpoint file layout (little-endian):
//   16 bytes  magic "LINKFORGE-CKPT\0\0"
//   u64       config length, then that many bytes of key=value text
//   u64       number of arrays
//   per array: u32 name length, name bytes, u64 rows, u64 cols, rows*cols f64

#include <bit>
#include <cstdint>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "linkforge/data_io.hpp"
#include "linkforge/error.hpp"
#include "linkforge/tensor.hpp"

namespace linkforge {

inline constexpr char kCheckpointMagic[16] = {'L', 'I', 'N', 'K', 'F', 'O', 'R', 'G',
                                              'E', '-', 'C', 'K', 'P', 'T', '\0', '\0'};

struct Checkpoint {
  std::string config;                       // key=value echo of the run config
  std::vector<std::pair<std::string, Matrix>> arrays;

  const Matrix* find(const std::string& name) const {
    for (const auto& [n, m] : arrays)
      if (n == name) return &m;
    return nullptr;
  }
};

namespace detail {

template <typename T>
void put_le(std::string& out, T value) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t b = 0; b < sizeof(T); ++b) out.push_back(static_cast<char>((value >> (8 * b)) & 0xff));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
      v |= static_cast<T>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorKind::checkpoint, "truncated checkpoint");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::put_le<std::uint64_t>(out, ckpt.config.size());
  out += ckpt.config;
  detail::put_le<std::uint64_t>(out, ckpt.arrays.size());
  for (const auto& [name, m] : ckpt.arrays) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    detail::put_le<std::uint64_t>(out, m.rows());
    detail::put_le<std::uint64_t>(out, m.cols());
    for (double v : m.data()) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& bytes) {
  if (bytes.size() < sizeof kCheckpointMagic || std::memcmp(bytes.data(), kCheckpointMagic, sizeof kCheckpointMagic) != 0) {
    fail(ErrorKind::checkpoint, "bad checkpoint magic");
  }
  detail::Reader r(bytes);
  r.take(sizeof kCheckpointMagic);
  Checkpoint ckpt;
  ckpt.config = r.take(static_cast<std::size_t>(r.get<std::uint64_t>()));
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t a = 0; a < count; ++a) {
    std::string name = r.take(r.get<std::uint32_t>());
    const auto rows = static_cast<std::size_t>(r.get<std::uint64_t>());
    const auto cols = static_cast<std::size_t>(r.get<std::uint64_t>());
    if (cols != 0 && rows > (bytes.size() / 8) / cols) fail(ErrorKind::checkpoint, "array '" + name + "' larger than file");
    std::vector<double> data(rows * cols);
    for (double& v : data) v = std::bit_cast<double>(r.get<std::uint64_t>());
    ckpt.arrays.emplace_back(std::move(name), Matrix(rows, cols, std::move(data)));
  }
  if (!r.done()) fail(ErrorKind::checkpoint, "trailing bytes after last array");
  return ckpt;
}

inline void save_checkpoint(const Checkpoint& ckpt, const fs::path& path) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

inline Checkpoint load_checkpoint(const fs::path& path) {
  if (!fs::exists(path)) fail(ErrorKind::checkpoint, "no checkpoint at " + path.string());
  return decode_checkpoint(read_file(path));
}

}  // namespace linkforge
