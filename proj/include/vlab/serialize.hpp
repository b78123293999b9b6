#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "vlab/error.hpp"
#include "vlab/tensor.hpp"

namespace vlab {

// Tensor container: magic "AT3D", version u16, dtype u8 (0 = real32), rank u8,
// extents u64 little-endian, then the raw little-endian payload.
inline constexpr char kTensorMagic[4] = {'A', 'T', '3', 'D'};
inline constexpr uint16_t kTensorVersion = 1;
inline constexpr uint8_t kDtypeReal32 = 0;

namespace detail {

inline void put_u16(std::ostream& os, uint16_t v) {
  char b[2] = {char(v & 0xFF), char(v >> 8)};
  os.write(b, 2);
}
inline void put_u32(std::ostream& os, uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
  os.write(b, 4);
}
inline void put_u64(std::ostream& os, uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xFF);
  os.write(b, 8);
}
inline uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return uint16_t(b[0] | (uint16_t(b[1]) << 8));
}
inline uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= uint32_t(b[i]) << (8 * i);
  return v;
}
inline uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= uint64_t(b[i]) << (8 * i);
  return v;
}

inline void put_f32(std::ostream& os, float f) {
  uint32_t v;
  static_assert(sizeof(v) == sizeof(f));
  std::memcpy(&v, &f, 4);
  put_u32(os, v);
}
inline float get_f32(std::istream& is) {
  uint32_t v = get_u32(is);
  float f;
  std::memcpy(&f, &v, 4);
  return f;
}

}  // namespace detail

template <typename T>
void write_tensor(std::ostream& os, const TensorT<T>& t) {
  os.write(kTensorMagic, 4);
  detail::put_u16(os, kTensorVersion);
  os.put(char(kDtypeReal32));
  if (t.rank() > 255) fail(ErrorKind::Container, "rank too large for container");
  os.put(char(uint8_t(t.rank())));
  for (int64_t e : t.shape()) detail::put_u64(os, uint64_t(e));
  const T* d = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) detail::put_f32(os, float(d[i]));
  if (!os) fail(ErrorKind::Io, "tensor write failed");
}

template <typename T>
TensorT<T> read_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kTensorMagic, 4) != 0) fail(ErrorKind::Container, "bad tensor magic");
  uint16_t version = detail::get_u16(is);
  if (version != kTensorVersion) fail(ErrorKind::Container, "unsupported container version " + std::to_string(version));
  int dtype = is.get();
  if (dtype != kDtypeReal32) fail(ErrorKind::Container, "unsupported dtype code " + std::to_string(dtype));
  int rank = is.get();
  if (rank < 0 || !is) fail(ErrorKind::Container, "truncated tensor header");
  Shape shape(static_cast<size_t>(rank), 0);
  for (int i = 0; i < rank; ++i) shape[size_t(i)] = int64_t(detail::get_u64(is));
  if (!is) fail(ErrorKind::Container, "truncated tensor extents");
  check_shape(shape);
  TensorT<T> t(shape);
  T* d = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) d[i] = T(detail::get_f32(is));
  if (!is) fail(ErrorKind::Container, "truncated tensor payload");
  return t;
}

template <typename T>
void save_tensor(const std::filesystem::path& path, const TensorT<T>& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(ErrorKind::Io, "cannot open " + path.string() + " for writing");
  write_tensor(os, t);
}

template <typename T>
TensorT<T> load_tensor(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(ErrorKind::Io, "cannot open " + path.string());
  return read_tensor<T>(is);
}

/// Writes via a temp file in the same directory and renames into place, so a
/// failed run never leaves a partial artifact.
class AtomicFile {
 public:
  explicit AtomicFile(std::filesystem::path path)
      : final_(std::move(path)), tmp_(final_.string() + ".tmp"), os_(tmp_, std::ios::binary) {
    if (!os_) fail(ErrorKind::Io, "cannot open " + tmp_.string() + " for writing");
  }

  ~AtomicFile() {
    if (!committed_) {
      os_.close();
      std::error_code ec;
      std::filesystem::remove(tmp_, ec);
    }
  }

  std::ostream& stream() { return os_; }

  void commit() {
    os_.flush();
    if (!os_) fail(ErrorKind::Io, "write failed for " + tmp_.string());
    os_.close();
    std::filesystem::rename(tmp_, final_);
    committed_ = true;
  }

 private:
  std::filesystem::path final_;
  std::filesystem::path tmp_;
  std::ofstream os_;
  bool committed_ = false;
};

}  // namespace vlab
