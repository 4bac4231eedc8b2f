#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "drcn/error.hpp"

namespace drcn {

// All artifacts are written tmp-then-rename so a crash mid-write never leaves
// a half-formed file behind under the final name.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& bytes) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to '" + tmp.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename '" + tmp.string() + "' to '" + path.string() +
                        "': " + ec.message());
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return bytes;
}

// Cursor over an in-memory byte buffer with format-error reporting.
class ByteReader {
 public:
  ByteReader(const std::string& bytes, std::string origin)
      : bytes_(bytes), origin_(std::move(origin)) {}

  std::size_t remaining() const { return bytes_.size() - pos_; }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }

  std::uint32_t u32_be() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_++]);
    return v;
  }

  std::uint32_t u32_le() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + i]);
    pos_ += 4;
    return v;
  }

  float f32_le() {
    const std::uint32_t bits = u32_le();
    float f;
    static_assert(sizeof(f) == 4);
    __builtin_memcpy(&f, &bits, 4);
    return f;
  }

  double f64_le() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<std::uint8_t>(bytes_[pos_ + i]);
    pos_ += 8;
    double d;
    __builtin_memcpy(&d, &v, 8);
    return d;
  }

  void raw(char* dst, std::size_t n) {
    need(n);
    __builtin_memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw FormatError("'" + origin_ + "' is truncated: need " + std::to_string(n) +
                        " bytes at offset " + std::to_string(pos_) + ", have " +
                        std::to_string(bytes_.size() - pos_));
    }
  }

 private:
  const std::string& bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }

  void u32_be(std::uint32_t v) {
    for (int i = 3; i >= 0; --i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  void u32_le(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }

  void f32_le(float f) {
    std::uint32_t bits;
    __builtin_memcpy(&bits, &f, 4);
    u32_le(bits);
  }

  void f64_le(double d) {
    std::uint64_t bits;
    __builtin_memcpy(&bits, &d, 8);
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
  }

  void raw(const char* src, std::size_t n) { bytes_.append(src, n); }

  const std::string& bytes() const { return bytes_; }
  std::string take() { return std::move(bytes_); }

 private:
  std::string bytes_;
};

}  // namespace drcn
