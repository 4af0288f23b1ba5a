#ifndef BPR_BINARY_IO_HPP
#define BPR_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "bpr/core.hpp"

namespace bpr::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

/// Append-only little-endian byte buffer.
class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u8(std::uint8_t v) { bytes(&v, 1); }
  void u32(std::uint32_t v) { bytes(&v, 4); }
  void u64(std::uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void string(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void magic(const char (&m)[5]) { bytes(m, 4); }
  void short_string(const std::string& s) {
    if (s.size() > 255) throw FormatError("string longer than 255 bytes: " + s);
    u8(static_cast<std::uint8_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::vector<std::uint8_t>& data() const { return buf_; }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
    if (!out) throw FormatError("write failed: " + path);
  }

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked reader; errors name the byte offset.
class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> data, std::string source = "<memory>")
      : buf_(std::move(data)), source_(std::move(source)) {}

  static Reader from_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open for reading: " + path);
    std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return Reader(std::move(data), path);
  }

  void bytes(void* p, std::size_t n) {
    if (pos_ + n > buf_.size()) {
      throw FormatError(source_ + ": truncated at byte offset " + std::to_string(pos_) + ": expected " +
                        std::to_string(pos_ + n) + " bytes, file has " + std::to_string(buf_.size()));
    }
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  std::uint8_t u8() { std::uint8_t v; bytes(&v, 1); return v; }
  std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
  std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
  float f32() { float v; bytes(&v, 4); return v; }
  double f64() { double v; bytes(&v, 8); return v; }
  std::string string() {
    const auto n = u32();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::string short_string() {
    const std::size_t n = u8();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  void expect_magic(const char (&m)[5]) {
    char got[4];
    const std::size_t at = pos_;
    bytes(got, 4);
    if (std::memcmp(got, m, 4) != 0) {
      throw FormatError(source_ + ": bad magic at byte offset " + std::to_string(at) + " (expected \"" +
                        std::string(m, 4) + "\")");
    }
  }
  std::size_t offset() const { return pos_; }
  std::size_t size() const { return buf_.size(); }
  bool at_end() const { return pos_ == buf_.size(); }
  const std::string& source() const { return source_; }

 private:
  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
  std::string source_;
};

}  // namespace bpr::io

#endif  // BPR_BINARY_IO_HPP
