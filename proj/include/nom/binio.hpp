#pragma once

// Little-endian binary readers/writers for the NOMW / NOMF file formats.
// Parse failures carry the byte offset.

#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <string>
#include <vector>

namespace nom {

struct ParseError : std::runtime_error {
  size_t offset;
  ParseError(const std::string& msg, size_t off)
      : std::runtime_error(msg + " at byte " + std::to_string(off)), offset(off) {}
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<uint8_t> data) : data_(std::move(data)) {}

  size_t offset() const { return off_; }
  size_t remaining() const { return data_.size() - off_; }
  bool at_end() const { return off_ == data_.size(); }

  void expect_magic(const char* magic) {
    const size_t n = std::strlen(magic);
    if (remaining() < n) throw ParseError("truncated: expected magic " + std::string(magic), off_);
    if (std::memcmp(data_.data() + off_, magic, n) != 0)
      throw ParseError("bad magic, expected " + std::string(magic), off_);
    off_ += n;
  }

  uint32_t u32() {
    if (remaining() < 4) throw ParseError("truncated: expected u32", off_);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(data_[off_ + static_cast<size_t>(i)]) << (8 * i);
    off_ += 4;
    return v;
  }

  std::string str(size_t len) {
    if (remaining() < len) throw ParseError("truncated: expected " + std::to_string(len) + " name bytes", off_);
    std::string s(reinterpret_cast<const char*>(data_.data() + off_), len);
    off_ += len;
    return s;
  }

  void bytes(void* dst, size_t len) {
    if (remaining() < len)
      throw ParseError("truncated: expected " + std::to_string(len) + " bytes", off_);
    std::memcpy(dst, data_.data() + off_, len);
    off_ += len;
  }

  void floats(float* dst, size_t count) { bytes(dst, count * sizeof(float)); }

 private:
  std::vector<uint8_t> data_;
  size_t off_ = 0;
};

class ByteWriter {
 public:
  void magic(const char* m) { buf_.insert(buf_.end(), m, m + std::strlen(m)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
  }
  void str(const std::string& s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  void bytes(const void* src, size_t len) {
    const auto* p = static_cast<const uint8_t*>(src);
    buf_.insert(buf_.end(), p, p + len);
  }
  void floats(const float* src, size_t count) { bytes(src, count * sizeof(float)); }

  const std::vector<uint8_t>& buffer() const { return buf_; }

 private:
  std::vector<uint8_t> buf_;
};

std::vector<uint8_t> read_file(const std::string& path);
// Writes to <path>.tmp then renames; readers never observe partial files.
void write_file_atomic(const std::string& path, const std::vector<uint8_t>& bytes);

}  // namespace nom
