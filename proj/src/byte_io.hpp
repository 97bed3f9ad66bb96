#pragma once

// Little-endian byte packing shared by the binary formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "l2s/io.hpp"

namespace l2s::io::detail {

class ByteWriter {
 public:
  void U8(std::uint8_t v) { bytes_.push_back(v); }
  void U16(std::uint16_t v) { Le(v, 2); }
  void U32(std::uint32_t v) { Le(v, 4); }
  void U64(std::uint64_t v) { Le(v, 8); }
  void F32(float v) { U32(std::bit_cast<std::uint32_t>(v)); }
  void F64(double v) { U64(std::bit_cast<std::uint64_t>(v)); }
  void Raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
  void Str(const std::string& s) {
    U64(s.size());
    Raw(s);
  }

  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  void Le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  std::uint8_t U8() { return static_cast<std::uint8_t>(Le(1)); }
  std::uint16_t U16() { return static_cast<std::uint16_t>(Le(2)); }
  std::uint32_t U32() { return static_cast<std::uint32_t>(Le(4)); }
  std::uint64_t U64() { return Le(8); }
  float F32() { return std::bit_cast<float>(U32()); }
  double F64() { return std::bit_cast<double>(U64()); }
  std::string Raw(std::size_t n) {
    Need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::string Str() { return Raw(Count(1)); }
  // A u64 element count, checked against the bytes left at `elem_size` each.
  std::size_t Count(std::size_t elem_size) {
    const std::uint64_t n = U64();
    if (elem_size > 0 && n > remaining() / elem_size) Fail("count exceeds remaining data");
    return static_cast<std::size_t>(n);
  }
  void Skip(std::size_t n) {
    Need(n);
    pos_ += n;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  [[noreturn]] void Fail(const std::string& msg) const { throw FormatError(what_ + ": " + msg); }

 private:
  void Need(std::size_t n) const {
    if (n > remaining()) Fail("truncated (needed " + std::to_string(n) + " more bytes)");
  }
  std::uint64_t Le(int n) {
    Need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  const std::vector<std::uint8_t>& bytes_;
  std::string what_;
  std::size_t pos_ = 0;
};

}  // namespace l2s::io::detail
