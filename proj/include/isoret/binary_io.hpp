#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace isoret {

using Digest = std::array<std::uint8_t, 32>;

/// SHA-256 of a byte range.
Digest sha256(std::span<const std::uint8_t> bytes);
std::string to_hex(const Digest& digest);

/// Little-endian byte sink used by every binary cache format.
class ByteWriter {
 public:
  void magic(std::string_view tag);  // exactly 8 bytes, zero padded
  void u32(std::uint32_t v);
  void f32(float v);
  void bytes(std::span<const std::uint8_t> b);

  const std::vector<std::uint8_t>& data() const { return buf_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  std::vector<std::uint8_t> buf_;
};

/// Bounds-checked little-endian reader; throws FormatError on truncation.
class ByteReader {
 public:
  ByteReader(std::vector<std::uint8_t> data, std::string source);
  static ByteReader from_file(const std::filesystem::path& path);

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  float f32();
  void bytes(std::span<std::uint8_t> out);
  std::size_t remaining() const { return data_.size() - pos_; }
  const std::string& source() const { return source_; }

 private:
  void need(std::size_t n) const;

  std::vector<std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string source_;
};

}  // namespace isoret
