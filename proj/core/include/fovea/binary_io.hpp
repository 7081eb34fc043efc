#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fovea {

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept;

/// 64-bit FNV-1a; used for configuration and parameter fingerprints.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) noexcept;
std::string hex64(std::uint64_t v);

/// Little-endian append-only buffer.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v);
  void f64(double v);
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void str(std::string_view s);  // u32 length + bytes

  std::vector<std::uint8_t>& buffer() noexcept { return buf_; }
  std::size_t size() const noexcept { return buf_.size(); }

  /// Appends the CRC-32 of everything written so far.
  void seal();

 private:
  std::vector<std::uint8_t> buf_;
};

/// Little-endian reader over an in-memory file. Every read past the end throws
/// TruncatedError naming `what`.
class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8(const char* what);
  std::uint32_t u32(const char* what);
  std::uint64_t u64(const char* what);
  std::int32_t i32(const char* what) { return static_cast<std::int32_t>(u32(what)); }
  float f32(const char* what);
  double f64(const char* what);
  std::string str(const char* what);
  std::span<const std::uint8_t> bytes(std::size_t n, const char* what);

  std::size_t position() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return data_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) const;

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);

/// Writes to a sibling temp file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_atomic(const std::filesystem::path& path, std::string_view text);

/// Checks the trailing CRC-32 and returns the payload without it.
std::span<const std::uint8_t> verify_crc(std::span<const std::uint8_t> file, const std::string& what);

}  // namespace fovea
