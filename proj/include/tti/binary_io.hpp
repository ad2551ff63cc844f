#pragma once

// Little-endian readers/writers shared by the EMB1, SFT1, CBK1, KNN1 and CLM1
// file formats. Values are encoded byte-by-byte so files are portable.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace tti::io {

class ByteWriter {
 public:
  void magic(std::string_view m) { bytes_.insert(bytes_.end(), m.begin(), m.end()); }
  void u16(std::uint16_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  /// u16 length prefix followed by the raw UTF-8 bytes.
  void short_string(std::string_view s);

  const std::vector<char>& bytes() const noexcept { return bytes_; }
  void write_file(const std::filesystem::path& path) const;

 private:
  std::vector<char> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<char> bytes, std::string what = "file")
      : bytes_(std::move(bytes)), what_(std::move(what)) {}
  static ByteReader from_file(const std::filesystem::path& path);

  /// Throws FormatError unless the next bytes equal `m`.
  void expect_magic(std::string_view m);
  std::uint16_t u16();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string short_string();

  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  /// Throws FormatError if fewer than `n` bytes remain.
  void require(std::size_t n, std::string_view context) const;
  void expect_end() const;

 private:
  std::vector<char> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<char> read_file_bytes(const std::filesystem::path& path);

/// 64-bit FNV-1a, used for content fingerprints in provenance records.
std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace tti::io
