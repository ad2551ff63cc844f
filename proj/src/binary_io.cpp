#include "tti/binary_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "tti/error.hpp"

namespace tti::io {

namespace {

template <typename U>
void put_le(std::vector<char>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

void ByteWriter::u16(std::uint16_t v) { put_le(bytes_, v); }
void ByteWriter::u32(std::uint32_t v) { put_le(bytes_, v); }
void ByteWriter::u64(std::uint64_t v) { put_le(bytes_, v); }
void ByteWriter::f32(float v) { put_le(bytes_, std::bit_cast<std::uint32_t>(v)); }
void ByteWriter::f64(double v) { put_le(bytes_, std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::short_string(std::string_view s) {
  if (s.size() > 0xFFFF) throw ValidationError("string too long for u16 length prefix");
  u16(static_cast<std::uint16_t>(s.size()));
  bytes_.insert(bytes_.end(), s.begin(), s.end());
}

void ByteWriter::write_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(bytes_.data(), static_cast<std::streamsize>(bytes_.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<char> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ByteReader ByteReader::from_file(const std::filesystem::path& path) {
  return ByteReader(read_file_bytes(path), path.string());
}

void ByteReader::require(std::size_t n, std::string_view context) const {
  if (remaining() < n) {
    throw FormatError(what_ + ": truncated payload while reading " + std::string(context));
  }
}

void ByteReader::expect_magic(std::string_view m) {
  require(m.size(), "magic");
  if (std::memcmp(bytes_.data() + pos_, m.data(), m.size()) != 0) {
    throw FormatError(what_ + ": bad magic or version, expected \"" + std::string(m) + "\"");
  }
  pos_ += m.size();
}

namespace {

template <typename U>
U get_le(const std::vector<char>& bytes, std::size_t& pos) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    v |= static_cast<U>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  }
  pos += sizeof(U);
  return v;
}

}  // namespace

std::uint16_t ByteReader::u16() {
  require(2, "u16");
  return get_le<std::uint16_t>(bytes_, pos_);
}
std::uint32_t ByteReader::u32() {
  require(4, "u32");
  return get_le<std::uint32_t>(bytes_, pos_);
}
std::uint64_t ByteReader::u64() {
  require(8, "u64");
  return get_le<std::uint64_t>(bytes_, pos_);
}
float ByteReader::f32() {
  require(4, "f32");
  return std::bit_cast<float>(get_le<std::uint32_t>(bytes_, pos_));
}
double ByteReader::f64() {
  require(8, "f64");
  return std::bit_cast<double>(get_le<std::uint64_t>(bytes_, pos_));
}

std::string ByteReader::short_string() {
  const auto n = u16();
  require(n, "string");
  std::string s(bytes_.data() + pos_, n);
  pos_ += n;
  return s;
}

void ByteReader::expect_end() const {
  if (remaining() != 0) {
    throw FormatError(what_ + ": " + std::to_string(remaining()) + " trailing bytes");
  }
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace tti::io
