#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace faultlab {

inline constexpr std::uint8_t kModelFormatVersion = 1;

/// Little-endian writer into a byte buffer.
class BinaryWriter {
public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void f64s(const std::vector<double>& v);
  void magic(std::string_view m) { buf_.append(m); }

  const std::string& bytes() const { return buf_; }

private:
  std::string buf_;
};

/// Little-endian reader; throws FormatError with the failing byte offset.
class BinaryReader {
public:
  explicit BinaryReader(std::string bytes) : buf_(std::move(bytes)) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::vector<double> f64s();
  void expect_magic(std::string_view m);
  void expect_end() const;
  std::size_t offset() const { return pos_; }

private:
  void need(std::size_t n) const;
  std::string buf_;
  std::size_t pos_ = 0;
};

/// Header shared by every persisted model: magic, version byte, then the
/// provenance fields the evaluator uses to reject stale models.
struct ModelHeader {
  std::string magic;
  std::uint8_t color_mode = 0;   // 0 gray, 1 rgb
  std::uint64_t split_seed = 0;
  std::uint64_t manifest_hash = 0;
};

void write_header(BinaryWriter& w, const ModelHeader& h);
ModelHeader read_header(BinaryReader& r);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view bytes);

}  // namespace faultlab
