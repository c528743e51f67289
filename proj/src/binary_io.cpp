#include "faultlab/binary_io.hpp"

#include <fstream>
#include <iterator>

#include "faultlab/common.hpp"

namespace faultlab {

void BinaryWriter::u32(std::uint32_t v) {
  for (int k = 0; k < 4; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
}

void BinaryWriter::u64(std::uint64_t v) {
  for (int k = 0; k < 8; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
}

void BinaryWriter::f64s(const std::vector<double>& v) {
  u64(v.size());
  for (double x : v) f64(x);
}

void BinaryReader::need(std::size_t n) const {
  if (buf_.size() - pos_ < n) throw FormatError("unexpected end of model file", pos_);
}

std::uint8_t BinaryReader::u8() {
  need(1);
  return static_cast<std::uint8_t>(buf_[pos_++]);
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * k);
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[pos_++])) << (8 * k);
  return v;
}

std::vector<double> BinaryReader::f64s() {
  const std::uint64_t n = u64();
  need(n * 8);
  std::vector<double> v(n);
  for (auto& x : v) x = f64();
  return v;
}

void BinaryReader::expect_magic(std::string_view m) {
  need(m.size());
  if (std::string_view(buf_).substr(pos_, m.size()) != m)
    throw FormatError("bad magic, expected " + std::string(m), pos_);
  pos_ += m.size();
}

void BinaryReader::expect_end() const {
  if (pos_ != buf_.size()) throw FormatError("trailing bytes in model file", pos_);
}

void write_header(BinaryWriter& w, const ModelHeader& h) {
  w.magic(h.magic);
  w.u8(kModelFormatVersion);
  w.u8(h.color_mode);
  w.u64(h.split_seed);
  w.u64(h.manifest_hash);
}

ModelHeader read_header(BinaryReader& r) {
  ModelHeader h;
  const std::size_t at = r.offset();
  std::string magic;
  for (int k = 0; k < 4; ++k) magic.push_back(static_cast<char>(r.u8()));
  for (const char* m : {"NBM1", "RFM1", "CNM1", "NEF1"})
    if (magic == m) h.magic = magic;
  if (h.magic.empty()) throw FormatError("unknown model magic", at);
  const std::size_t ver_at = r.offset();
  if (r.u8() != kModelFormatVersion) throw FormatError("unsupported model version", ver_at);
  h.color_mode = r.u8();
  h.split_seed = r.u64();
  h.manifest_hash = r.u64();
  return h;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("write failed for " + path);
}

}  // namespace faultlab
