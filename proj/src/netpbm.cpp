#include <cctype>
#include <istream>
#include <iterator>
#include <ostream>
#include <string>

#include "faultlab/common.hpp"
#include "faultlab/imaging.hpp"

namespace faultlab {

namespace {

struct Header {
  int width = 0;
  int height = 0;
  std::size_t data_offset = 0;
};

bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

class HeaderParser {
public:
  explicit HeaderParser(const std::string& bytes) : b_(bytes) {}

  void magic(const char* expected) {
    if (b_.size() < 2 || b_[0] != expected[0] || b_[1] != expected[1])
      throw FormatError(std::string("bad magic, expected ") + expected, 0);
    pos_ = 2;
  }

  // One or more whitespace characters, with '#' comments running to end of line.
  void whitespace() {
    const std::size_t start = pos_;
    while (pos_ < b_.size()) {
      const auto c = static_cast<unsigned char>(b_[pos_]);
      if (is_space(c)) {
        ++pos_;
      } else if (c == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) throw FormatError("expected whitespace in header", pos_);
  }

  int number(const char* what) {
    const std::size_t start = pos_;
    long long v = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + (b_[pos_] - '0');
      if (v > 1'000'000) throw FormatError(std::string(what) + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw FormatError(std::string("expected ") + what, start);
    return static_cast<int>(v);
  }

  // Exactly one whitespace byte separates maxval from the raster.
  void single_space() {
    if (pos_ >= b_.size() || !is_space(static_cast<unsigned char>(b_[pos_])))
      throw FormatError("expected single whitespace after maxval", pos_);
    ++pos_;
  }

  std::size_t pos() const { return pos_; }

private:
  const std::string& b_;
  std::size_t pos_ = 0;
};

Header parse_header(const std::string& bytes, const char* magic) {
  HeaderParser p(bytes);
  p.magic(magic);
  p.whitespace();
  Header h;
  h.width = p.number("width");
  p.whitespace();
  h.height = p.number("height");
  p.whitespace();
  const std::size_t maxval_at = p.pos();
  const int maxval = p.number("maxval");
  if (maxval != 255) throw FormatError("maxval must be 255, got " + std::to_string(maxval), maxval_at);
  p.single_space();
  if (h.width <= 0 || h.height <= 0) throw FormatError("image dimensions must be positive", maxval_at);
  h.data_offset = p.pos();
  return h;
}

std::string slurp(std::istream& in) {
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_netpbm(const char* magic, int w, int h, const std::vector<std::uint8_t>& raster, std::ostream& out) {
  out << magic << '\n' << w << ' ' << h << '\n' << 255 << '\n';
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw InputError("failed to write image");
}

std::vector<std::uint8_t> read_raster(const std::string& bytes, const Header& h, std::size_t channels) {
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height * channels;
  if (bytes.size() - h.data_offset < n) throw FormatError("truncated raster", bytes.size());
  if (bytes.size() - h.data_offset > n) throw FormatError("trailing bytes after raster", h.data_offset + n);
  const auto* first = reinterpret_cast<const std::uint8_t*>(bytes.data() + h.data_offset);
  return std::vector<std::uint8_t>(first, first + n);
}

}  // namespace

void write_pgm(const GrayImage& img, std::ostream& out) { write_netpbm("P5", img.width, img.height, img.pixels, out); }

void write_ppm(const RgbImage& img, std::ostream& out) { write_netpbm("P6", img.width, img.height, img.pixels, out); }

GrayImage read_pgm(std::istream& in) {
  const std::string bytes = slurp(in);
  const Header h = parse_header(bytes, "P5");
  return GrayImage{h.width, h.height, read_raster(bytes, h, 1)};
}

RgbImage read_ppm(std::istream& in) {
  const std::string bytes = slurp(in);
  const Header h = parse_header(bytes, "P6");
  return RgbImage{h.width, h.height, read_raster(bytes, h, 3)};
}

}  // namespace faultlab
