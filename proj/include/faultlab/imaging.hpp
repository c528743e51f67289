#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "faultlab/faults.hpp"
#include "faultlab/radio.hpp"

namespace faultlab {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
  bool operator==(const GrayImage&) const = default;
};

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major, interleaved r,g,b
  bool operator==(const RgbImage&) const = default;
};

struct ColorStop {
  double t;
  std::uint8_t r, g, b;
};

class Colormap {
public:
  /// Throws InputError unless t is strictly increasing from 0 to 1.
  explicit Colormap(std::vector<ColorStop> stops);

  /// Navy, blue, green, yellow, red.
  static Colormap standard();

  std::array<std::uint8_t, 3> lookup(double t) const;
  const std::vector<ColorStop>& stops() const { return stops_; }

private:
  std::vector<ColorStop> stops_;
};

inline constexpr double kDisplayLoDbm = -130.0;
inline constexpr double kDisplayHiDbm = -50.0;

enum class ColorMode { Gray, Rgb };

struct LabeledSample {
  std::vector<double> features;
  FaultLabel label = FaultLabel::Normal;
  FaultInstance provenance;
};

/// clamp((rsrp - lo) / (hi - lo), 0, 1)
double normalize_rsrp(double rsrp, double lo, double hi);

GrayImage rsrp_to_gray(const RsrpMap& map, double lo = kDisplayLoDbm, double hi = kDisplayHiDbm);
RgbImage rsrp_to_rgb(const RsrpMap& map, double lo = kDisplayLoDbm, double hi = kDisplayHiDbm,
                     const Colormap& cmap = Colormap::standard());

/// BT.601 luma.
GrayImage rgb_to_gray(const RgbImage& img);

std::vector<double> flatten(const GrayImage& img);
std::vector<double> flatten(const RgbImage& img);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified per-class split; both index lists ascending.
SplitIndices split_indices(std::span<const FaultLabel> labels, double train_fraction, std::uint64_t seed);

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> train_test_split(
    std::span<const LabeledSample> samples, double train_fraction, std::uint64_t seed);

// Binary Netpbm (P5 / P6, maxval 255).
void write_pgm(const GrayImage& img, std::ostream& out);
GrayImage read_pgm(std::istream& in);
void write_ppm(const RgbImage& img, std::ostream& out);
RgbImage read_ppm(std::istream& in);

}  // namespace faultlab
