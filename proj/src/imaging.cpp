#include "faultlab/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "faultlab/common.hpp"

namespace faultlab {

Colormap::Colormap(std::vector<ColorStop> stops) : stops_(std::move(stops)) {
  if (stops_.size() < 2) throw InputError("colormap needs at least 2 stops");
  if (stops_.front().t != 0.0 || stops_.back().t != 1.0) throw InputError("colormap must span t = 0 .. 1");
  for (std::size_t k = 1; k < stops_.size(); ++k)
    if (!(stops_[k].t > stops_[k - 1].t)) throw InputError("colormap stops must be strictly increasing");
}

Colormap Colormap::standard() {
  return Colormap({{0.0, 0, 0, 128}, {0.25, 0, 0, 255}, {0.5, 0, 255, 0}, {0.75, 255, 255, 0}, {1.0, 255, 0, 0}});
}

std::array<std::uint8_t, 3> Colormap::lookup(double t) const {
  t = std::clamp(t, 0.0, 1.0);
  std::size_t k = 0;
  while (k + 2 < stops_.size() && t > stops_[k + 1].t) ++k;
  const ColorStop& a = stops_[k];
  const ColorStop& b = stops_[k + 1];
  const double f = (t - a.t) / (b.t - a.t);
  auto lerp = [f](std::uint8_t x, std::uint8_t y) {
    return static_cast<std::uint8_t>(std::clamp(round_half_up(x + f * (static_cast<double>(y) - x)), 0, 255));
  };
  return {lerp(a.r, b.r), lerp(a.g, b.g), lerp(a.b, b.b)};
}

double normalize_rsrp(double rsrp, double lo, double hi) {
  if (!(lo < hi)) throw InputError("display range requires lo < hi");
  return std::clamp((rsrp - lo) / (hi - lo), 0.0, 1.0);
}

GrayImage rsrp_to_gray(const RsrpMap& map, double lo, double hi) {
  if (!(lo < hi)) throw InputError("display range requires lo < hi");
  GrayImage img{map.width, map.height, std::vector<std::uint8_t>(map.rsrp_dbm.size())};
  for (std::size_t k = 0; k < img.pixels.size(); ++k)
    img.pixels[k] = static_cast<std::uint8_t>(round_half_up(255.0 * normalize_rsrp(map.rsrp_dbm.data[k], lo, hi)));
  return img;
}

RgbImage rsrp_to_rgb(const RsrpMap& map, double lo, double hi, const Colormap& cmap) {
  if (!(lo < hi)) throw InputError("display range requires lo < hi");
  RgbImage img{map.width, map.height, std::vector<std::uint8_t>(3 * map.rsrp_dbm.size())};
  for (std::size_t k = 0; k < map.rsrp_dbm.size(); ++k) {
    const auto c = cmap.lookup(normalize_rsrp(map.rsrp_dbm.data[k], lo, hi));
    std::copy(c.begin(), c.end(), img.pixels.begin() + static_cast<std::ptrdiff_t>(3 * k));
  }
  return img;
}

GrayImage rgb_to_gray(const RgbImage& img) {
  GrayImage out{img.width, img.height, std::vector<std::uint8_t>(img.pixels.size() / 3)};
  for (std::size_t k = 0; k < out.pixels.size(); ++k) {
    const double y = 0.299 * img.pixels[3 * k] + 0.587 * img.pixels[3 * k + 1] + 0.114 * img.pixels[3 * k + 2];
    out.pixels[k] = static_cast<std::uint8_t>(std::clamp(round_half_up(y), 0, 255));
  }
  return out;
}

std::vector<double> flatten(const GrayImage& img) {
  std::vector<double> f(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), f.begin(), [](std::uint8_t p) { return p / 255.0; });
  return f;
}

std::vector<double> flatten(const RgbImage& img) {
  std::vector<double> f(img.pixels.size());
  std::transform(img.pixels.begin(), img.pixels.end(), f.begin(), [](std::uint8_t p) { return p / 255.0; });
  return f;
}

SplitIndices split_indices(std::span<const FaultLabel> labels, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InputError("train_fraction must be in (0, 1)");
  std::array<std::vector<std::size_t>, kNumClasses> members;
  for (std::size_t k = 0; k < labels.size(); ++k) members[static_cast<std::size_t>(code(labels[k]))].push_back(k);

  SplitIndices out;
  for (int c = 0; c < kNumClasses; ++c) {
    auto& m = members[static_cast<std::size_t>(c)];
    if (m.empty()) continue;
    if (m.size() < 2)
      throw InputError("class " + std::string(label_name(label_from_code(c))) + " has fewer than 2 samples");
    Rng rng(derive_seed(seed, stream::kSplit, static_cast<std::uint64_t>(c)));
    for (std::size_t k = m.size() - 1; k > 0; --k) std::swap(m[k], m[rng.index(k + 1)]);
    const auto n = static_cast<std::ptrdiff_t>(m.size());
    // Small epsilon so products like 0.7 * 10 do not round down to 6.
    auto n_train = static_cast<std::ptrdiff_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
    n_train = std::clamp<std::ptrdiff_t>(n_train, 1, n - 1);
    out.train.insert(out.train.end(), m.begin(), m.begin() + n_train);
    out.test.insert(out.test.end(), m.begin() + n_train, m.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> train_test_split(
    std::span<const LabeledSample> samples, double train_fraction, std::uint64_t seed) {
  std::vector<FaultLabel> labels;
  labels.reserve(samples.size());
  for (const auto& s : samples) labels.push_back(s.label);
  const SplitIndices idx = split_indices(labels, train_fraction, seed);
  std::pair<std::vector<LabeledSample>, std::vector<LabeledSample>> out;
  for (auto k : idx.train) out.first.push_back(samples[k]);
  for (auto k : idx.test) out.second.push_back(samples[k]);
  return out;
}

}  // namespace faultlab
