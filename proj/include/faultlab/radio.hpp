#pragma once

#include <cstdint>
#include <vector>

namespace faultlab {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point2&) const = default;
};

/// Row-major 2-D grid; (i, j) = (row, column).
template <typename T>
struct Grid {
  int width = 0;
  int height = 0;
  std::vector<T> data;

  Grid() = default;
  Grid(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

  T& at(int i, int j) { return data[static_cast<std::size_t>(i) * width + j]; }
  const T& at(int i, int j) const { return data[static_cast<std::size_t>(i) * width + j]; }
  std::size_t size() const { return data.size(); }
  bool operator==(const Grid&) const = default;
};

struct SectorConfig {
  int site_id = 0;
  int sector_index = 0;  // 0, 1, 2
  Point2 position_m;
  double height_m = 30.0;
  double azimuth_deg = 0.0;  // compass bearing of boresight, clockwise from +y
  double tilt_deg = 0.0;     // positive = uptilt
  double tx_power_dbm = 43.0;
  double cio_db = 0.0;
  double antenna_gain_dbi = 18.3;
  bool enabled = true;

  bool operator==(const SectorConfig&) const = default;
};

struct ScenarioConfig {
  std::vector<SectorConfig> sectors;
  double carrier_freq_mhz = 2100.0;
  int grid_width_px = 64;
  int grid_height_px = 64;
  double pixel_size_m = 100.0;
  Point2 grid_origin_m{-3200.0, -3200.0};
  double ue_height_m = 1.5;
  double pathloss_intercept_db = 128.1;
  double pathloss_slope = 37.6;
  double shadowing_sigma_db = 6.0;
  int shadowing_smooth_radius_px = 3;
  double rsrp_floor_dbm = -140.0;
  std::uint64_t base_seed = 1;

  bool operator==(const ScenarioConfig&) const = default;
};

struct RsrpMap {
  int width = 0;
  int height = 0;
  Grid<double> rsrp_dbm;
  Grid<int> serving_sector;  // index into ScenarioConfig::sectors, -1 when none
  bool operator==(const RsrpMap&) const = default;
};

struct ServingCell {
  int sector = -1;
  double rsrp_dbm = 0.0;
};

/// Layout parameters for the generated hexagonal network.
struct HexLayout {
  int num_sites = 7;  // 1 (center only) or 7 (center + first ring)
  double inter_site_distance_m = 1732.0;
  double bs_height_m = 30.0;
  double tx_power_dbm = 43.0;
  double antenna_gain_dbi = 18.3;
};

/// Three sectors per site at azimuths 0/120/240 around a central site, with
/// the ring sites on a hexagon of radius inter_site_distance_m.
std::vector<SectorConfig> hex_sectors(const HexLayout& layout);

/// Desk-scale default: 7 sites, 21 sectors, 64x64 grid at 100 m centered on site 0.
ScenarioConfig default_scenario();

/// Throws InputError if any structural invariant is broken.
void validate(const ScenarioConfig& config);

/// Log-distance path loss with a 10 m clamp.
double path_loss_db(double distance_m, const ScenarioConfig& config);

double horizontal_attenuation_db(double horiz_offset_deg);
double vertical_attenuation_db(double elev_angle_deg, double tilt_deg);

/// Peak gain plus the combined two-plane parabolic attenuation (floored at 30 dB).
double antenna_gain_db(double horiz_offset_deg, double elev_angle_deg, const SectorConfig& sector);

/// Wraps an angle into (-180, 180].
double wrap_degrees(double deg);

/// Center of pixel (i, j) in metres.
Point2 pixel_center(int i, int j, const ScenarioConfig& config);

double rsrp_at(int i, int j, const SectorConfig& sector, const ScenarioConfig& config,
               const Grid<double>& shadowing);

/// argmax over enabled sectors of rsrp + cio; the returned power excludes the CIO.
ServingCell best_server(int i, int j, const ScenarioConfig& config, const Grid<double>& shadowing);

Grid<double> shadowing_grid(const ScenarioConfig& config, std::uint64_t sample_seed);

RsrpMap compute_rsrp_map(const ScenarioConfig& config, std::uint64_t sample_seed, unsigned threads = 1);

}  // namespace faultlab
