#include "faultlab/radio.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <string>

#include "faultlab/common.hpp"

namespace faultlab {

namespace {

constexpr double kMinDistanceM = 10.0;
constexpr double kHalfPowerBeamwidthDeg = 65.0;
constexpr double kVerticalBeamwidthDeg = 10.0;
constexpr double kFrontToBackDb = 30.0;
constexpr double kSideLobeLimitDb = 20.0;

double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }
double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

// Separable box blur with edge replication.
void box_blur(Grid<double>& g, int radius) {
  if (radius <= 0) return;
  const int w = g.width;
  const int h = g.height;
  const double norm = 1.0 / (2 * radius + 1);
  Grid<double> tmp(w, h);
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += g.at(i, std::clamp(j + k, 0, w - 1));
      tmp.at(i, j) = s * norm;
    }
  }
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < w; ++j) {
      double s = 0.0;
      for (int k = -radius; k <= radius; ++k) s += tmp.at(std::clamp(i + k, 0, h - 1), j);
      g.at(i, j) = s * norm;
    }
  }
}

}  // namespace

std::vector<SectorConfig> hex_sectors(const HexLayout& layout) {
  if (layout.num_sites != 1 && layout.num_sites != 7)
    throw InputError("hex layout supports 1 or 7 sites, got " + std::to_string(layout.num_sites));
  std::vector<Point2> sites{{0.0, 0.0}};
  for (int k = 1; k < layout.num_sites; ++k) {
    const double a = deg2rad(30.0 + 60.0 * (k - 1));
    sites.push_back({layout.inter_site_distance_m * std::cos(a), layout.inter_site_distance_m * std::sin(a)});
  }
  std::vector<SectorConfig> sectors;
  for (int s = 0; s < static_cast<int>(sites.size()); ++s) {
    for (int k = 0; k < 3; ++k) {
      SectorConfig sc;
      sc.site_id = s;
      sc.sector_index = k;
      sc.position_m = sites[s];
      sc.height_m = layout.bs_height_m;
      sc.azimuth_deg = 120.0 * k;
      sc.tx_power_dbm = layout.tx_power_dbm;
      sc.antenna_gain_dbi = layout.antenna_gain_dbi;
      sectors.push_back(sc);
    }
  }
  return sectors;
}

ScenarioConfig default_scenario() {
  ScenarioConfig c;
  c.sectors = hex_sectors(HexLayout{});
  return c;
}

void validate(const ScenarioConfig& c) {
  if (c.grid_width_px < 8 || c.grid_height_px < 8) throw InputError("grid dimensions must be >= 8");
  if (!(c.pixel_size_m > 0.0)) throw InputError("pixel_size_m must be > 0");
  if (!(c.shadowing_sigma_db >= 0.0)) throw InputError("shadowing_sigma_db must be >= 0");
  if (c.shadowing_smooth_radius_px < 0) throw InputError("shadowing_smooth_radius_px must be >= 0");

  const double ext_w = c.grid_width_px * c.pixel_size_m;
  const double ext_h = c.grid_height_px * c.pixel_size_m;
  std::map<int, std::vector<const SectorConfig*>> by_site;
  for (const auto& s : c.sectors) {
    if (s.sector_index < 0 || s.sector_index > 2)
      throw InputError("sector_index out of range at site " + std::to_string(s.site_id));
    if (s.tx_power_dbm < 0.0 || s.tx_power_dbm > 60.0)
      throw InputError("tx_power_dbm out of [0, 60] at site " + std::to_string(s.site_id));
    if (s.antenna_gain_dbi < 0.0) throw InputError("antenna_gain_dbi must be >= 0");
    if (s.tilt_deg < -90.0 || s.tilt_deg > 90.0) throw InputError("tilt_deg out of [-90, 90]");
    if (s.azimuth_deg < 0.0 || s.azimuth_deg >= 360.0) throw InputError("azimuth_deg out of [0, 360)");
    const double rx = s.position_m.x - c.grid_origin_m.x;
    const double ry = s.position_m.y - c.grid_origin_m.y;
    if (rx < -ext_w || rx > 2 * ext_w || ry < -ext_h || ry > 2 * ext_h)
      throw InputError("sector of site " + std::to_string(s.site_id) + " lies too far outside the grid");
    by_site[s.site_id].push_back(&s);
  }
  for (const auto& [site, secs] : by_site) {
    if (secs.size() != 3) throw InputError("site " + std::to_string(site) + " must have exactly 3 sectors");
    for (std::size_t a = 0; a < 3; ++a) {
      for (std::size_t b = a + 1; b < 3; ++b) {
        if (secs[a]->sector_index == secs[b]->sector_index)
          throw InputError("duplicate sector_index at site " + std::to_string(site));
        const double sep = std::abs(wrap_degrees(secs[a]->azimuth_deg - secs[b]->azimuth_deg));
        if (std::abs(sep - 120.0) > 1e-9)
          throw InputError("sector azimuths at site " + std::to_string(site) + " must be 120 deg apart");
      }
    }
  }
}

double path_loss_db(double distance_m, const ScenarioConfig& config) {
  const double d = std::max(distance_m, kMinDistanceM);
  return config.pathloss_intercept_db + config.pathloss_slope * std::log10(d / 1000.0);
}

double horizontal_attenuation_db(double phi) {
  const double r = phi / kHalfPowerBeamwidthDeg;
  return -std::min(12.0 * r * r, kFrontToBackDb);
}

double vertical_attenuation_db(double theta, double tilt) {
  const double r = (theta - tilt) / kVerticalBeamwidthDeg;
  return -std::min(12.0 * r * r, kSideLobeLimitDb);
}

double antenna_gain_db(double phi, double theta, const SectorConfig& sector) {
  const double combined = -std::min(-(horizontal_attenuation_db(phi) + vertical_attenuation_db(theta, sector.tilt_deg)),
                                    kFrontToBackDb);
  return sector.antenna_gain_dbi + combined;
}

double wrap_degrees(double deg) {
  double w = std::fmod(deg, 360.0);
  if (w <= -180.0) w += 360.0;
  if (w > 180.0) w -= 360.0;
  return w;
}

Point2 pixel_center(int i, int j, const ScenarioConfig& c) {
  return {c.grid_origin_m.x + (j + 0.5) * c.pixel_size_m, c.grid_origin_m.y + (i + 0.5) * c.pixel_size_m};
}

double rsrp_at(int i, int j, const SectorConfig& sector, const ScenarioConfig& config, const Grid<double>& shadowing) {
  if (!sector.enabled) throw InputError("rsrp_at called on a disabled sector");
  if (shadowing.width != config.grid_width_px || shadowing.height != config.grid_height_px)
    throw InputError("shadowing grid does not match scenario grid");
  const Point2 p = pixel_center(i, j, config);
  const double dx = p.x - sector.position_m.x;
  const double dy = p.y - sector.position_m.y;
  const double d2 = std::hypot(dx, dy);
  const double dh = config.ue_height_m - sector.height_m;
  const double bearing = rad2deg(std::atan2(dx, dy));
  const double phi = wrap_degrees(bearing - sector.azimuth_deg);
  const double theta = rad2deg(std::atan2(dh, d2));
  const double d3 = std::hypot(d2, dh);
  const double value =
      sector.tx_power_dbm + antenna_gain_db(phi, theta, sector) - path_loss_db(d3, config) - shadowing.at(i, j);
  return std::max(config.rsrp_floor_dbm, value);
}

ServingCell best_server(int i, int j, const ScenarioConfig& config, const Grid<double>& shadowing) {
  ServingCell best{-1, config.rsrp_floor_dbm};
  double best_score = 0.0;
  for (int s = 0; s < static_cast<int>(config.sectors.size()); ++s) {
    const auto& sec = config.sectors[s];
    if (!sec.enabled) continue;
    const double r = rsrp_at(i, j, sec, config, shadowing);
    const double score = r + sec.cio_db;
    if (best.sector < 0 || score > best_score) {
      best = {s, r};
      best_score = score;
    }
  }
  return best;
}

Grid<double> shadowing_grid(const ScenarioConfig& config, std::uint64_t sample_seed) {
  const int w = config.grid_width_px;
  const int h = config.grid_height_px;
  Grid<double> g(w, h, 0.0);
  if (config.shadowing_sigma_db == 0.0) return g;

  Rng rng(derive_seed(config.base_seed, stream::kShadowing, sample_seed));
  for (auto& v : g.data) v = rng.normal();
  box_blur(g, config.shadowing_smooth_radius_px);
  box_blur(g, config.shadowing_smooth_radius_px);

  double mean = 0.0;
  for (double v : g.data) mean += v;
  mean /= static_cast<double>(g.size());
  double var = 0.0;
  for (double v : g.data) var += (v - mean) * (v - mean);
  var /= static_cast<double>(g.size());
  const double scale = var > 0.0 ? config.shadowing_sigma_db / std::sqrt(var) : 0.0;
  for (double& v : g.data) v = (v - mean) * scale;
  return g;
}

RsrpMap compute_rsrp_map(const ScenarioConfig& config, std::uint64_t sample_seed, unsigned threads) {
  validate(config);
  const Grid<double> shadow = shadowing_grid(config, sample_seed);
  RsrpMap m;
  m.width = config.grid_width_px;
  m.height = config.grid_height_px;
  m.rsrp_dbm = Grid<double>(m.width, m.height, config.rsrp_floor_dbm);
  m.serving_sector = Grid<int>(m.width, m.height, -1);
  parallel_for(static_cast<std::size_t>(m.height), threads, [&](std::size_t row) {
    const int i = static_cast<int>(row);
    for (int j = 0; j < m.width; ++j) {
      const ServingCell s = best_server(i, j, config, shadow);
      m.rsrp_dbm.at(i, j) = s.rsrp_dbm;
      m.serving_sector.at(i, j) = s.sector;
    }
  });
  return m;
}

}  // namespace faultlab
