#include "faultlab/faults.hpp"

#include <cmath>
#include <string>

#include "faultlab/common.hpp"

namespace faultlab {

namespace {

constexpr std::array<std::string_view, 8> kNames{"Normal",      "CellOutage",  "SiteOutage",    "TxPower",
                                                 "CioPositive", "CioNegative", "AntennaUptilt", "AntennaDowntilt"};

bool is_integer_in(double v, int lo, int hi) {
  return v == std::floor(v) && v >= lo && v <= hi;
}

}  // namespace

FaultLabel label_from_code(int c) {
  if (c < 0 || c >= kNumClasses) throw InputError("label code out of range: " + std::to_string(c));
  return static_cast<FaultLabel>(c);
}

std::string_view label_name(FaultLabel l) { return kNames[static_cast<std::size_t>(code(l))]; }

std::optional<FaultLabel> label_from_name(std::string_view name) {
  for (std::size_t k = 0; k < kNames.size(); ++k)
    if (kNames[k] == name) return static_cast<FaultLabel>(k);
  return std::nullopt;
}

void validate(const FaultInstance& f) {
  const double v = f.parameter_value;
  const std::string name(label_name(f.label));
  switch (f.label) {
    case FaultLabel::Normal:
    case FaultLabel::SiteOutage:
      break;
    case FaultLabel::CellOutage:
      if (f.target_sector < 0 || f.target_sector > 2) throw InputError("CellOutage target_sector must be 0..2");
      break;
    case FaultLabel::TxPower:
      if (!is_integer_in(v, 25, 35)) throw InputError(name + " parameter must be an integer in 25..35 dBm");
      break;
    case FaultLabel::CioPositive:
      if (v != 10.0) throw InputError(name + " parameter must be +10 dB");
      break;
    case FaultLabel::CioNegative:
      if (v != -10.0) throw InputError(name + " parameter must be -10 dB");
      break;
    case FaultLabel::AntennaUptilt:
      if (!is_integer_in(v, 1, 25)) throw InputError(name + " parameter must be an integer in 1..25 deg");
      break;
    case FaultLabel::AntennaDowntilt:
      if (!is_integer_in(v, -25, -1)) throw InputError(name + " parameter must be an integer in -25..-1 deg");
      break;
  }
}

ScenarioConfig apply_fault(const ScenarioConfig& config, const FaultInstance& fault) {
  validate(fault);
  ScenarioConfig out = config;
  if (fault.label == FaultLabel::Normal) return out;

  bool found = false;
  for (auto& s : out.sectors) {
    if (s.site_id != fault.target_site) continue;
    found = true;
    switch (fault.label) {
      case FaultLabel::CellOutage:
        if (s.sector_index == fault.target_sector) s.enabled = false;
        break;
      case FaultLabel::SiteOutage:
        s.enabled = false;
        break;
      case FaultLabel::TxPower:
        s.tx_power_dbm = fault.parameter_value;
        break;
      case FaultLabel::CioPositive:
      case FaultLabel::CioNegative:
        s.cio_db = fault.parameter_value;
        break;
      case FaultLabel::AntennaUptilt:
      case FaultLabel::AntennaDowntilt:
        s.tilt_deg = fault.parameter_value;
        break;
      case FaultLabel::Normal:
        break;
    }
  }
  if (!found) throw InputError("unknown site id " + std::to_string(fault.target_site));
  return out;
}

std::vector<FaultInstance> enumerate_dataset(const ScenarioConfig& config, const DatasetSpec& spec) {
  if (spec.normal_samples < 1) throw InputError("normal_samples must be >= 1");
  if (spec.target_sites.empty()) throw InputError("target_sites must be nonempty");
  for (int site : spec.target_sites) {
    bool found = false;
    for (const auto& s : config.sectors) found = found || s.site_id == site;
    if (!found) throw InputError("unknown target site " + std::to_string(site));
  }

  std::vector<FaultInstance> out;
  std::uint64_t seed = 0;
  auto push = [&](FaultLabel l, int site, int sector, double value) {
    out.push_back({l, site, sector, value, seed++});
  };
  auto on = [&](FaultLabel l) { return spec.include[static_cast<std::size_t>(code(l))]; };

  for (int k = 0; k < spec.normal_samples; ++k) push(FaultLabel::Normal, 0, 0, 0.0);
  for (int site : spec.target_sites) {
    if (on(FaultLabel::CellOutage))
      for (int sec = 0; sec < 3; ++sec) push(FaultLabel::CellOutage, site, sec, 0.0);
    if (on(FaultLabel::SiteOutage)) push(FaultLabel::SiteOutage, site, 0, 0.0);
    if (on(FaultLabel::TxPower))
      for (int p = 25; p <= 35; ++p) push(FaultLabel::TxPower, site, 0, p);
    if (on(FaultLabel::CioPositive)) push(FaultLabel::CioPositive, site, 0, 10.0);
    if (on(FaultLabel::CioNegative)) push(FaultLabel::CioNegative, site, 0, -10.0);
    if (on(FaultLabel::AntennaUptilt))
      for (int t = 1; t <= 25; ++t) push(FaultLabel::AntennaUptilt, site, 0, t);
    if (on(FaultLabel::AntennaDowntilt))
      for (int t = -1; t >= -25; --t) push(FaultLabel::AntennaDowntilt, site, 0, t);
  }
  return out;
}

std::vector<LabeledMap> generate_labeled_maps(const ScenarioConfig& config, const DatasetSpec& spec,
                                              unsigned threads) {
  const auto instances = enumerate_dataset(config, spec);
  std::vector<LabeledMap> out(instances.size());
  parallel_for(instances.size(), threads, [&](std::size_t k) {
    out[k].fault = instances[k];
    out[k].map = compute_rsrp_map(apply_fault(config, instances[k]), instances[k].sample_seed);
  });
  return out;
}

}  // namespace faultlab
