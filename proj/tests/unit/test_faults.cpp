#include <set>
#include <tuple>

#include "doctest.h"
#include "faultlab/common.hpp"
#include "faultlab/faults.hpp"

using namespace faultlab;

TEST_CASE("label codes are a stable contract") {
  CHECK(code(FaultLabel::Normal) == 0);
  CHECK(code(FaultLabel::AntennaDowntilt) == 7);
  for (FaultLabel l : kAllLabels) {
    CHECK(label_from_code(code(l)) == l);
    CHECK(label_from_name(label_name(l)) == l);
  }
  CHECK_THROWS_AS(label_from_code(8), InputError);
  CHECK_FALSE(label_from_name("Bogus").has_value());
}

TEST_CASE("normal fault leaves the scenario unchanged") {
  const ScenarioConfig c = default_scenario();
  CHECK(apply_fault(c, {}) == c);
}

TEST_CASE("tx power fault touches only the target site") {
  const ScenarioConfig c = default_scenario();
  const ScenarioConfig f = apply_fault(c, {FaultLabel::TxPower, 0, 0, 30.0, 0});
  for (std::size_t k = 0; k < c.sectors.size(); ++k) {
    if (c.sectors[k].site_id == 0) {
      CHECK(f.sectors[k].tx_power_dbm == 30.0);
    } else {
      CHECK(f.sectors[k] == c.sectors[k]);
    }
  }
}

TEST_CASE("cell outage flips exactly one enabled flag") {
  const ScenarioConfig c = default_scenario();
  const ScenarioConfig f = apply_fault(c, {FaultLabel::CellOutage, 2, 1, 0.0, 0});
  int flipped = 0;
  for (std::size_t k = 0; k < c.sectors.size(); ++k) {
    if (f.sectors[k].enabled != c.sectors[k].enabled) {
      ++flipped;
      CHECK(f.sectors[k].site_id == 2);
      CHECK(f.sectors[k].sector_index == 1);
    }
    SectorConfig s = f.sectors[k];
    s.enabled = c.sectors[k].enabled;
    CHECK(s == c.sectors[k]);
  }
  CHECK(flipped == 1);
}

TEST_CASE("site-level faults change only the target site") {
  const ScenarioConfig c = default_scenario();
  const FaultInstance faults[] = {{FaultLabel::SiteOutage, 3, 0, 0.0, 0},
                                  {FaultLabel::CioPositive, 3, 0, 10.0, 0},
                                  {FaultLabel::CioNegative, 3, 0, -10.0, 0},
                                  {FaultLabel::AntennaUptilt, 3, 0, 12.0, 0},
                                  {FaultLabel::AntennaDowntilt, 3, 0, -25.0, 0}};
  for (const auto& fault : faults) {
    const ScenarioConfig f = apply_fault(c, fault);
    for (std::size_t k = 0; k < c.sectors.size(); ++k) {
      if (c.sectors[k].site_id != 3) {
        CHECK(f.sectors[k] == c.sectors[k]);
        continue;
      }
      switch (fault.label) {
        case FaultLabel::SiteOutage: CHECK_FALSE(f.sectors[k].enabled); break;
        case FaultLabel::CioPositive:
        case FaultLabel::CioNegative: CHECK(f.sectors[k].cio_db == fault.parameter_value); break;
        default: CHECK(f.sectors[k].tilt_deg == fault.parameter_value); break;
      }
    }
  }
}

TEST_CASE("illegal fault parameters are rejected") {
  const ScenarioConfig c = default_scenario();
  CHECK_THROWS_AS(apply_fault(c, {FaultLabel::TxPower, 0, 0, 36.0, 0}), InputError);
  CHECK_THROWS_AS(apply_fault(c, {FaultLabel::TxPower, 0, 0, 30.5, 0}), InputError);
  CHECK_THROWS_AS(apply_fault(c, {FaultLabel::CioPositive, 0, 0, 5.0, 0}), InputError);
  CHECK_THROWS_AS(apply_fault(c, {FaultLabel::CioNegative, 0, 0, 10.0, 0}), InputError);
  CHECK_THROWS_AS(apply_fault(c, {FaultLabel::AntennaUptilt, 0, 0, 0.0, 0}), InputError);
  CHECK_THROWS_AS(apply_fault(c, {FaultLabel::AntennaDowntilt, 0, 0, 1.0, 0}), InputError);
  CHECK_THROWS_AS(apply_fault(c, {FaultLabel::CellOutage, 0, 3, 0.0, 0}), InputError);
  CHECK_THROWS_AS(apply_fault(c, {FaultLabel::SiteOutage, 9, 0, 0.0, 0}), InputError);
}

TEST_CASE("single-site enumeration has 77 instances") {
  const ScenarioConfig c = default_scenario();
  DatasetSpec spec;
  spec.target_sites = {0};
  spec.normal_samples = 10;
  const auto all = enumerate_dataset(c, spec);
  CHECK(all.size() == 77);
  std::array<int, 8> counts{};
  std::set<std::tuple<int, int, int, double, std::uint64_t>> seen;
  for (std::size_t k = 0; k < all.size(); ++k) {
    const auto& f = all[k];
    ++counts[static_cast<std::size_t>(code(f.label))];
    CHECK(f.sample_seed == k);
    seen.insert({code(f.label), f.target_site, f.target_sector, f.parameter_value, f.sample_seed});
  }
  CHECK(seen.size() == all.size());
  CHECK(counts == std::array<int, 8>{10, 3, 1, 11, 1, 1, 25, 25});
  for (int k = 0; k < 10; ++k) CHECK(all[static_cast<std::size_t>(k)].label == FaultLabel::Normal);
}

TEST_CASE("faults can be disabled") {
  DatasetSpec spec;
  spec.normal_samples = 5;
  spec.include.fill(false);
  const auto all = enumerate_dataset(default_scenario(), spec);
  CHECK(all.size() == 5);
  for (const auto& f : all) CHECK(f.label == FaultLabel::Normal);
}

TEST_CASE("labeled maps match direct computation") {
  const ScenarioConfig c = default_scenario();
  DatasetSpec spec;
  spec.normal_samples = 2;
  const auto maps = generate_labeled_maps(c, spec, 2);
  CHECK(maps.size() == 69);
  CHECK(maps[1].map == compute_rsrp_map(c, 1));
  const auto again = generate_labeled_maps(c, spec, 1);
  for (std::size_t k = 0; k < maps.size(); ++k) {
    CHECK(maps[k].fault == again[k].fault);
    CHECK(maps[k].map == again[k].map);
    CHECK(maps[k].map == compute_rsrp_map(apply_fault(c, maps[k].fault), maps[k].fault.sample_seed));
  }
}

TEST_CASE("outages are visible and never raise RSRP") {
  const ScenarioConfig c = default_scenario();
  const RsrpMap normal = compute_rsrp_map(c, 50);
  const RsrpMap site = compute_rsrp_map(apply_fault(c, {FaultLabel::SiteOutage, 0, 0, 0.0, 50}), 50);
  std::size_t differ = 0;
  for (std::size_t k = 0; k < normal.rsrp_dbm.size(); ++k) differ += site.rsrp_dbm.data[k] != normal.rsrp_dbm.data[k];
  CHECK(static_cast<double>(differ) >= 0.01 * static_cast<double>(normal.rsrp_dbm.size()));
  for (int sector = 0; sector < 3; ++sector) {
    const RsrpMap cell = compute_rsrp_map(apply_fault(c, {FaultLabel::CellOutage, 1, sector, 0.0, 50}), 50);
    for (std::size_t k = 0; k < normal.rsrp_dbm.size(); ++k) CHECK(cell.rsrp_dbm.data[k] <= normal.rsrp_dbm.data[k]);
  }
}
