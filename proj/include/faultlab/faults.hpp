#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "faultlab/radio.hpp"

namespace faultlab {

/// Integer codes are a serialization contract.
enum class FaultLabel : int {
  Normal = 0,
  CellOutage = 1,
  SiteOutage = 2,
  TxPower = 3,
  CioPositive = 4,
  CioNegative = 5,
  AntennaUptilt = 6,
  AntennaDowntilt = 7,
};

inline constexpr std::array<FaultLabel, 8> kAllLabels{
    FaultLabel::Normal,      FaultLabel::CellOutage,    FaultLabel::SiteOutage,    FaultLabel::TxPower,
    FaultLabel::CioPositive, FaultLabel::CioNegative, FaultLabel::AntennaUptilt, FaultLabel::AntennaDowntilt};

inline constexpr int code(FaultLabel l) { return static_cast<int>(l); }
FaultLabel label_from_code(int code);
std::string_view label_name(FaultLabel l);
std::optional<FaultLabel> label_from_name(std::string_view name);

struct FaultInstance {
  FaultLabel label = FaultLabel::Normal;
  int target_site = 0;
  int target_sector = 0;
  double parameter_value = 0.0;
  std::uint64_t sample_seed = 0;
  bool operator==(const FaultInstance&) const = default;
};

/// Throws InputError when parameter_value is outside the label's legal set.
void validate(const FaultInstance& fault);

struct DatasetSpec {
  std::vector<int> target_sites{0};
  int normal_samples = 10;
  /// Inclusion flag per label code; index 0 (Normal) is governed by normal_samples.
  std::array<bool, 8> include{true, true, true, true, true, true, true, true};
};

/// Returns a modified copy of config; only sectors of fault.target_site change.
ScenarioConfig apply_fault(const ScenarioConfig& config, const FaultInstance& fault);

/// Normals first, then the per-site fault sweep; sample_seed is the running index.
std::vector<FaultInstance> enumerate_dataset(const ScenarioConfig& config, const DatasetSpec& spec);

struct LabeledMap {
  FaultInstance fault;
  RsrpMap map;
};

std::vector<LabeledMap> generate_labeled_maps(const ScenarioConfig& config, const DatasetSpec& spec,
                                              unsigned threads = 1);

}  // namespace faultlab
