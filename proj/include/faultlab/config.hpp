#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "faultlab/cnn.hpp"
#include "faultlab/faults.hpp"
#include "faultlab/imaging.hpp"
#include "faultlab/nef.hpp"
#include "faultlab/radio.hpp"
#include "faultlab/random_forest.hpp"

namespace faultlab {

/// Parsed "key = value" lines grouped by [section], with source line numbers.
struct IniDocument {
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::map<std::string, std::map<std::string, Entry>> sections;
};

/// Throws InputError("line N: ...") on malformed input or duplicate keys.
IniDocument parse_ini(const std::string& text);

struct RunConfig {
  HexLayout layout;
  ScenarioConfig scenario;  // sectors generated from layout
  DatasetSpec dataset;
  double display_lo_dbm = kDisplayLoDbm;
  double display_hi_dbm = kDisplayHiDbm;
  std::uint64_t split_seed = 42;
  double train_fraction = 0.7;
  RfConfig rf;
  CnnConfig cnn;  // geometry is filled per color mode from the scenario grid
  NefConfig nef;
  double spike_dt = 0.001;
  double spike_duration = 0.2;
  std::string output_dir = "run";
  std::vector<ColorMode> color_modes{ColorMode::Gray, ColorMode::Rgb};
  unsigned threads = 1;
};

/// Desk-scale defaults: 7 sites, seven fault sweeps on the central site with
/// fresh shadowing each, 17 normal maps (486 samples).
RunConfig default_run_config();

/// Unknown sections or keys are errors; missing keys keep their defaults.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

/// CNN configuration for one color mode of this run.
CnnConfig cnn_config_for(const RunConfig& config, ColorMode mode);

}  // namespace faultlab
