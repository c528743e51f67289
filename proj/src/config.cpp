#include "faultlab/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include "faultlab/binary_io.hpp"
#include "faultlab/common.hpp"

namespace faultlab {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

[[noreturn]] void fail(int line, const std::string& what) {
  throw InputError("line " + std::to_string(line) + ": " + what);
}

double to_double(const IniDocument::Entry& e) {
  double v = 0.0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end) fail(e.line, "expected a number, got '" + e.value + "'");
  return v;
}

long long to_integer(const IniDocument::Entry& e) {
  long long v = 0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end) fail(e.line, "expected an integer, got '" + e.value + "'");
  return v;
}

int to_int(const IniDocument::Entry& e) { return static_cast<int>(to_integer(e)); }

std::uint64_t to_u64(const IniDocument::Entry& e) {
  std::uint64_t v = 0;
  const char* b = e.value.data();
  const char* end = b + e.value.size();
  auto [p, ec] = std::from_chars(b, end, v);
  if (ec != std::errc() || p != end) fail(e.line, "expected an unsigned integer, got '" + e.value + "'");
  return v;
}

std::vector<int> to_int_list(const IniDocument::Entry& e) {
  std::vector<int> out;
  for (const auto& item : split_list(e.value)) out.push_back(to_int({item, e.line}));
  if (out.empty()) fail(e.line, "expected a nonempty list");
  return out;
}

using Setter = std::function<void(RunConfig&, const IniDocument::Entry&)>;

#define REAL(field) [](RunConfig& c, const IniDocument::Entry& e) { c.field = to_double(e); }
#define INT(field) [](RunConfig& c, const IniDocument::Entry& e) { c.field = to_int(e); }
#define U64(field) [](RunConfig& c, const IniDocument::Entry& e) { c.field = to_u64(e); }

const std::map<std::string, std::map<std::string, Setter>>& schema() {
  static const std::map<std::string, std::map<std::string, Setter>> s{
      {"scenario",
       {{"num_sites", INT(layout.num_sites)},
        {"inter_site_distance_m", REAL(layout.inter_site_distance_m)},
        {"bs_height_m", REAL(layout.bs_height_m)},
        {"tx_power_dbm", REAL(layout.tx_power_dbm)},
        {"antenna_gain_dbi", REAL(layout.antenna_gain_dbi)},
        {"carrier_freq_mhz", REAL(scenario.carrier_freq_mhz)},
        {"grid_width_px", INT(scenario.grid_width_px)},
        {"grid_height_px", INT(scenario.grid_height_px)},
        {"pixel_size_m", REAL(scenario.pixel_size_m)},
        {"grid_origin_x_m", REAL(scenario.grid_origin_m.x)},
        {"grid_origin_y_m", REAL(scenario.grid_origin_m.y)},
        {"ue_height_m", REAL(scenario.ue_height_m)},
        {"pathloss_intercept_db", REAL(scenario.pathloss_intercept_db)},
        {"pathloss_slope", REAL(scenario.pathloss_slope)},
        {"shadowing_sigma_db", REAL(scenario.shadowing_sigma_db)},
        {"shadowing_smooth_radius_px", INT(scenario.shadowing_smooth_radius_px)},
        {"rsrp_floor_dbm", REAL(scenario.rsrp_floor_dbm)},
        {"base_seed", U64(scenario.base_seed)}}},
      {"dataset",
       {{"target_sites", [](RunConfig& c, const IniDocument::Entry& e) { c.dataset.target_sites = to_int_list(e); }},
        {"normal_samples", INT(dataset.normal_samples)},
        {"faults",
         [](RunConfig& c, const IniDocument::Entry& e) {
           c.dataset.include.fill(false);
           c.dataset.include[0] = true;
           for (const auto& name : split_list(e.value)) {
             if (name == "all") {
               c.dataset.include.fill(true);
               continue;
             }
             const auto l = label_from_name(name);
             if (!l || *l == FaultLabel::Normal) fail(e.line, "unknown fault label '" + name + "'");
             c.dataset.include[static_cast<std::size_t>(code(*l))] = true;
           }
         }}}},
      {"imaging", {{"display_lo_dbm", REAL(display_lo_dbm)}, {"display_hi_dbm", REAL(display_hi_dbm)}}},
      {"split", {{"seed", U64(split_seed)}, {"train_fraction", REAL(train_fraction)}}},
      {"nb", {}},
      {"rf",
       {{"n_trees", INT(rf.n_trees)},
        {"max_depth", INT(rf.max_depth)},
        {"features_per_split", INT(rf.features_per_split)},
        {"seed", U64(rf.seed)}}},
      {"cnn",
       {{"filters",
         [](RunConfig& c, const IniDocument::Entry& e) {
           const auto f = to_int_list(e);
           const int k = c.cnn.blocks.empty() ? 3 : c.cnn.blocks.front().kernel;
           c.cnn.blocks.clear();
           for (int n : f) c.cnn.blocks.push_back({n, k});
         }},
        {"kernel",
         [](RunConfig& c, const IniDocument::Entry& e) {
           for (auto& b : c.cnn.blocks) b.kernel = to_int(e);
         }},
        {"input_pad", INT(cnn.input_pad)},
        {"batch_size", INT(cnn.batch_size)},
        {"learning_rate", REAL(cnn.learning_rate)},
        {"max_epochs", INT(cnn.max_epochs)},
        {"seed", U64(cnn.seed)}}},
      {"nef",
       {{"dim", INT(nef.dim)},
        {"n_neurons", INT(nef.n_neurons)},
        {"reg", REAL(nef.reg)},
        {"seed", U64(nef.seed)},
        {"spike_dt", REAL(spike_dt)},
        {"spike_duration", REAL(spike_duration)}}},
      {"run",
       {{"output_dir", [](RunConfig& c, const IniDocument::Entry& e) { c.output_dir = e.value; }},
        {"threads",
         [](RunConfig& c, const IniDocument::Entry& e) {
           const long long t = to_integer(e);
           if (t < 0) fail(e.line, "threads must be >= 0");
           c.threads = static_cast<unsigned>(t);
         }},
        {"color_modes",
         [](RunConfig& c, const IniDocument::Entry& e) {
           c.color_modes.clear();
           for (const auto& m : split_list(e.value)) {
             if (m == "gray") c.color_modes.push_back(ColorMode::Gray);
             else if (m == "rgb") c.color_modes.push_back(ColorMode::Rgb);
             else fail(e.line, "unknown color mode '" + m + "'");
           }
           if (c.color_modes.empty()) fail(e.line, "color_modes must be nonempty");
         }}}},
  };
  return s;
}

#undef REAL
#undef INT
#undef U64

}  // namespace

IniDocument parse_ini(const std::string& text) {
  IniDocument doc;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#' || s[0] == ';') continue;
    if (s.front() == '[') {
      if (s.back() != ']') fail(line, "unterminated section header");
      section = trim(s.substr(1, s.size() - 2));
      if (section.empty()) fail(line, "empty section name");
      doc.sections[section];
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) fail(line, "expected 'key = value'");
    if (section.empty()) fail(line, "key outside of any [section]");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) fail(line, "empty key");
    auto& sec = doc.sections[section];
    if (sec.count(key)) fail(line, "duplicate key '" + key + "' in [" + section + "]");
    sec[key] = {value, line};
  }
  return doc;
}

RunConfig default_run_config() {
  RunConfig c;
  c.scenario.sectors = hex_sectors(c.layout);
  c.dataset.target_sites = {0, 0, 0, 0, 0, 0, 0};
  c.dataset.normal_samples = 17;
  return c;
}

RunConfig parse_run_config(const std::string& text) {
  const IniDocument doc = parse_ini(text);
  RunConfig c = default_run_config();
  bool origin_given = false;
  for (const auto& [section, entries] : doc.sections) {
    const auto sec = schema().find(section);
    if (sec == schema().end()) {
      const int line = entries.empty() ? 0 : entries.begin()->second.line;
      throw InputError("unknown section [" + section + "]" + (line ? " (first key at line " + std::to_string(line) + ")" : ""));
    }
    for (const auto& [key, entry] : entries) {
      const auto setter = sec->second.find(key);
      if (setter == sec->second.end()) fail(entry.line, "unknown key '" + key + "' in [" + section + "]");
      try {
        setter->second(c, entry);
      } catch (const InputError& e) {
        const std::string msg = e.what();
        if (msg.rfind("line ", 0) == 0) throw;
        fail(entry.line, msg);
      }
      if (section == "scenario" && (key == "grid_origin_x_m" || key == "grid_origin_y_m")) origin_given = true;
    }
  }
  if (!origin_given) {
    c.scenario.grid_origin_m = {-0.5 * c.scenario.grid_width_px * c.scenario.pixel_size_m,
                                -0.5 * c.scenario.grid_height_px * c.scenario.pixel_size_m};
  }
  c.scenario.sectors = hex_sectors(c.layout);
  validate(c.scenario);
  if (!(c.display_lo_dbm < c.display_hi_dbm)) throw InputError("[imaging] display_lo_dbm must be < display_hi_dbm");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0)) throw InputError("[split] train_fraction must be in (0, 1)");
  if (c.dataset.normal_samples < 1) throw InputError("[dataset] normal_samples must be >= 1");
  for (ColorMode m : c.color_modes) validate(cnn_config_for(c, m));
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_file(path)); }

CnnConfig cnn_config_for(const RunConfig& config, ColorMode mode) {
  CnnConfig c = config.cnn;
  c.channels = mode == ColorMode::Gray ? 1 : 3;
  c.height = config.scenario.grid_height_px;
  c.width = config.scenario.grid_width_px;
  c.threads = config.threads;
  return c;
}

}  // namespace faultlab
