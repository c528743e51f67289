#include "faultlab/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "faultlab/common.hpp"

namespace faultlab {

namespace fs = std::filesystem;

namespace {

constexpr const char* kManifestHeader =
    "sample_id,label_code,label_name,target_site,target_sector,parameter_value,sample_seed,gray_path,rgb_path";

std::string join(const std::string& dir, const std::string& rel) { return (fs::path(dir) / rel).string(); }

void make_dirs(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw InputError("cannot create directory " + dir);
}

/// Outputs are write-once: an existing file is never replaced.
void write_new_file(const std::string& path, std::string_view bytes) {
  if (fs::exists(path)) throw InputError("refusing to overwrite existing output " + path);
  write_file(path, bytes);
}

std::string sample_stem(int id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%05d", id);
  return buf;
}

std::uint8_t color_byte(ColorMode m) { return m == ColorMode::Gray ? 0 : 1; }

const char* magic_for(ModelKind k) {
  switch (k) {
    case ModelKind::NaiveBayes: return "NBM1";
    case ModelKind::RandomForest: return "RFM1";
    case ModelKind::Cnn: return "CNM1";
    case ModelKind::Nef: return "NEF1";
  }
  return "";
}

std::vector<LabeledSample> select(const std::vector<LabeledSample>& samples, const std::vector<std::size_t>& idx) {
  std::vector<LabeledSample> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(samples[i]);
  return out;
}

std::vector<FaultLabel> labels_of(std::span<const LabeledSample> samples) {
  std::vector<FaultLabel> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label);
  return out;
}

std::string report_csv(std::span<const EvaluationReport> reports) {
  std::ostringstream out;
  write_report_header(out);
  for (const auto& r : reports) write_report_row(r, out);
  return out.str();
}

std::string confusion_csv(const ConfusionMatrix& cm) {
  std::ostringstream out;
  write_confusion(cm, out);
  return out.str();
}

std::string model_file(ModelKind kind, ColorMode mode) {
  return std::string(model_name(kind)) + "_" + std::string(color_name(mode)) + ".bin";
}

void check_classes(std::span<const LabeledSample> samples) {
  std::array<int, 8> counts{};
  for (const auto& s : samples) ++counts[static_cast<std::size_t>(code(s.label))];
  for (int k = 0; k < 8; ++k)
    if (counts[static_cast<std::size_t>(k)] == 1)
      throw InputError("class " + std::string(label_name(label_from_code(k))) + " has fewer than 2 samples");
}

RunConfig with_threads(RunConfig c) {
  c.threads = resolve_threads(c.threads);
  c.rf.threads = c.threads;
  c.cnn.threads = c.threads;
  c.nef.threads = c.threads;
  return c;
}

}  // namespace

std::string_view model_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::NaiveBayes: return "nb";
    case ModelKind::RandomForest: return "rf";
    case ModelKind::Cnn: return "cnn";
    case ModelKind::Nef: return "nef";
  }
  return "";
}

std::optional<ModelKind> model_from_name(std::string_view name) {
  for (ModelKind k : kAllModels)
    if (model_name(k) == name) return k;
  return std::nullopt;
}

std::optional<ColorMode> color_from_name(std::string_view name) {
  if (name == "gray") return ColorMode::Gray;
  if (name == "rgb") return ColorMode::Rgb;
  return std::nullopt;
}

std::string manifest_csv(std::span<const ManifestRow> rows) {
  std::ostringstream out;
  out << kManifestHeader << '\n';
  for (const auto& r : rows) {
    const auto& f = r.fault;
    out << r.sample_id << ',' << code(f.label) << ',' << label_name(f.label) << ',' << f.target_site << ','
        << f.target_sector << ',' << format_real(f.parameter_value) << ',' << f.sample_seed << ',' << r.gray_path
        << ',' << r.rgb_path << '\n';
  }
  return out.str();
}

std::vector<ManifestRow> parse_manifest(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kManifestHeader) throw InputError("manifest.csv line 1: unexpected header");
  std::vector<ManifestRow> rows;
  int n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    const auto bad = [&](const std::string& what) -> InputError {
      return InputError("manifest.csv line " + std::to_string(n) + ": " + what);
    };
    if (cells.size() != 9) throw bad("expected 9 fields");
    ManifestRow r;
    try {
      std::size_t used = 0;
      r.sample_id = std::stoi(cells[0], &used);
      const int label = std::stoi(cells[1]);
      if (label < 0 || label > 7) throw bad("label code out of range");
      r.fault.label = label_from_code(label);
      if (label_name(r.fault.label) != cells[2]) throw bad("label name does not match code");
      r.fault.target_site = std::stoi(cells[3]);
      r.fault.target_sector = std::stoi(cells[4]);
      r.fault.parameter_value = std::stod(cells[5]);
      r.fault.sample_seed = std::stoull(cells[6]);
    } catch (const InputError&) {
      throw;
    } catch (const std::exception&) {
      throw bad("malformed numeric field");
    }
    validate(r.fault);
    r.gray_path = cells[7];
    r.rgb_path = cells[8];
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw InputError("manifest.csv has no samples");
  return rows;
}

Dataset load_dataset(const std::string& run_dir) {
  const std::string path = join(run_dir, "manifest.csv");
  if (!fs::exists(path)) throw InputError("no manifest at " + path + " (run generate first)");
  Dataset d;
  d.run_dir = run_dir;
  const std::string text = read_file(path);
  d.rows = parse_manifest(text);
  d.manifest_hash = fnv1a64(text);
  return d;
}

std::vector<LabeledSample> load_samples(const Dataset& dataset, ColorMode mode) {
  std::vector<LabeledSample> out;
  out.reserve(dataset.rows.size());
  for (const auto& r : dataset.rows) {
    const std::string path = join(dataset.run_dir, mode == ColorMode::Gray ? r.gray_path : r.rgb_path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("missing image " + path);
    LabeledSample s;
    try {
      s.features = mode == ColorMode::Gray ? flatten(read_pgm(in)) : flatten(read_ppm(in));
    } catch (const FormatError& e) {
      throw InputError(path + ": " + e.what());
    }
    s.label = r.fault.label;
    s.provenance = r.fault;
    if (!out.empty() && out.front().features.size() != s.features.size())
      throw InputError("image " + path + " has a different size from the first sample");
    out.push_back(std::move(s));
  }
  return out;
}

ModelKind TrainedModel::kind() const { return static_cast<ModelKind>(model.index()); }

ColorMode TrainedModel::color() const { return header.color_mode == 0 ? ColorMode::Gray : ColorMode::Rgb; }

TrainedModel fit_model(ModelKind kind, ColorMode mode, std::span<const LabeledSample> train, const RunConfig& raw,
                       std::uint64_t manifest_hash) {
  const RunConfig config = with_threads(raw);
  TrainedModel m;
  m.header = {magic_for(kind), color_byte(mode), config.split_seed, manifest_hash};
  switch (kind) {
    case ModelKind::NaiveBayes: m.model = nb_fit(train); break;
    case ModelKind::RandomForest: m.model = rf_fit(train, config.rf); break;
    case ModelKind::Cnn: m.model = cnn_train(train, cnn_config_for(config, mode)); break;
    case ModelKind::Nef: m.model = nef_fit_classifier(train, config.nef); break;
  }
  return m;
}

std::vector<FaultLabel> predict_all(const TrainedModel& model, std::span<const LabeledSample> samples,
                                    unsigned threads) {
  std::vector<FaultLabel> out(samples.size());
  parallel_for(samples.size(), resolve_threads(threads), [&](std::size_t i) {
    const auto& x = samples[i].features;
    out[i] = std::visit(
        [&](const auto& m) -> FaultLabel {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, GaussianNbModel>) return nb_predict(m, x);
          else if constexpr (std::is_same_v<T, RandomForestModel>) return rf_predict(m, x);
          else if constexpr (std::is_same_v<T, CnnModel>) return cnn_predict(m, x);
          else return nef_predict_rate(m, x);
        },
        model.model);
  });
  return out;
}

std::string encode_model(const TrainedModel& model) {
  BinaryWriter w;
  write_header(w, model.header);
  std::visit([&](const auto& m) { save(m, w); }, model.model);
  return w.bytes();
}

TrainedModel decode_model(const std::string& bytes) {
  BinaryReader r(bytes);
  TrainedModel m;
  m.header = read_header(r);
  if (m.header.color_mode > 1) throw FormatError("bad color mode byte", 5);
  if (m.header.magic == "NBM1") m.model = load_nb(r);
  else if (m.header.magic == "RFM1") m.model = load_rf(r);
  else if (m.header.magic == "CNM1") m.model = load_cnn(r);
  else m.model = load_nef(r);
  r.expect_end();
  return m;
}

SplitIndices dataset_split(const Dataset& dataset, const RunConfig& config) {
  std::vector<FaultLabel> labels;
  labels.reserve(dataset.rows.size());
  for (const auto& r : dataset.rows) labels.push_back(r.fault.label);
  return split_indices(labels, config.train_fraction, config.split_seed);
}

std::size_t cmd_generate(const RunConfig& raw, const std::string& run_dir) {
  const RunConfig config = with_threads(raw);
  const std::string manifest_path = join(run_dir, "manifest.csv");
  if (fs::exists(manifest_path)) throw InputError("dataset already exists at " + run_dir);
  make_dirs(join(run_dir, "images/gray"));
  make_dirs(join(run_dir, "images/rgb"));
  const auto maps = generate_labeled_maps(config.scenario, config.dataset, config.threads);
  const Colormap cmap = Colormap::standard();
  std::vector<ManifestRow> rows;
  rows.reserve(maps.size());
  for (std::size_t i = 0; i < maps.size(); ++i) {
    ManifestRow r;
    r.sample_id = static_cast<int>(i);
    r.fault = maps[i].fault;
    r.gray_path = "images/gray/" + sample_stem(r.sample_id) + ".pgm";
    r.rgb_path = "images/rgb/" + sample_stem(r.sample_id) + ".ppm";
    std::ostringstream gray, rgb;
    write_pgm(rsrp_to_gray(maps[i].map, config.display_lo_dbm, config.display_hi_dbm), gray);
    write_ppm(rsrp_to_rgb(maps[i].map, config.display_lo_dbm, config.display_hi_dbm, cmap), rgb);
    write_new_file(join(run_dir, r.gray_path), gray.str());
    write_new_file(join(run_dir, r.rgb_path), rgb.str());
    rows.push_back(std::move(r));
  }
  write_new_file(manifest_path, manifest_csv(rows));
  return rows.size();
}

std::string cmd_train(const RunConfig& config, const std::string& run_dir, ModelKind kind, ColorMode mode) {
  const Dataset dataset = load_dataset(run_dir);
  const auto samples = load_samples(dataset, mode);
  check_classes(samples);
  const auto split = dataset_split(dataset, config);
  const auto train = select(samples, split.train);
  const TrainedModel model = fit_model(kind, mode, train, config, dataset.manifest_hash);
  make_dirs(join(run_dir, "models"));
  const std::string path = join(run_dir, "models/" + model_file(kind, mode));
  write_new_file(path, encode_model(model));
  return path;
}

EvaluationReport cmd_evaluate(const RunConfig& config, const std::string& run_dir, ModelKind kind, ColorMode mode,
                              EvalSplit which, bool allow_train) {
  if (which == EvalSplit::Train && !allow_train)
    throw InputError("evaluating on the training split requires --allow-train");
  const Dataset dataset = load_dataset(run_dir);
  const std::string path = join(run_dir, "models/" + model_file(kind, mode));
  if (!fs::exists(path)) throw InputError("no model at " + path + " (run train first)");
  const TrainedModel model = decode_model(read_file(path));
  if (model.kind() != kind || model.color() != mode) throw InputError(path + " holds a different model or color mode");
  if (model.header.manifest_hash != dataset.manifest_hash)
    throw InputError("stale model: " + path + " was trained on a different manifest");
  if (model.header.split_seed != config.split_seed)
    throw InputError("stale model: " + path + " was trained with split seed " +
                     std::to_string(model.header.split_seed) + ", config has " + std::to_string(config.split_seed));
  const auto samples = load_samples(dataset, mode);
  const auto split = dataset_split(dataset, config);
  const auto eval = select(samples, which == EvalSplit::Test ? split.test : split.train);
  const auto predicted = predict_all(model, eval, config.threads);
  const auto truth = labels_of(eval);
  EvaluationReport report = make_report(std::string(model_name(kind)), mode, truth, predicted);
  if (const auto* cnn = std::get_if<CnnModel>(&model.model)) report.loss_history = cnn->loss_history;

  make_dirs(join(run_dir, "reports"));
  const std::string stem = "reports/" + std::string(model_name(kind)) + "_" + std::string(color_name(mode)) + "_" +
                           (which == EvalSplit::Test ? "test" : "train");
  write_new_file(join(run_dir, stem + ".csv"), report_csv(std::span(&report, 1)));
  write_new_file(join(run_dir, stem + "_confusion.csv"), confusion_csv(report.confusion));
  return report;
}

std::vector<EvaluationReport> cmd_compare(const RunConfig& raw, const std::string& run_dir) {
  const RunConfig config = with_threads(raw);
  const Dataset dataset = load_dataset(run_dir);
  const std::string out_dir = join(run_dir, "compare");
  if (fs::exists(out_dir)) throw InputError("comparison already exists at " + out_dir);
  const auto split = dataset_split(dataset, config);

  std::vector<EvaluationReport> reports;
  std::string per_fault = "color_mode,label_code,label_name,accuracy,empty_row\n";
  std::vector<std::pair<std::string, std::string>> files;
  for (ColorMode mode : config.color_modes) {
    const auto samples = load_samples(dataset, mode);
    check_classes(samples);
    const auto train = select(samples, split.train);
    const auto test = select(samples, split.test);
    const auto truth = labels_of(test);
    const std::string cname(color_name(mode));
    for (ModelKind kind : kAllModels) {
      const TrainedModel model = fit_model(kind, mode, train, config, dataset.manifest_hash);
      const auto predicted = predict_all(model, test, config.threads);
      EvaluationReport report = make_report(std::string(model_name(kind)), mode, truth, predicted);
      const std::string stem = std::string(model_name(kind)) + "_" + cname;
      files.emplace_back("models/" + stem + ".bin", encode_model(model));
      files.emplace_back("confusion_" + stem + ".csv", confusion_csv(report.confusion));
      if (const auto* cnn = std::get_if<CnnModel>(&model.model)) {
        report.loss_history = cnn->loss_history;
        std::string csv = "epoch,mean_loss\n";
        for (std::size_t e = 0; e < cnn->loss_history.size(); ++e)
          csv += std::to_string(e) + "," + format_real(cnn->loss_history[e]) + "\n";
        files.emplace_back("cnn_loss_" + cname + ".csv", csv);
      }
      if (const auto* nef = std::get_if<NefClassifier>(&model.model)) {
        const auto spiking = nef_predict_spiking(*nef, test.front().features, config.spike_dt, config.spike_duration);
        std::string csv = "time";
        for (int k = 0; k < 8; ++k) csv += ",score_" + std::to_string(k);
        csv += "\n";
        for (std::size_t t = 0; t < spiking.probe.times.size(); ++t) {
          csv += format_real(spiking.probe.times[t]);
          for (double v : spiking.probe.samples[t]) csv += "," + format_real(v);
          csv += "\n";
        }
        files.emplace_back("nef_probe_" + cname + ".csv", csv);
      }
      if (kind == ModelKind::RandomForest) {
        for (int k = 0; k < 8; ++k) {
          const auto uk = static_cast<std::size_t>(k);
          per_fault += cname + "," + std::to_string(k) + "," + std::string(label_name(label_from_code(k))) + "," +
                       format_real(report.per_class.value[uk]) + "," + (report.per_class.empty_row[uk] ? "1" : "0") +
                       "\n";
        }
      }
      reports.push_back(std::move(report));
    }
  }
  std::string table = "model,color_mode,accuracy,kappa\n";
  for (const auto& r : reports)
    table += r.model + "," + std::string(color_name(r.color)) + "," + format_real(r.accuracy) + "," +
             format_real(r.kappa) + "\n";
  files.emplace_back("accuracy.csv", table);
  files.emplace_back("rf_per_fault.csv", per_fault);
  files.emplace_back("reports.csv", report_csv(reports));

  make_dirs(join(out_dir, "models"));
  for (const auto& [name, bytes] : files) write_new_file(join(out_dir, name), bytes);
  return reports;
}

double nef_identity_rmse(std::uint64_t seed) {
  EnsembleParams p;
  p.n_neurons = 100;
  p.dim = 1;
  p.seed = seed;
  const Ensemble e = make_ensemble(p);
  constexpr int kPoints = 500;
  Matrix x(kPoints, 1);
  for (int i = 0; i < kPoints; ++i) x(i, 0) = -1.0 + 2.0 * i / (kPoints - 1);
  const Matrix d = solve_decoders(e, x, x, 0.1);
  double sse = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const double err = decode(e, d, x.row(i))[0] - x(i, 0);
    sse += err * err;
  }
  return std::sqrt(sse / kPoints);
}

GradcheckResult cmd_gradcheck(std::uint64_t seed) {
  GradcheckResult r;
  r.cnn_max_rel_error = gradient_check(gradient_check_config(), seed);
  r.nef_identity_rmse = nef_identity_rmse(seed);
  return r;
}

}  // namespace faultlab
