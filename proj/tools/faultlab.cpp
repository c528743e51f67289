// faultlab: RSRP-map fault dataset generation and classifier comparison.

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "faultlab/common.hpp"
#include "faultlab/config.hpp"
#include "faultlab/pipeline.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct Options {
  std::string config_path;
  std::string model = "";
  std::string color = "gray";
  std::string out_dir;
  std::string split = "test";
  bool allow_train = false;
  int threads = -1;
  std::uint64_t seed = 1;
};

faultlab::RunConfig load(const Options& o) {
  faultlab::RunConfig c = o.config_path.empty() ? faultlab::default_run_config()
                                                : faultlab::load_run_config(o.config_path);
  if (!o.out_dir.empty()) c.output_dir = o.out_dir;
  if (o.threads >= 0) c.threads = static_cast<unsigned>(o.threads);
  return c;
}

faultlab::ModelKind parse_model(const std::string& name) {
  const auto k = faultlab::model_from_name(name);
  if (!k) throw faultlab::InputError("--model must be one of nb, rf, cnn, nef");
  return *k;
}

faultlab::ColorMode parse_color(const std::string& name) {
  const auto c = faultlab::color_from_name(name);
  if (!c) throw faultlab::InputError("--color must be gray or rgb");
  return *c;
}

void print_report(const faultlab::EvaluationReport& r) {
  std::printf("%-4s %-5s accuracy %.4f  kappa %.4f\n", r.model.c_str(), std::string(faultlab::color_name(r.color)).c_str(),
              r.accuracy, r.kappa);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"faultlab: synthetic RSRP fault maps and four classifiers"};
  app.require_subcommand(1);
  Options o;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "INI run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out_dir, "run directory (overrides [run] output_dir)");
    sub->add_option("--threads", o.threads, "worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
  };
  auto* gen = app.add_subcommand("generate", "render the labeled RSRP map dataset");
  common(gen);
  auto* train = app.add_subcommand("train", "fit one model on the training split");
  common(train);
  train->add_option("--model", o.model, "nb | rf | cnn | nef")->required();
  train->add_option("--color", o.color, "gray | rgb");
  auto* eval = app.add_subcommand("evaluate", "score a trained model on the held-out split");
  common(eval);
  eval->add_option("--model", o.model, "nb | rf | cnn | nef")->required();
  eval->add_option("--color", o.color, "gray | rgb");
  eval->add_option("--split", o.split, "test | train")->check(CLI::IsMember({"test", "train"}));
  eval->add_flag("--allow-train", o.allow_train, "permit --split train");
  auto* compare = app.add_subcommand("compare", "train and score every model in every color mode");
  common(compare);
  auto* grad = app.add_subcommand("gradcheck", "CNN finite-difference and NEF identity checks");
  grad->add_option("--config", o.config_path, "accepted for symmetry; unused");
  grad->add_option("--seed", o.seed, "parameter sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*grad) {
      const auto r = faultlab::cmd_gradcheck(o.seed);
      std::printf("cnn max relative error %.3e (limit 1e-4)\n", r.cnn_max_rel_error);
      std::printf("nef identity rmse      %.4f (limit 0.05)\n", r.nef_identity_rmse);
      std::printf("%s\n", r.passed() ? "PASS" : "FAIL");
      return r.passed() ? kExitOk : kExitCheckFailed;
    }
    const faultlab::RunConfig config = load(o);
    const std::string& dir = config.output_dir;
    if (*gen) {
      const auto n = faultlab::cmd_generate(config, dir);
      std::printf("wrote %zu samples to %s\n", n, dir.c_str());
    } else if (*train) {
      const auto path = faultlab::cmd_train(config, dir, parse_model(o.model), parse_color(o.color));
      std::printf("wrote %s\n", path.c_str());
    } else if (*eval) {
      const auto split = o.split == "train" ? faultlab::EvalSplit::Train : faultlab::EvalSplit::Test;
      print_report(
          faultlab::cmd_evaluate(config, dir, parse_model(o.model), parse_color(o.color), split, o.allow_train));
    } else if (*compare) {
      for (const auto& r : faultlab::cmd_compare(config, dir)) print_report(r);
      std::printf("wrote %s/compare\n", dir.c_str());
    }
  } catch (const faultlab::InputError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const faultlab::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitOk;
}
