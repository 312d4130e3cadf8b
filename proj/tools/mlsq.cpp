// mlsq: point-level quality classification of mobile laser scans.
//
// Exit codes: 0 success, 2 invalid input or config, 3 degenerate data, 4 IO.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mlsq/config.hpp"
#include "mlsq/error.hpp"
#include "mlsq/log.hpp"
#include "mlsq/pipeline.hpp"

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitDegenerate = 3;
constexpr int kExitIo = 4;

int exit_code(mlsq::ErrorKind kind) {
  switch (kind) {
    case mlsq::ErrorKind::InvalidInput: return kExitInvalid;
    case mlsq::ErrorKind::Degenerate: return kExitDegenerate;
    case mlsq::ErrorKind::Io: return kExitIo;
  }
  return kExitInvalid;
}

// Leftover "--section.key=value" (or "--section.key value") arguments.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extras) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() < 3) mlsq::invalid_input("unexpected argument '" + arg + "'");
    const std::string body = arg.substr(2);
    const auto eq = body.find('=');
    if (eq != std::string::npos) {
      out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
    } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
      out.emplace_back(body, extras[++i]);
    } else {
      mlsq::invalid_input("config override '" + arg + "' has no value");
    }
  }
  return out;
}

mlsq::RunConfig effective_config(const std::string& config_path, const std::vector<std::string>& extras) {
  mlsq::Json doc = mlsq::Json::object();
  std::string path = config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("MLSQ_CONFIG"); env && *env) path = env;
  }
  if (!path.empty()) doc = mlsq::config_to_json(mlsq::load_config(path));
  for (const auto& [key, value] : parse_overrides(extras)) mlsq::apply_override(doc, key, value);
  return mlsq::config_from_json(doc);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-level quality classification for mobile laser scans"};
  app.require_subcommand(1);
  app.allow_extras();

  std::string config_path;
  bool quiet = false;
  bool print_config = false;
  app.add_option("--config", config_path, "JSON run configuration (default: $MLSQ_CONFIG)");
  app.add_flag("--quiet", quiet, "Suppress progress messages");
  app.add_flag("--print-config", print_config, "Print the effective configuration to stdout before running");
  app.footer("Any configuration key can be overridden as --section.key=value, e.g. --rf.n_estimators=50.");

  std::string out, mls, reference, table, model, report;
  bool fixed_clock = false;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic reference/scan pair");
  synth->add_option("--out", out, "Output directory")->required();

  auto* label = app.add_subcommand("label", "C2C distances, quality labels and spatial folds");
  label->add_option("--mls", mls, "Scan cloud (.ply, .xyz)")->required()->check(CLI::ExistingFile);
  label->add_option("--reference", reference, "Reference cloud (.ply, .xyz)")->required()->check(CLI::ExistingFile);
  label->add_option("--out", out, "Output table (CSV)")->required();

  auto* features = app.add_subcommand("features", "Optimal-neighborhood geometric features");
  features->add_option("--mls", mls, "Scan cloud (.ply, .xyz)")->required()->check(CLI::ExistingFile);
  features->add_option("--table", table, "Table from 'label'; omit to describe every point")->check(CLI::ExistingFile);
  features->add_option("--out", out, "Output table (CSV)")->required();

  auto* train = app.add_subcommand("train-eval", "Spatial cross-validation of both classifiers");
  train->add_option("--table", table, "Table with features, labels and folds")->required()->check(CLI::ExistingFile);
  train->add_option("--out", out, "Output directory")->required();
  train->add_flag("--fixed-clock", fixed_clock, "Write a constant timestamp so reruns are byte-identical");

  auto* predict = app.add_subcommand("predict", "Score a feature table with a saved model");
  predict->add_option("--model", model, "Model JSON from train-eval")->required()->check(CLI::ExistingFile);
  predict->add_option("--table", table, "Table with feature columns")->required()->check(CLI::ExistingFile);
  predict->add_option("--out", out, "Output scores (CSV)")->required();

  auto* summary = app.add_subcommand("report", "Print a summary of a train-eval report");
  summary->add_option("--report", report, "report.json from train-eval")->required()->check(CLI::ExistingFile);

  for (auto* sub : app.get_subcommands({})) sub->allow_extras();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    mlsq::set_quiet(quiet);
    const mlsq::RunConfig config = effective_config(config_path, app.remaining(true));
    if (print_config) std::cout << mlsq::config_to_json(config).dump(2) << "\n";

    if (*synth) {
      mlsq::cmd_synth(config, out);
    } else if (*label) {
      mlsq::cmd_label(mls, reference, config, out);
    } else if (*features) {
      mlsq::cmd_features(mls, table.empty() ? std::nullopt : std::optional<std::filesystem::path>(table), config,
                         out);
    } else if (*train) {
      mlsq::cmd_train_eval(table, config, out, fixed_clock);
    } else if (*predict) {
      mlsq::cmd_predict(model, table, out);
    } else if (*summary) {
      std::cout << mlsq::cmd_report(report);
    }
  } catch (const mlsq::Error& e) {
    std::cerr << "mlsq: error: " << e.what() << "\n";
    return exit_code(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "mlsq: error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "mlsq: error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return 0;
}
