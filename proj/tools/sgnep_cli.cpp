// sgnep: batch driver for the ride-hailing SGNEP experiments.
//
// Exit codes: 0 full success, 1 bad usage or configuration, 2 numerical
// failure or an incomplete result (non-converged reference, diverged
// replication, failed study point). Artifacts are written before a nonzero
// exit whenever they exist.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "sgnep/errors.hpp"
#include "sgnep/experiment.hpp"

namespace fs = std::filesystem;
using namespace sgnep;
using namespace sgnep::experiment;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::size_t jobs = 1;
  std::string reference;
};

ExperimentConfig load(const CommonArgs& args) { return load_config(args.config, args.seed); }

fs::path out_dir(const CommonArgs& args, const ExperimentConfig& cfg) {
  return args.out.empty() ? fs::path(cfg.output_dir) : fs::path(args.out);
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path.string() + ": cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& doc) {
  write_text_file(path, doc.dump(2) + "\n");
  std::cout << "wrote " << path.string() << "\n";
}

ReferenceSolution obtain_reference(const CommonArgs& args, const ExperimentConfig& cfg) {
  if (!args.reference.empty()) return reference_from_json(read_json(args.reference));
  return compute_reference(cfg);
}

int cmd_validate(const CommonArgs& args) {
  const ExperimentConfig cfg = load(args);
  std::cout << "config ok: " << cfg.market.num_firms << " firms, " << cfg.market.num_areas
            << " areas, seed " << cfg.seed << "\n";
  for (const auto& d : cfg.defaulted) std::cout << "  default: " << d << "\n";
  if (!args.out.empty()) write_json(fs::path(args.out) / "config_echo.json", cfg.echo());
  return 0;
}

int cmd_reference(const CommonArgs& args) {
  const ExperimentConfig cfg = load(args);
  const ReferenceSolution ref = compute_reference(cfg);
  json doc = reference_to_json(ref);
  doc["config"] = cfg.echo();
  write_json(out_dir(args, cfg) / "reference.json", doc);
  std::cout << "reference: natural residual " << format_number(ref.natural_residual) << " after "
            << ref.iterations << " iterations\n";
  if (!ref.converged) {
    std::cerr << "reference: did not reach the tolerance within the budget\n";
    return 2;
  }
  return 0;
}

int cmd_solve(const CommonArgs& args) {
  const ExperimentConfig cfg = load(args);
  const ReferenceSolution ref = obtain_reference(args, cfg);
  const json artifact = run_solve(cfg, &ref);
  const fs::path dir = out_dir(args, cfg);
  write_json(dir / "solve.json", artifact);
  write_text_file(dir / "run.csv", artifact.at("csv").get<std::string>());
  std::cout << "wrote " << (dir / "run.csv").string() << "\n";
  std::cout << "solve: stopped on " << artifact["run"]["stop_reason"].get<std::string>()
            << " after " << artifact["run"]["iterations"].get<std::size_t>() << " iterations\n";
  return ref.converged ? 0 : 2;
}

int cmd_sweep(const CommonArgs& args) {
  const ExperimentConfig cfg = load(args);
  const ReferenceSolution ref = obtain_reference(args, cfg);
  const json artifact = run_convergence_sweep(cfg, ref, args.jobs);
  const fs::path dir = out_dir(args, cfg);
  write_json(dir / "sweep.json", artifact);
  for (const auto& [name, text] : sweep_csv_tables(artifact)) {
    write_text_file(dir / name, text);
    std::cout << "wrote " << (dir / name).string() << "\n";
  }
  for (const auto& p : emit_plot_data(artifact, dir)) std::cout << "wrote " << p.string() << "\n";
  std::size_t diverged = 0;
  for (const auto& point : artifact["points"]) {
    for (const auto& rep : point["replications"]) diverged += rep["diverged"].get<bool>() ? 1 : 0;
  }
  if (diverged > 0) {
    std::cerr << "sweep: " << diverged << " replication(s) diverged\n";
    return 2;
  }
  return ref.converged ? 0 : 2;
}

int cmd_study(const CommonArgs& args) {
  const ExperimentConfig cfg = load(args);
  const json artifact = run_market_study(cfg, args.jobs);
  const fs::path dir = out_dir(args, cfg);
  write_json(dir / "study.json", artifact);
  for (const auto& p : emit_plot_data(artifact, dir)) std::cout << "wrote " << p.string() << "\n";
  int failed = 0;
  for (const auto& point : artifact["points"]) {
    if (!point["ok"].get<bool>()) {
      std::cerr << "study: theta " << point["theta"].dump() << " failed: "
                << point["failure"].get<std::string>() << "\n";
      ++failed;
    }
  }
  return failed ? 2 : 0;
}

int cmd_emit(const std::string& artifact_path, const std::string& out) {
  const json artifact = read_json(artifact_path);
  const fs::path dir = out.empty() ? fs::path(artifact_path).parent_path() : fs::path(out);
  for (const auto& p : emit_plot_data(artifact, dir)) std::cout << "wrote " << p.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Distributed stochastic GNE seeking for ride-hailing markets"};
  app.require_subcommand(1);

  CommonArgs args;
  std::string artifact_path;

  auto add_common = [&](CLI::App* sub, bool with_jobs, bool with_reference) {
    sub->add_option("--config", args.config, "JSON configuration file")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", args.seed, "Master seed; overrides the config");
    sub->add_option("--out", args.out, "Output directory (default: config 'output')");
    if (with_jobs) {
      sub->add_option("--jobs", args.jobs, "Parallel jobs")->check(CLI::PositiveNumber);
    }
    if (with_reference) {
      sub->add_option("--reference", args.reference, "Cached reference.json to reuse")
          ->check(CLI::ExistingFile);
    }
  };

  auto* validate = app.add_subcommand("validate", "Parse and validate a configuration");
  add_common(validate, false, false);
  auto* reference = app.add_subcommand("reference", "Centralized SAA reference solution");
  add_common(reference, false, false);
  auto* solve = app.add_subcommand("solve", "One distributed run with residual log");
  add_common(solve, false, true);
  auto* sweep = app.add_subcommand("sweep", "Step-size sweep with replications");
  add_common(sweep, true, true);
  auto* study = app.add_subcommand("study", "Substitutability study with realized outcomes");
  add_common(study, true, false);
  auto* emit = app.add_subcommand("emit", "Tab-separated plot data from an artifact");
  emit->add_option("--artifact", artifact_path, "solve, sweep or study JSON artifact")
      ->required()
      ->check(CLI::ExistingFile);
  emit->add_option("--out", args.out, "Output directory (default: next to the artifact)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*validate) return cmd_validate(args);
    if (*reference) return cmd_reference(args);
    if (*solve) return cmd_solve(args);
    if (*sweep) return cmd_sweep(args);
    if (*study) return cmd_study(args);
    if (*emit) return cmd_emit(artifact_path, args.out);
  } catch (const ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
