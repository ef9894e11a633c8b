#pragma once

// Batch experiments over the ride-hailing market: JSON configuration,
// convergence sweeps over the step-size law, substitutability studies, and
// plot-data emission. Every artifact is a JSON document that embeds the fully
// resolved configuration, so (config, seed) determines every output byte.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "sgnep/baselines.hpp"
#include "sgnep/graph.hpp"
#include "sgnep/ridehail.hpp"
#include "sgnep/tikhonov.hpp"

namespace sgnep::experiment {

using nlohmann::json;

/// Parse or validation failure; `issues` lists every problem found.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

enum class SweepAxis { None, A, Eta, Theta };

struct StudyOptions {
  std::size_t realizations = 1000;
  std::size_t expectation_samples = 1000;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::uint64_t market_seed = 0;
  ridehail::MarketParams market;
  MultiplierGraph graph = MultiplierGraph::ring(1);
  ScheduleOptions schedule;
  SolverOptions solver;
  ReferenceOptions reference;
  SweepAxis sweep_axis = SweepAxis::None;
  Vector sweep_values;
  std::size_t replications = 1;
  StudyOptions study;
  std::string output_dir = "out";
  /// Dotted names of every field filled from a default.
  std::vector<std::string> defaulted;

  /// Fully resolved configuration including sampled market draws.
  json echo() const;
};

/// Parses a JSON document; `seed_override` replaces the top-level seed
/// before any seeded draw. Throws ConfigError listing every problem.
ExperimentConfig parse_config(const json& doc, std::optional<std::uint64_t> seed_override = {});

/// Reads `path`; JSON syntax errors are reported with line and column.
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override = {});

/// Game, graph and schedule checks. Empty when the config is runnable.
std::vector<std::string> validate_config(const ExperimentConfig& config);

json reference_to_json(const ReferenceSolution& ref);
ReferenceSolution reference_from_json(const json& doc);

ReferenceSolution compute_reference(const ExperimentConfig& config);

json run_record_summary(const RunRecord& record);

/// Algorithm run on the configured market; artifact kind "solve".
json run_solve(const ExperimentConfig& config, const ReferenceSolution* reference,
               RunRecord* record_out = nullptr);

/// For each a- or eta-value, R replications with seeds seed, seed+1, ...
/// Curves hold the mean and min/max envelope of the relative distance to
/// the reference at every logged iteration. Diverging replications are
/// recorded and skipped.
json run_convergence_sweep(const ExperimentConfig& config, const ReferenceSolution& reference,
                           std::size_t jobs = 1);

/// For each theta value (applied to every firm), solves the game with the
/// distributed algorithm and evaluates realized outcomes.
json run_market_study(const ExperimentConfig& config, std::size_t jobs = 1);

/// Per-sweep-value CSV tables of a sweep artifact, keyed by file name.
std::vector<std::pair<std::string, std::string>> sweep_csv_tables(const json& artifact);

/// Tab-separated plot tables of a sweep or study artifact, keyed by file
/// name. Empty sweeps give header-only tables.
std::vector<std::pair<std::string, std::string>> plot_tables(const json& artifact);

/// Writes `plot_tables` into `dir`; returns the written paths. Throws
/// std::runtime_error naming the path on I/O failure.
std::vector<std::filesystem::path> emit_plot_data(const json& artifact,
                                                  const std::filesystem::path& dir);

/// Writes `text` to `path`, creating parent directories.
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Runs fn(0..count-1) on up to `jobs` threads. Results must be written to
/// per-index slots by the caller.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace sgnep::experiment
