#include "sgnep/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "sgnep/errors.hpp"

namespace sgnep::experiment {

namespace {

std::string join_issues(const std::vector<std::string>& issues) {
  std::string msg = "invalid configuration";
  for (const auto& s : issues) msg += "\n  - " + s;
  return msg;
}

// Reads typed fields out of one JSON object, recording problems and
// defaulted fields instead of stopping at the first one.
class Section {
 public:
  Section(const json* obj, std::string prefix, std::vector<std::string>& issues,
          std::vector<std::string>& defaulted)
      : obj_(obj), prefix_(std::move(prefix)), issues_(issues), defaulted_(defaulted) {}

  bool present() const { return obj_ != nullptr; }
  bool has(const std::string& key) const { return obj_ && obj_->contains(key); }
  const json* raw(const std::string& key) const {
    if (!has(key)) return nullptr;
    seen_.insert(key);
    return &obj_->at(key);
  }
  std::string path(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }
  void issue(const std::string& key, const std::string& what) const {
    issues_.push_back(path(key) + ": " + what);
  }
  void mark_default(const std::string& key) const { defaulted_.push_back(path(key)); }

  double number(const std::string& key, double fallback) const {
    const json* v = raw(key);
    if (!v) {
      mark_default(key);
      return fallback;
    }
    if (!v->is_number()) {
      issue(key, "expected a number");
      return fallback;
    }
    return v->get<double>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    const json* v = raw(key);
    if (!v) {
      mark_default(key);
      return fallback;
    }
    if (!v->is_number_integer() || v->get<std::int64_t>() < 0) {
      issue(key, "expected a nonnegative integer");
      return fallback;
    }
    return v->get<std::size_t>();
  }

  std::string text(const std::string& key, const std::string& fallback) const {
    const json* v = raw(key);
    if (!v) {
      mark_default(key);
      return fallback;
    }
    if (!v->is_string()) {
      issue(key, "expected a string");
      return fallback;
    }
    return v->get<std::string>();
  }

  /// Scalar broadcast to `size` entries, or an array of exactly `size`.
  Vector vector(const std::string& key, std::size_t size, const Vector& fallback) const {
    const json* v = raw(key);
    if (!v) {
      mark_default(key);
      return fallback;
    }
    return to_vector(*v, key, size);
  }

  Vector to_vector(const json& v, const std::string& key, std::size_t size) const {
    if (v.is_number()) return Vector(size, v.get<double>());
    if (!v.is_array()) {
      issue(key, "expected a number or an array of numbers");
      return Vector(size, 0.0);
    }
    if (v.size() != size) {
      issue(key, "expected " + std::to_string(size) + " entries, got " + std::to_string(v.size()));
      return Vector(size, 0.0);
    }
    Vector out;
    for (const auto& e : v) {
      if (!e.is_number()) {
        issue(key, "expected numeric entries");
        return Vector(size, 0.0);
      }
      out.push_back(e.get<double>());
    }
    return out;
  }

  /// Scalar broadcast or rows x cols nested array.
  Matrix matrix(const std::string& key, std::size_t rows, std::size_t cols) const {
    Matrix out(rows, cols);
    const json* v = raw(key);
    if (!v) {
      issue(key, "required");
      return out;
    }
    if (v->is_number()) {
      for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) out(i, j) = v->get<double>();
      }
      return out;
    }
    if (!v->is_array() || v->size() != rows) {
      issue(key, "expected a number or " + std::to_string(rows) + " rows");
      return out;
    }
    for (std::size_t i = 0; i < rows; ++i) {
      const Vector row = to_vector((*v)[i], key, cols);
      for (std::size_t j = 0; j < cols; ++j) out(i, j) = row[j];
    }
    return out;
  }

  /// Keys never read are reported, so typos do not turn into silent defaults.
  void check_unknown() const {
    if (!obj_) return;
    for (auto it = obj_->begin(); it != obj_->end(); ++it) {
      if (!seen_.count(it.key())) issues_.push_back(path(it.key()) + ": unknown key");
    }
  }

 private:
  const json* obj_;
  std::string prefix_;
  std::vector<std::string>& issues_;
  std::vector<std::string>& defaulted_;
  mutable std::set<std::string> seen_;
};

const json* subobject(const json& root, const std::string& key, std::vector<std::string>& issues,
                      std::vector<std::string>& defaulted) {
  if (!root.contains(key)) {
    defaulted.push_back(key);
    return nullptr;
  }
  const json& v = root.at(key);
  if (!v.is_object()) {
    issues.push_back(key + ": expected an object");
    return nullptr;
  }
  return &v;
}

void parse_interval(const Section& s, const std::string& key, double& lo, double& hi,
                    bool& common) {
  const json* v = s.raw(key);
  if (!v) {
    s.mark_default(key);
    return;
  }
  if (v->is_number()) {
    lo = hi = v->get<double>();
    common = true;
  } else if (v->is_array() && v->size() == 2 && (*v)[0].is_number() && (*v)[1].is_number()) {
    lo = (*v)[0].get<double>();
    hi = (*v)[1].get<double>();
    common = false;
  } else {
    s.issue(key, "expected a number or a [lo, hi] interval");
  }
}

ridehail::MarketParams parse_market(const json* obj, std::uint64_t seed, std::uint64_t& market_seed,
                                    std::vector<std::string>& issues,
                                    std::vector<std::string>& defaulted) {
  Section s(obj, "market", issues, defaulted);
  const std::string preset = s.text("preset", "table2");
  ridehail::MarketParams params;
  if (preset == "table2") {
    ridehail::TableTwoOptions opts;
    const json* seed_v = s.raw("seed");
    if (!seed_v) {
      s.mark_default("seed");
      opts.seed = seed;
    } else if (seed_v->is_number_unsigned()) {
      opts.seed = seed_v->get<std::uint64_t>();
    } else {
      s.issue("seed", "expected a nonnegative integer");
    }
    market_seed = opts.seed;
    opts.num_firms = s.count("num_firms", opts.num_firms);
    opts.num_areas = s.count("num_areas", opts.num_areas);
    opts.noise_sigma = s.number("noise_sigma", opts.noise_sigma);
    const Vector range = s.vector("w_high_range", 2, {opts.w_high_lo, opts.w_high_hi});
    opts.w_high_lo = range[0];
    opts.w_high_hi = range[1];
    if (opts.num_firms == 0 || opts.num_areas == 0) {
      s.issue("num_firms", "the market needs at least one firm and one area");
      s.raw("theta");
      s.check_unknown();
      return params;
    }
    params = ridehail::table_two_market(opts);
    if (const json* theta = s.raw("theta")) {
      params.theta = s.to_vector(*theta, "theta", params.num_firms);
    }
  } else if (preset == "custom") {
    market_seed = 0;
    params.num_firms = s.count("num_firms", 0);
    params.num_areas = s.count("num_areas", 0);
    const std::size_t N = params.num_firms;
    const std::size_t n = params.num_areas;
    params.p_bar = s.number("p_bar", 0.0);
    params.beta = s.number("beta", 0.0);
    params.w_low = s.number("w_low", 0.0);
    params.noise_sigma = s.number("noise_sigma", 0.0);
    if (!s.has("caps")) s.issue("caps", "required");
    if (!s.has("theta")) s.issue("theta", "required");
    if (!s.has("C")) s.issue("C", "required");
    params.caps = s.vector("caps", n, Vector(n, 0.0));
    params.theta = s.vector("theta", N, Vector(N, 0.0));
    params.C = s.vector("C", n, Vector(n, 0.0));
    params.w_high = s.matrix("w_high", N, n);
    params.K = s.matrix("K", N, n);
  } else {
    s.issue("preset", "unknown preset '" + preset + "' (known: table2, custom)");
  }
  s.check_unknown();
  return params;
}

MultiplierGraph parse_graph(const json* obj, std::size_t N, std::vector<std::string>& issues,
                            std::vector<std::string>& defaulted) {
  Section s(obj, "graph", issues, defaulted);
  MultiplierGraph graph = MultiplierGraph::ring(std::max<std::size_t>(N, 1));
  if (s.has("weights")) {
    const Matrix W = s.matrix("weights", N, N);
    try {
      graph = MultiplierGraph(W);
    } catch (const std::invalid_argument& e) {
      s.issue("weights", e.what());
    }
    if (s.has("topology")) s.issue("topology", "give either topology or weights, not both");
    s.raw("weight");
  } else {
    const std::string topology = s.text("topology", "ring");
    const double scale = s.number("weight", 1.0);
    if (!(scale > 0.0)) s.issue("weight", "must be positive");
    try {
      if (N > 0) {
        MultiplierGraph base = MultiplierGraph::named(topology, N);
        Matrix W = base.weights();
        for (std::size_t i = 0; i < N; ++i) {
          for (std::size_t j = 0; j < N; ++j) W(i, j) *= scale > 0.0 ? scale : 1.0;
        }
        graph = MultiplierGraph(W);
      }
    } catch (const std::invalid_argument& e) {
      s.issue("topology", e.what());
    }
  }
  s.check_unknown();
  return graph;
}

ScheduleOptions parse_schedule(const json* obj, std::vector<std::string>& issues,
                               std::vector<std::string>& defaulted) {
  Section s(obj, "schedule", issues, defaulted);
  ScheduleOptions opts;
  opts.a = s.number("a", opts.a);
  opts.b = s.number("b", opts.b);
  parse_interval(s, "eta", opts.eta_lo, opts.eta_hi, opts.common_eta);
  parse_interval(s, "zeta", opts.zeta_lo, opts.zeta_hi, opts.common_zeta);
  for (auto [key, target] : {std::pair{"gamma", &opts.gamma}, std::pair{"nu", &opts.nu},
                             std::pair{"tau", &opts.tau}}) {
    const json* v = s.raw(key);
    if (!v) {
      s.mark_default(key);
    } else if (v->is_number()) {
      *target = {v->get<double>()};
    } else {
      *target = s.to_vector(*v, key, v->is_array() ? v->size() : 1);
    }
  }
  const std::string fwd = s.text("z_forward", "dual");
  if (fwd == "dual") {
    opts.z_forward = AuxiliaryForward::Dual;
  } else if (fwd == "auxiliary") {
    opts.z_forward = AuxiliaryForward::Auxiliary;
  } else {
    s.issue("z_forward", "expected 'dual' or 'auxiliary'");
  }
  s.check_unknown();
  return opts;
}

SolverOptions parse_solver(const json* obj, std::vector<std::string>& issues,
                           std::vector<std::string>& defaulted) {
  Section s(obj, "solver", issues, defaulted);
  SolverOptions o;
  o.max_iterations = s.count("max_iterations", o.max_iterations);
  o.min_iterations = s.count("min_iterations", o.min_iterations);
  o.log_interval = s.count("log_interval", o.log_interval);
  o.consensus_tol = s.number("consensus_tol", o.consensus_tol);
  o.feasibility_tol = s.number("feasibility_tol", o.feasibility_tol);
  o.natural_tol = s.number("natural_tol", o.natural_tol);
  o.residual_samples = s.count("residual_samples", o.residual_samples);
  o.divergence_threshold = s.number("divergence_threshold", o.divergence_threshold);
  const std::string init = s.text("initial", "midpoint");
  if (init == "midpoint") {
    o.initial = InitialPoint::Midpoint;
  } else if (init == "lower") {
    o.initial = InitialPoint::Lower;
  } else {
    s.issue("initial", "expected 'midpoint' or 'lower'");
  }
  if (o.log_interval == 0) s.issue("log_interval", "must be at least 1");
  if (o.residual_samples == 0) s.issue("residual_samples", "must be at least 1");
  if (o.max_iterations == 0) s.issue("max_iterations", "must be at least 1");
  s.check_unknown();
  return o;
}

const char* axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::A:
      return "a";
    case SweepAxis::Eta:
      return "eta";
    case SweepAxis::Theta:
      return "theta";
    case SweepAxis::None:
      break;
  }
  return "none";
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

json market_json(const ridehail::MarketParams& p) {
  return json{{"num_firms", p.num_firms}, {"num_areas", p.num_areas}, {"p_bar", p.p_bar},
              {"caps", p.caps},           {"beta", p.beta},           {"w_low", p.w_low},
              {"w_high", matrix_json(p.w_high)}, {"theta", p.theta},  {"C", p.C},
              {"K", matrix_json(p.K)},    {"noise_sigma", p.noise_sigma}};
}

json states_json(const std::vector<AgentState>& states) {
  json out = json::array();
  for (const auto& s : states) out.push_back({{"x", s.x}, {"z", s.z}, {"lambda", s.lambda}});
  return out;
}

json row_json(const ResidualRow& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(format_number(v)); };
  return json{{"k", r.k},
              {"alpha", num(r.alpha)},
              {"eps_min", num(r.eps_min)},
              {"consensus_res", num(r.consensus)},
              {"feas_res", num(r.feasibility)},
              {"nat_res", num(r.natural)},
              {"ref_dist", num(r.ref_dist)}};
}

std::string csv_text(const RunRecord& record) {
  std::ostringstream out;
  write_run_csv(record, out);
  return out.str();
}

/// Solver that runs the configured schedule on `game` with `seed`.
RunRecord solve_once(const GameSpec& game, const ExperimentConfig& config,
                     const ScheduleOptions& schedule, std::uint64_t seed,
                     const BlockVector* reference) {
  TikhonovSolver solver(game, config.graph, schedule, config.solver, seed);
  return solver.run(reference);
}

double mean_of(const Vector& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double e : v) s += e;
  return s / static_cast<double>(v.size());
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> issues)
    : std::runtime_error(join_issues(issues)), issues_(std::move(issues)) {}

json ExperimentConfig::echo() const {
  json sched{{"a", schedule.a},
             {"b", schedule.b},
             {"eta", schedule.common_eta ? json(schedule.eta_lo)
                                         : json::array({schedule.eta_lo, schedule.eta_hi})},
             {"zeta", schedule.common_zeta ? json(schedule.zeta_lo)
                                           : json::array({schedule.zeta_lo, schedule.zeta_hi})},
             {"gamma", schedule.gamma.empty() ? Vector{1.0} : schedule.gamma},
             {"nu", schedule.nu.empty() ? Vector{1.0} : schedule.nu},
             {"tau", schedule.tau.empty() ? Vector{1.0} : schedule.tau},
             {"z_forward", schedule.z_forward == AuxiliaryForward::Dual ? "dual" : "auxiliary"}};
  json solv{{"max_iterations", solver.max_iterations},
            {"min_iterations", solver.min_iterations},
            {"log_interval", solver.log_interval},
            {"consensus_tol", solver.consensus_tol},
            {"feasibility_tol", solver.feasibility_tol},
            {"natural_tol", solver.natural_tol},
            {"residual_samples", solver.residual_samples},
            {"divergence_threshold", solver.divergence_threshold},
            {"initial", solver.initial == InitialPoint::Midpoint ? "midpoint" : "lower"}};
  return json{{"seed", seed},
              {"market_seed", market_seed},
              {"market", market_json(market)},
              {"graph", {{"weights", matrix_json(graph.weights())}}},
              {"schedule", sched},
              {"solver", solv},
              {"reference",
               {{"samples", reference.samples},
                {"tol", reference.tol},
                {"max_iterations", reference.max_iterations},
                {"seed", reference.seed}}},
              {"sweep",
               {{"axis", axis_name(sweep_axis)},
                {"values", sweep_values},
                {"replications", replications}}},
              {"study",
               {{"realizations", study.realizations},
                {"expectation_samples", study.expectation_samples}}},
              {"output", output_dir},
              {"defaulted", defaulted}};
}

ExperimentConfig parse_config(const json& doc, std::optional<std::uint64_t> seed_override) {
  std::vector<std::string> issues;
  ExperimentConfig cfg;
  if (!doc.is_object()) throw ConfigError({"top level: expected a JSON object"});
  Section top(&doc, "", issues, cfg.defaulted);

  if (seed_override) {
    cfg.seed = *seed_override;
    top.raw("seed");
  } else if (const json* s = top.raw("seed")) {
    if (s->is_number_unsigned()) {
      cfg.seed = s->get<std::uint64_t>();
    } else {
      issues.push_back("seed: expected a nonnegative integer");
    }
  } else {
    top.mark_default("seed");
  }

  top.raw("market");
  cfg.market = parse_market(subobject(doc, "market", issues, cfg.defaulted), cfg.seed,
                            cfg.market_seed, issues, cfg.defaulted);
  top.raw("graph");
  cfg.graph = parse_graph(subobject(doc, "graph", issues, cfg.defaulted), cfg.market.num_firms,
                          issues, cfg.defaulted);
  top.raw("schedule");
  cfg.schedule = parse_schedule(subobject(doc, "schedule", issues, cfg.defaulted), issues,
                                cfg.defaulted);
  top.raw("solver");
  cfg.solver = parse_solver(subobject(doc, "solver", issues, cfg.defaulted), issues,
                            cfg.defaulted);

  top.raw("reference");
  {
    Section s(subobject(doc, "reference", issues, cfg.defaulted), "reference", issues,
              cfg.defaulted);
    cfg.reference.samples = s.count("samples", cfg.reference.samples);
    cfg.reference.tol = s.number("tol", cfg.reference.tol);
    cfg.reference.max_iterations = s.count("max_iterations", cfg.reference.max_iterations);
    cfg.reference.seed = cfg.seed;
    if (cfg.reference.samples == 0) s.issue("samples", "must be at least 1");
    if (!(cfg.reference.tol > 0.0)) s.issue("tol", "must be positive");
    s.check_unknown();
  }

  top.raw("sweep");
  {
    Section s(subobject(doc, "sweep", issues, cfg.defaulted), "sweep", issues, cfg.defaulted);
    const std::string axis = s.text("axis", "none");
    if (axis == "none") {
      cfg.sweep_axis = SweepAxis::None;
    } else if (axis == "a") {
      cfg.sweep_axis = SweepAxis::A;
    } else if (axis == "eta") {
      cfg.sweep_axis = SweepAxis::Eta;
    } else if (axis == "theta") {
      cfg.sweep_axis = SweepAxis::Theta;
    } else {
      s.issue("axis", "expected none, a, eta or theta");
    }
    if (const json* v = s.raw("values")) {
      cfg.sweep_values = s.to_vector(*v, "values", v->is_array() ? v->size() : 1);
    } else {
      s.mark_default("values");
    }
    cfg.replications = s.count("replications", 1);
    if (cfg.replications < 1) s.issue("replications", "must be at least 1");
    if (cfg.sweep_axis != SweepAxis::None && cfg.sweep_values.empty()) {
      s.issue("values", "a sweep axis needs at least one value");
    }
    for (double v : cfg.sweep_values) {
      if (cfg.sweep_axis == SweepAxis::A && !validate_schedule(v, cfg.schedule.b)) {
        s.issue("values", "a = " + format_number(v) + " with b = " +
                              format_number(cfg.schedule.b) +
                              " violates a, b in (0, 1), a + b < 1 and a > b");
      }
      if (cfg.sweep_axis == SweepAxis::Eta && !(v > 0.0)) {
        s.issue("values", "eta values must be positive");
      }
      if (cfg.sweep_axis == SweepAxis::Theta && !(v >= 0.0 && v <= 1.0)) {
        s.issue("values", "theta values must lie in [0, 1]");
      }
    }
    s.check_unknown();
  }

  top.raw("study");
  {
    Section s(subobject(doc, "study", issues, cfg.defaulted), "study", issues, cfg.defaulted);
    cfg.study.realizations = s.count("realizations", cfg.study.realizations);
    cfg.study.expectation_samples = s.count("expectation_samples", cfg.study.expectation_samples);
    if (cfg.study.realizations == 0) s.issue("realizations", "must be at least 1");
    if (cfg.study.expectation_samples == 0) s.issue("expectation_samples", "must be at least 1");
    s.check_unknown();
  }

  cfg.output_dir = top.text("output", "out");
  top.check_unknown();

  for (auto& s : validate_config(cfg)) issues.push_back(std::move(s));
  if (!issues.empty()) throw ConfigError(std::move(issues));
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError({path.string() + ": cannot open file"});
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    // Byte offset -> line and column.
    std::size_t line = 1, col = 1;
    const std::size_t stop = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < stop; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError({path.string() + ":" + std::to_string(line) + ":" + std::to_string(col) +
                       ": JSON parse error: " + e.what()});
  }
  return parse_config(doc, seed_override);
}

std::vector<std::string> validate_config(const ExperimentConfig& config) {
  std::vector<std::string> out;
  for (const auto& s : config.market.issues()) out.push_back("market: " + s);
  if (out.empty()) {
    const GameSpec game = ridehail::build_game(config.market);
    for (const auto& f : validate_game(game).failures()) out.push_back("game: " + f);
  }
  if (config.graph.size() != config.market.num_firms) {
    out.push_back("graph: size " + std::to_string(config.graph.size()) + " differs from " +
                  std::to_string(config.market.num_firms) + " firms");
  } else if (!is_connected(config.graph)) {
    out.push_back("graph: multiplier graph is not connected");
  }
  for (const auto& s : config.schedule.issues()) out.push_back("schedule: " + s);
  for (const auto* v : {&config.schedule.gamma, &config.schedule.nu, &config.schedule.tau}) {
    if (v->size() > 1 && v->size() != config.market.num_firms) {
      out.push_back("schedule: gamma, nu and tau need one entry or one per firm");
      break;
    }
  }
  return out;
}

json reference_to_json(const ReferenceSolution& ref) {
  return json{{"kind", "reference"},
              {"x_star", ref.x_star},
              {"lambda_star", ref.lambda_star},
              {"natural_residual", ref.natural_residual},
              {"samples", ref.samples},
              {"iterations", ref.iterations},
              {"converged", ref.converged}};
}

ReferenceSolution reference_from_json(const json& doc) {
  try {
    const json& r = doc.contains("reference") && doc.at("reference").is_object()
                        ? doc.at("reference")
                        : doc;
    ReferenceSolution ref;
    ref.x_star = r.at("x_star").get<BlockVector>();
    ref.lambda_star = r.at("lambda_star").get<Vector>();
    ref.natural_residual = r.at("natural_residual").get<double>();
    ref.samples = r.at("samples").get<std::size_t>();
    ref.iterations = r.at("iterations").get<std::size_t>();
    ref.converged = r.at("converged").get<bool>();
    return ref;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("reference: malformed document: ") + e.what());
  }
}

ReferenceSolution compute_reference(const ExperimentConfig& config) {
  return solve_reference(ridehail::build_game(config.market), config.reference);
}

json run_record_summary(const RunRecord& record) {
  return json{{"iterations", record.iterations},
              {"stop_reason", record.stop_reason},
              {"seed", record.seed},
              {"generator", record.generator},
              {"eta", record.eta},
              {"zeta", record.zeta},
              {"error_monitor",
               {{"weighted_sum", record.error_monitor.weighted_sum},
                {"last_ratio", record.error_monitor.last_ratio},
                {"observations", record.error_monitor.observations}}},
              {"final", record.rows.empty() ? json(nullptr) : row_json(record.rows.back())},
              {"final_states", states_json(record.final_states)}};
}

json run_solve(const ExperimentConfig& config, const ReferenceSolution* reference,
               RunRecord* record_out) {
  const GameSpec game = ridehail::build_game(config.market);
  RunRecord record = solve_once(game, config, config.schedule, config.seed,
                                reference ? &reference->x_star : nullptr);
  json artifact{{"kind", "solve"},
                {"config", config.echo()},
                {"reference", reference ? reference_to_json(*reference) : json(nullptr)},
                {"run", run_record_summary(record)},
                {"csv", csv_text(record)}};
  if (record_out) *record_out = std::move(record);
  return artifact;
}

json run_convergence_sweep(const ExperimentConfig& config, const ReferenceSolution& reference,
                           std::size_t jobs) {
  if (config.sweep_axis != SweepAxis::A && config.sweep_axis != SweepAxis::Eta) {
    throw std::invalid_argument("sweep: axis must be 'a' or 'eta' for a convergence sweep");
  }
  const GameSpec game = ridehail::build_game(config.market);
  const std::size_t P = config.sweep_values.size();
  const std::size_t R = config.replications;

  struct Slot {
    bool diverged = false;
    std::string failure;
    std::size_t failed_at = 0;
    RunRecord record;
  };
  std::vector<Slot> slots(P * R);

  parallel_for(P * R, jobs, [&](std::size_t t) {
    const std::size_t p = t / R;
    const std::size_t r = t % R;
    ScheduleOptions sched = config.schedule;
    const double v = config.sweep_values[p];
    if (config.sweep_axis == SweepAxis::A) {
      sched.a = v;
    } else {
      const double ratio = sched.eta_hi / sched.eta_lo;
      sched.eta_lo = v;
      sched.eta_hi = sched.common_eta ? v : v * ratio;
    }
    Slot& slot = slots[t];
    try {
      slot.record = solve_once(game, config, sched, config.seed + r, &reference.x_star);
    } catch (const NumericalFailure& e) {
      slot.diverged = true;
      slot.failure = e.what();
      slot.failed_at = e.iteration();
      slot.record.seed = config.seed + r;
    }
  });

  json points = json::array();
  for (std::size_t p = 0; p < P; ++p) {
    json reps = json::array();
    // k -> ref distances over completed replications, in replication order.
    std::map<std::size_t, Vector> by_k;
    for (std::size_t r = 0; r < R; ++r) {
      const Slot& slot = slots[p * R + r];
      json rep{{"seed", config.seed + r}, {"diverged", slot.diverged}};
      if (slot.diverged) {
        rep["failure"] = slot.failure;
        rep["failed_at"] = slot.failed_at;
      } else {
        rep["iterations"] = slot.record.iterations;
        rep["stop_reason"] = slot.record.stop_reason;
        rep["eta"] = slot.record.eta;
        rep["zeta"] = slot.record.zeta;
        rep["final"] = slot.record.rows.empty() ? json(nullptr) : row_json(slot.record.rows.back());
        for (const auto& row : slot.record.rows) by_k[row.k].push_back(row.ref_dist);
      }
      reps.push_back(std::move(rep));
    }
    json curve = json::array();
    for (const auto& [k, dists] : by_k) {
      curve.push_back({{"k", k},
                       {"mean", mean_of(dists)},
                       {"min", *std::min_element(dists.begin(), dists.end())},
                       {"max", *std::max_element(dists.begin(), dists.end())},
                       {"count", dists.size()}});
    }
    points.push_back(
        {{"value", config.sweep_values[p]}, {"replications", reps}, {"curve", curve}});
  }

  return json{{"kind", "sweep"},
              {"axis", axis_name(config.sweep_axis)},
              {"config", config.echo()},
              {"reference", reference_to_json(reference)},
              {"points", points}};
}

json run_market_study(const ExperimentConfig& config, std::size_t jobs) {
  if (config.sweep_axis != SweepAxis::Theta) {
    throw std::invalid_argument("study: sweep axis must be 'theta'");
  }
  const std::size_t P = config.sweep_values.size();
  std::vector<json> results(P);

  parallel_for(P, jobs, [&](std::size_t p) {
    const double theta = config.sweep_values[p];
    ridehail::MarketParams params = config.market;
    params.theta.assign(params.num_firms, theta);
    json point{{"theta", theta}};
    try {
      params.validate();
      const GameSpec game = ridehail::build_game(params);
      const ReferenceSolution ref = solve_reference(game, config.reference);
      const RunRecord record = solve_once(game, config, config.schedule, config.seed, &ref.x_star);
      const BlockVector eq = record.final_primal();
      const ridehail::RealizedOutcomes out = ridehail::realized_outcomes(
          eq, config.study.realizations, config.seed, params, config.study.expectation_samples);
      point["ok"] = true;
      point["prices"] = eq;
      point["run"] = {{"iterations", record.iterations},
                      {"stop_reason", record.stop_reason},
                      {"eta", record.eta},
                      {"zeta", record.zeta},
                      {"final", record.rows.empty() ? json(nullptr) : row_json(record.rows.back())}};
      point["reference_converged"] = ref.converged;
      point["expected_profit"] = out.expected_profit;
      point["profit_ratio"] = out.profit_ratio;
      point["profit_ratio_stderr"] = out.profit_ratio_stderr;
      point["satisfaction"] = out.satisfaction;
      point["satisfaction_stderr"] = out.satisfaction_stderr;
      point["mean_satisfaction"] = mean_of(out.satisfaction);
      point["acceptance_frequency"] = matrix_json(out.acceptance_frequency);
      point["participation"] = matrix_json(out.participation);
    } catch (const std::exception& e) {
      point["ok"] = false;
      point["failure"] = e.what();
    }
    results[p] = std::move(point);
  });

  return json{{"kind", "study"},
              {"axis", "theta"},
              {"config", config.echo()},
              {"realizations", config.study.realizations},
              {"points", json(results)}};
}

std::vector<std::pair<std::string, std::string>> sweep_csv_tables(const json& artifact) {
  std::vector<std::pair<std::string, std::string>> out;
  if (artifact.value("kind", "") != "sweep") return out;
  const std::string axis = artifact.value("axis", "none");
  std::size_t index = 0;
  for (const auto& point : artifact.value("points", json::array())) {
    std::ostringstream csv;
    csv << "k,mean_ref_dist,min_ref_dist,max_ref_dist,replications\n";
    for (const auto& c : point.at("curve")) {
      csv << c.at("k").get<std::size_t>() << ',' << format_number(c.at("mean").get<double>())
          << ',' << format_number(c.at("min").get<double>()) << ','
          << format_number(c.at("max").get<double>()) << ','
          << c.at("count").get<std::size_t>() << '\n';
    }
    out.emplace_back("sweep_" + axis + "_" + std::to_string(index++) + ".csv", csv.str());
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> plot_tables(const json& artifact) {
  std::vector<std::pair<std::string, std::string>> out;
  const std::string kind = artifact.value("kind", "");
  const json points = artifact.value("points", json::array());
  if (kind == "sweep") {
    std::ostringstream t;
    t << "value\tk\tmean_ref_dist\tmin_ref_dist\tmax_ref_dist\n";
    for (const auto& p : points) {
      const std::string v = format_number(p.at("value").get<double>());
      for (const auto& c : p.at("curve")) {
        t << v << '\t' << c.at("k").get<std::size_t>() << '\t'
          << format_number(c.at("mean").get<double>()) << '\t'
          << format_number(c.at("min").get<double>()) << '\t'
          << format_number(c.at("max").get<double>()) << '\n';
      }
    }
    out.emplace_back("sweep_plot.tsv", t.str());
  } else if (kind == "study") {
    std::ostringstream ratio, sat, sat_mean;
    ratio << "theta\tfirm_id\tmean_ratio\tstderr\n";
    sat << "theta\tarea_id\tmean_satisfaction\tstderr\n";
    sat_mean << "theta\tmean_satisfaction\n";
    for (const auto& p : points) {
      if (!p.value("ok", false)) continue;
      const std::string th = format_number(p.at("theta").get<double>());
      const Vector r = p.at("profit_ratio").get<Vector>();
      const Vector rs = p.at("profit_ratio_stderr").get<Vector>();
      for (std::size_t i = 0; i < r.size(); ++i) {
        ratio << th << '\t' << i << '\t' << format_number(r[i]) << '\t' << format_number(rs[i])
              << '\n';
      }
      const Vector s = p.at("satisfaction").get<Vector>();
      const Vector ss = p.at("satisfaction_stderr").get<Vector>();
      for (std::size_t h = 0; h < s.size(); ++h) {
        sat << th << '\t' << h << '\t' << format_number(s[h]) << '\t' << format_number(ss[h])
            << '\n';
      }
      sat_mean << th << '\t' << format_number(p.at("mean_satisfaction").get<double>()) << '\n';
    }
    out.emplace_back("profit_ratio.tsv", ratio.str());
    out.emplace_back("satisfaction.tsv", sat.str());
    out.emplace_back("satisfaction_mean.tsv", sat_mean.str());
  } else if (kind == "solve") {
    std::ostringstream t;
    t << "k\talpha\teps_min\tconsensus_res\tfeas_res\tnat_res\tref_dist\n";
    std::istringstream csv(artifact.value("csv", ""));
    std::string line;
    std::getline(csv, line);  // header
    while (std::getline(csv, line)) {
      std::replace(line.begin(), line.end(), ',', '\t');
      t << line << '\n';
    }
    out.emplace_back("run_plot.tsv", t.str());
  } else {
    throw std::invalid_argument("emit: artifact kind '" + kind + "' has no plot data");
  }
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  if (ec) throw std::runtime_error(path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  out << text;
  out.flush();
  if (!out) throw std::runtime_error(path.string() + ": write failed");
}

std::vector<std::filesystem::path> emit_plot_data(const json& artifact,
                                                  const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> written;
  for (const auto& [name, text] : plot_tables(artifact)) {
    write_text_file(dir / name, text);
    written.push_back(dir / name);
  }
  return written;
}

void parallel_for(std::size_t count, std::size_t jobs,
                  const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs <= 1) {
    for (std::size_t t = 0; t < count; ++t) fn(t);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t t = next++; t < count; t = next++) {
        try {
          fn(t);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace sgnep::experiment
