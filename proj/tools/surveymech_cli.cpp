// Command-line front end: solve, simulate, benchmark and audit.
//
// Exit codes: 0 success, 1 audit or bound failure, 2 usage or config error.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "surveymech/allocation.hpp"
#include "surveymech/audit.hpp"
#include "surveymech/ci_solver.hpp"
#include "surveymech/errors.hpp"
#include "surveymech/online.hpp"
#include "surveymech/simharness.hpp"

namespace sm = surveymech;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr int kOk = 0;
constexpr int kFailed = 1;
constexpr int kUsage = 2;

struct Settings {
  std::string task = "unbiased";
  std::vector<double> costs;
  std::string costs_file;
  std::optional<double> budget;
  double gamma = 0.05;
  std::optional<double> cap;
  std::size_t runs = 1000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::string out;
  std::string config;
  std::size_t n = 50;
  std::string population = R"({"kind": "worst_case"})";
  std::vector<std::string> suites;
  std::size_t instances = 1000;
};

std::vector<double> read_costs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw sm::ConfigError("cannot open costs file '" + path + "'");
  std::vector<double> costs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream fields(line);
    std::string field;
    while (std::getline(fields, field, ',')) {
      if (field.find_first_not_of(" \t") == std::string::npos) continue;
      try {
        std::size_t used = 0;
        const double value = std::stod(field, &used);
        if (field.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(field);
        costs.push_back(value);
      } catch (const std::exception&) {
        if (line_no == 1 && costs.empty()) break;  // header row
        throw sm::ConfigError(path + ":" + std::to_string(line_no) + ": not a number: '" + field + "'");
      }
    }
  }
  return costs;
}

template <typename T>
void override_from(const json& cfg, const char* key, T& target) {
  if (!cfg.contains(key)) return;
  try {
    target = cfg.at(key).get<T>();
  } catch (const json::exception& e) {
    throw sm::ConfigError(std::string("config field '") + key + "': " + e.what());
  }
}

void apply_config(Settings& s) {
  if (s.config.empty()) return;
  std::ifstream in(s.config);
  if (!in) throw sm::ConfigError("cannot open config '" + s.config + "'");
  json cfg;
  try {
    cfg = json::parse(in);
  } catch (const json::parse_error& e) {
    throw sm::ConfigError("config '" + s.config + "': " + e.what());
  }
  if (!cfg.is_object()) throw sm::ConfigError("config must be a JSON object");
  override_from(cfg, "task", s.task);
  override_from(cfg, "costs", s.costs);
  override_from(cfg, "costs_file", s.costs_file);
  if (cfg.contains("budget")) {
    double b = 0.0;
    override_from(cfg, "budget", b);
    s.budget = b;
  }
  override_from(cfg, "gamma", s.gamma);
  if (cfg.contains("cap")) {
    double c = 0.0;
    override_from(cfg, "cap", c);
    s.cap = c;
  }
  override_from(cfg, "runs", s.runs);
  override_from(cfg, "seed", s.seed);
  override_from(cfg, "threads", s.threads);
  override_from(cfg, "out", s.out);
  override_from(cfg, "n", s.n);
  if (cfg.contains("population")) {
    const json& p = cfg.at("population");
    s.population = p.is_string() ? p.get<std::string>() : p.dump();
  }
  override_from(cfg, "suites", s.suites);
  override_from(cfg, "instances", s.instances);
}

std::vector<double> load_costs(const Settings& s) {
  std::vector<double> costs = s.costs;
  if (!s.costs_file.empty()) {
    const auto more = read_costs_file(s.costs_file);
    costs.insert(costs.end(), more.begin(), more.end());
  }
  if (costs.empty()) throw sm::InvalidInput("no costs given (use --costs or --costs-file)");
  return costs;
}

double require_budget(const Settings& s) {
  if (!s.budget) throw sm::InvalidInput("--budget is required");
  if (!std::isfinite(*s.budget) || *s.budget < 0.0) throw sm::InvalidInput("budget must be non-negative");
  return *s.budget;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sm::ConfigError("cannot write '" + path + "'");
  out << text;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

int cmd_solve(const Settings& s) {
  const auto task = sm::parse_task(s.task);
  const double budget = require_budget(s);
  auto costs = load_costs(s);
  const sm::CostSet set = s.cap ? sm::CostSet::from_unsorted(costs, *s.cap) : sm::CostSet::from_unsorted(costs);

  ordered_json report;
  report["task"] = sm::to_string(task);
  report["costs"] = std::vector<double>(set.costs().begin(), set.costs().end());
  report["cap"] = set.cap();
  report["budget"] = budget;

  std::vector<double> allocation;
  std::vector<double> ignore;
  if (task == sm::Task::unbiased) {
    const auto rule = sm::solve_unbiased(set, budget);
    const auto payments = sm::myerson_payments(set, rule);
    allocation = rule.probabilities;
    report["lambda"] = rule.lambda;
    report["saturated"] = rule.saturated;
    report["allocation"] = rule.probabilities;
    report["payments"] = payments.payments;
    report["objective"] = sm::worst_case_variance(rule.probabilities);
    report["expected_spend"] = sm::expected_spend(rule, payments, set);
  } else {
    const auto params = sm::make_ci_parameters(s.gamma, set.size());
    const auto solution = sm::solve_ci(set, budget, params.beta);
    allocation = solution.allocation.probabilities;
    ignore = solution.ignore.u_values;
    std::vector<double> effective(set.size());
    for (std::size_t k = 0; k < set.size(); ++k) effective[k] = (1.0 - ignore[k]) * allocation[k];
    report["gamma"] = s.gamma;
    report["alpha_gamma"] = params.alpha_gamma;
    report["beta"] = params.beta;
    report["lambda"] = solution.allocation.lambda;
    report["saturated"] = solution.allocation.saturated;
    report["allocation"] = allocation;
    report["ignore"] = ignore;
    report["payments"] = sm::myerson_payments_allowing_zero(set, effective).payments;
    report["threshold_phi"] = std::isinf(solution.ignore.threshold_phi) ? json(nullptr) : json(solution.ignore.threshold_phi);
    report["boundary_fraction"] = solution.ignore.boundary_fraction;
    report["ignore_mass"] = solution.ignore.total_mass;
    report["objective"] = solution.objective;
  }

  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!s.out.empty()) {
    if (ends_with(s.out, ".csv")) {
      std::ostringstream csv;
      const auto& payments = report["payments"];
      csv << (task == sm::Task::ci ? "cost,allocation,ignore,payment\n" : "cost,allocation,payment\n");
      for (std::size_t k = 0; k < set.size(); ++k) {
        csv << sm::format_number(set[k]) << ',' << sm::format_number(allocation[k]) << ',';
        if (task == sm::Task::ci) csv << sm::format_number(ignore[k]) << ',';
        csv << sm::format_number(payments[k].get<double>()) << '\n';
      }
      write_text(s.out, csv.str());
    } else {
      write_text(s.out, text);
    }
  }
  return kOk;
}

sm::Population make_population(const Settings& s) {
  json descriptor;
  try {
    descriptor = json::parse(s.population);
  } catch (const json::parse_error& e) {
    throw sm::ConfigError(std::string("population spec is not valid JSON: ") + e.what());
  }
  const auto spec = sm::PopulationSpec::parse(descriptor);
  if (!s.cap) throw sm::InvalidInput("--cap is required");
  return sm::gen_population(spec, s.n, *s.cap, s.seed);
}

int cmd_simulate(const Settings& s) {
  const auto task = sm::parse_task(s.task);
  const double budget = require_budget(s);
  if (s.runs == 0) throw sm::InvalidInput("runs must be at least 1");
  if (s.threads == 0) throw sm::InvalidInput("threads must be at least 1");
  const auto population = make_population(s);
  std::vector<sm::RunRecord> log;
  const auto metrics = sm::monte_carlo(task, population, budget, s.gamma, s.runs, s.seed, s.threads, &log);
  const auto verdicts = sm::bound_verdicts(metrics);
  const std::string report = sm::metrics_json(metrics, verdicts) + "\n";
  std::cout << report;
  if (!s.out.empty()) {
    write_text(s.out + ".json", report);
    std::ostringstream csv;
    sm::write_run_log_csv(csv, log);
    write_text(s.out + ".csv", csv.str());
  }
  bool all = true;
  for (const auto& v : verdicts) {
    std::cerr << (v.passed ? "PASS " : "FAIL ") << v.name << ": " << v.detail << "\n";
    all = all && v.passed;
  }
  return all ? kOk : kFailed;
}

int cmd_benchmark(const Settings& s) {
  const auto task = sm::parse_task(s.task);
  const double budget = require_budget(s);
  const auto costs = load_costs(s);
  double cap = 0.0;
  for (double c : costs) cap = std::max(cap, c);
  if (s.cap) cap = *s.cap;
  const std::size_t n = costs.size();

  ordered_json report;
  report["task"] = sm::to_string(task);
  report["n"] = n;
  report["cap"] = cap;
  report["budget"] = budget;
  if (task == sm::Task::unbiased) {
    const auto bench = sm::benchmark_unbiased(costs, cap, budget);
    report["grid"] = bench.grid;
    report["allocation"] = bench.rule.probabilities;
    report["var_star"] = bench.var_star;
    report["bound_rhs"] = sm::unbiased_variance_bound(bench, n);
  } else {
    const auto bench = sm::benchmark_ci(costs, cap, budget, s.gamma);
    report["gamma"] = s.gamma;
    report["beta"] = bench.beta;
    report["grid"] = bench.grid;
    report["allocation"] = bench.solution.allocation.probabilities;
    report["ignore"] = bench.solution.ignore.u_values;
    report["l_star"] = bench.l_star;
    report["bound_rhs"] = sm::ci_length_bound(bench, n);
  }
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!s.out.empty()) write_text(s.out, text);
  return kOk;
}

int cmd_audit(const Settings& s) {
  auto suites = s.suites.empty() ? sm::audit_suite_names() : s.suites;
  for (const auto& name : suites) {
    const auto& known = sm::audit_suite_names();
    if (std::find(known.begin(), known.end(), name) == known.end())
      throw sm::ConfigError("unknown audit suite '" + name + "'");
  }
  sm::AuditOptions options;
  options.instances = s.instances;
  options.seed = s.seed;
  bool all = true;
  ordered_json report = ordered_json::array();
  for (const auto& name : suites) {
    for (const auto& r : sm::run_audit_suite(name, options)) {
      std::cout << (r.passed ? "PASS " : "FAIL ") << r.suite << "/" << r.property << ": " << r.detail << "\n";
      report.push_back({{"suite", r.suite}, {"property", r.property}, {"passed", r.passed},
                        {"checked", r.checked}, {"worst", r.worst}});
      all = all && r.passed;
    }
  }
  if (!s.out.empty()) write_text(s.out, report.dump(2) + "\n");
  return all ? kOk : kFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Budget-feasible survey mechanisms: solvers, online simulation and audits"};
  app.require_subcommand(1);
  Settings s;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", s.config, "JSON config; its fields override the flags");
    cmd->add_option("--seed", s.seed, "Master seed");
    cmd->add_option("--out", s.out, "Output path");
  };
  auto add_costs = [&](CLI::App* cmd) {
    cmd->add_option("--task", s.task, "unbiased or ci");
    cmd->add_option("--costs", s.costs, "Inline costs")->delimiter(',');
    cmd->add_option("--costs-file", s.costs_file, "CSV file of costs");
    cmd->add_option("--budget", s.budget, "Total budget B");
    cmd->add_option("--gamma", s.gamma, "Confidence level for the interval task");
    cmd->add_option("--cap", s.cap, "Cost cap");
  };

  auto* solve = app.add_subcommand("solve", "Solve the known-costs allocation for one cost set");
  add_costs(solve);
  add_common(solve);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo runs of the online mechanism");
  simulate->add_option("--task", s.task, "unbiased or ci");
  simulate->add_option("--budget", s.budget, "Total budget B");
  simulate->add_option("--gamma", s.gamma, "Confidence level for the interval task");
  simulate->add_option("--cap", s.cap, "Cost cap");
  simulate->add_option("--n", s.n, "Population size");
  simulate->add_option("--population", s.population, "Population generator spec (JSON)");
  simulate->add_option("--runs", s.runs, "Monte Carlo runs");
  simulate->add_option("--threads", s.threads, "Worker threads");
  add_common(simulate);

  auto* benchmark = app.add_subcommand("benchmark", "Benchmark rule and bound for a cost multiset");
  add_costs(benchmark);
  add_common(benchmark);

  auto* audit = app.add_subcommand("audit", "Run property suites");
  audit->add_option("--suite", s.suites, "Suite name (repeatable): ironing, adjacency, truthfulness, oracle, convexity");
  audit->add_option("--instances", s.instances, "Random instances per suite");
  add_common(audit);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    apply_config(s);
    if (solve->parsed()) return cmd_solve(s);
    if (simulate->parsed()) return cmd_simulate(s);
    if (benchmark->parsed()) return cmd_benchmark(s);
    return cmd_audit(s);
  } catch (const sm::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const sm::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const sm::OutOfRange& e) {
    std::cerr << "error: " << e.what() << "\n";
  } catch (const sm::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
  }
  return kUsage;
}
