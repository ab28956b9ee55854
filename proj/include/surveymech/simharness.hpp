#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "surveymech/online.hpp"

namespace surveymech {

/// Fixed (cost, datum) records; arrival order is drawn per run by the harness.
struct Population {
  std::vector<Agent> records;
  double cap = 0.0;
  std::string tag;

  [[nodiscard]] std::size_t size() const noexcept { return records.size(); }
  [[nodiscard]] double mean() const;
  [[nodiscard]] std::vector<double> costs() const;
};

/// Generator descriptor, parsed from JSON such as
///   {"kind": "independent", "cost": {"law": "uniform"}, "data": {"law": "bernoulli", "p": 0.3}}
///
/// kinds: worst_case (z == 1), independent, correlated (z = c / cap, or 1 - c / cap
/// with "map": "decreasing"), two_point (exact class counts).
/// cost laws: uniform [low, high], two_point, constant, lognormal (clamped to the cap).
/// data laws: uniform, bernoulli, constant.
struct PopulationSpec {
  nlohmann::json descriptor;

  static PopulationSpec parse(const nlohmann::json& descriptor);
  static PopulationSpec worst_case();
  [[nodiscard]] std::string tag() const;
};

/// Deterministic given (spec, n, cap, seed). Throws ConfigError on a bad spec.
Population gen_population(const PopulationSpec& spec, std::size_t n, double cap, std::uint64_t seed);

struct RunRecord {
  std::size_t run = 0;
  double estimate = 0.0;
  double spend = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  bool covered = false;
  double sigma = 0.0;      ///< sample standard deviation of y
  double mean_y_sq = 0.0;  ///< (1/n) sum y^2
  std::size_t declined = 0;
};

struct SimMetrics {
  Task task = Task::unbiased;
  std::size_t runs = 0;
  std::size_t n = 0;
  double budget = 0.0;
  double gamma = 0.0;
  std::uint64_t seed = 0;
  double population_mean = 0.0;

  double estimator_mean = 0.0;
  double estimator_variance = 0.0;
  double estimator_mean_se = 0.0;
  double estimator_variance_se = 0.0;
  double expected_spend = 0.0;
  double spend_se = 0.0;
  double ci_mean_length = 0.0;
  double ci_length_se = 0.0;
  double ci_coverage = 0.0;
  double mean_sigma = 0.0;
  double mean_sigma_sq = 0.0;
  double mean_y_sq = 0.0;
  std::size_t declined_rounds = 0;

  double benchmark_var_star = 0.0;
  double benchmark_l_star = 0.0;
  double bound_rhs_unbiased = 0.0;
  double bound_rhs_ci = 0.0;
};

struct Verdict {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs `runs` independent random-order executions on `threads` workers.
/// Run r uses derive_seed(seed, r), so the result does not depend on threads.
SimMetrics monte_carlo(Task task, const Population& population, double budget, double gamma, std::size_t runs,
                       std::uint64_t seed, std::size_t threads = 1, std::vector<RunRecord>* log = nullptr);

/// Three-standard-error checks of budget, unbiasedness and the variance bound,
/// or coverage and the length bound for the interval task.
std::vector<Verdict> bound_verdicts(const SimMetrics& metrics);

std::string metrics_json(const SimMetrics& metrics, std::span<const Verdict> verdicts);
void write_run_log_csv(std::ostream& out, std::span<const RunRecord> records);

/// A discrete mechanism over a sorted grid whose last entry is the cap.
struct MechanismRound {
  std::vector<double> grid;
  std::vector<double> allocation;  ///< effective purchase probability
  std::vector<double> payments;

  static MechanismRound with_myerson_payments(std::vector<double> grid, std::vector<double> allocation);
};

struct TruthfulnessReport {
  double max_violation = 0.0;     ///< max over (true, reported) of utility gain from misreporting
  double max_ir_violation = 0.0;  ///< max over costs of c - P(c) where A(c) > 0
  double worst_true = 0.0;
  double worst_report = 0.0;
  std::size_t pairs = 0;
  bool passed = false;
};

/// Checks grid pairs and every pair from `resolution` evenly spaced costs on [0, cap]
/// under the extension. Passes iff both violations are <= 1e-9.
TruthfulnessReport truthfulness_audit(const MechanismRound& round, std::size_t resolution = 201);

}  // namespace surveymech
