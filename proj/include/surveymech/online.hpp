#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "surveymech/allocation.hpp"
#include "surveymech/ci_solver.hpp"
#include "surveymech/estimation.hpp"
#include "surveymech/random.hpp"
#include "surveymech/virtual_cost.hpp"

namespace surveymech {

enum class Task { unbiased, ci };

Task parse_task(const std::string& name);
std::string to_string(Task task);

/// One agent as it arrives: a reported cost and the datum it holds, in [0, 1].
struct Agent {
  double cost = 0.0;
  double datum = 0.0;
};

/// Round i gets xi * B * sqrt(i).
struct BudgetSchedule {
  double total_budget = 0.0;
  double xi = 0.0;

  /// xi = 1/(4 sqrt n) for the unbiased task, 1/(16 sqrt n) for the interval task.
  static BudgetSchedule for_task(Task task, std::size_t n, double total_budget);
  [[nodiscard]] double per_round(std::size_t round) const;
};

struct RoundTranscript {
  std::size_t round = 0;  ///< 1-based
  double cost = 0.0;
  std::size_t grid_size = 0;
  double probability = 0.0;  ///< A^i at the reported cost
  double payment = 0.0;      ///< P^i at the reported cost
  bool ignored = false;
  bool purchased = false;
  bool declined = false;  ///< cost above the cap; no offer was made
  double observed = 0.0;
  double y = 0.0;
  double paid = 0.0;
};

struct RunResult {
  double estimate = 0.0;  ///< (1/n) sum y
  double spend = 0.0;     ///< realised total payment
  std::size_t declined = 0;
  std::size_t ignored = 0;
  CIOutput interval;  ///< filled by the interval task only
  std::vector<double> y;
  std::vector<RoundTranscript> transcripts;
};

struct RunOptions {
  bool keep_transcripts = true;
  bool clip_interval = false;
};

/// Runs the online unbiased mechanism over agents in arrival order.
/// Requires a positive budget.
RunResult run_unbiased_online(std::span<const Agent> arrivals, const BudgetSchedule& schedule, double cap,
                              std::uint64_t seed, RunOptions options = {});

/// Runs the online interval mechanism; needs at least two agents.
RunResult run_ci_online(std::span<const Agent> arrivals, const BudgetSchedule& schedule, double cap, double gamma,
                        std::uint64_t seed, RunOptions options = {});

struct UnbiasedBenchmark {
  std::vector<double> grid;  ///< sorted costs plus the cap
  AllocationRule rule;
  double var_star = 0.0;
  double cap_allocation = 0.0;  ///< A*(cap)
};

struct CIBenchmark {
  std::vector<double> grid;
  CISolution solution;
  double beta = 0.0;    ///< 2 alpha_gamma / sqrt(n + 1)
  double l_star = 0.0;  ///< length objective at z == 1
};

/// Approximate optimum on the n + 1 points {costs, cap} with the full budget.
UnbiasedBenchmark benchmark_unbiased(std::span<const double> costs, double cap, double budget);
CIBenchmark benchmark_ci(std::span<const double> costs, double cap, double budget, double gamma);

/// 16 ((1 + 1/n)^2 Var* + 1/n + 1/(n sqrt n) / A*(cap)).
double unbiased_variance_bound(const UnbiasedBenchmark& bench, std::size_t n);
/// 8 sqrt(10) L* + 2 sqrt(10) / sqrt(n) + 1 / sqrt(n).
double ci_length_bound(const CIBenchmark& bench, std::size_t n);

/// One row per round: round,cost,probability,payment,ignored,purchased,declined,y,paid
void write_transcript_csv(std::ostream& out, std::span<const RoundTranscript> transcripts);

/// JSON object with the run's estimate, spend, counts and interval.
std::string run_summary_json(const RunResult& result, Task task);

/// Shortest round-trip decimal form used by every text output.
std::string format_number(double value);

}  // namespace surveymech
