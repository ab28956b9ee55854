#include "surveymech/online.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>

#include <json.hpp>

#include "surveymech/errors.hpp"

namespace surveymech {

namespace {

void validate_arrivals(std::span<const Agent> arrivals, double cap) {
  if (arrivals.empty()) throw InvalidInput("population must be non-empty");
  if (!std::isfinite(cap) || cap <= 0.0) throw InvalidInput("cap must be positive and finite");
  for (const Agent& a : arrivals) {
    if (!std::isfinite(a.cost) || a.cost < 0.0) throw InvalidInput("costs must be finite and non-negative");
    if (!(a.datum >= 0.0 && a.datum <= 1.0)) throw InvalidInput("data must lie in [0, 1]");
  }
}

// Sorted history of accepted reports with the cap appended at the end.
class Grid {
 public:
  explicit Grid(double cap) : values_{cap} {}

  void insert(double cost) { values_.insert(std::upper_bound(values_.begin(), values_.end(), cost), cost); }
  [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }

 private:
  std::vector<double> values_;
};

RoundTranscript declined_round(std::size_t round, const Agent& agent, std::size_t grid_size) {
  RoundTranscript t;
  t.round = round;
  t.cost = agent.cost;
  t.grid_size = grid_size;
  t.declined = true;
  return t;
}

}  // namespace

Task parse_task(const std::string& name) {
  if (name == "unbiased") return Task::unbiased;
  if (name == "ci") return Task::ci;
  throw ConfigError("unknown task '" + name + "' (expected unbiased or ci)");
}

std::string to_string(Task task) { return task == Task::unbiased ? "unbiased" : "ci"; }

BudgetSchedule BudgetSchedule::for_task(Task task, std::size_t n, double total_budget) {
  if (n == 0) throw InvalidInput("population size must be positive");
  if (!std::isfinite(total_budget) || total_budget < 0.0) throw InvalidInput("budget must be non-negative");
  const double root_n = std::sqrt(static_cast<double>(n));
  return {total_budget, (task == Task::unbiased ? 0.25 : 0.0625) / root_n};
}

double BudgetSchedule::per_round(std::size_t round) const {
  return xi * total_budget * std::sqrt(static_cast<double>(round));
}

RunResult run_unbiased_online(std::span<const Agent> arrivals, const BudgetSchedule& schedule, double cap,
                              std::uint64_t seed, RunOptions options) {
  validate_arrivals(arrivals, cap);
  if (!(schedule.total_budget > 0.0)) throw InvalidInput("the unbiased mechanism needs a positive budget");
  const std::size_t n = arrivals.size();
  Rng rng(seed);
  Grid grid(cap);

  RunResult result;
  result.y.assign(n, 0.0);
  if (options.keep_transcripts) result.transcripts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Agent& agent = arrivals[i];
    const std::size_t round = i + 1;
    if (agent.cost > cap) {
      ++result.declined;
      if (options.keep_transcripts) result.transcripts.push_back(declined_round(round, agent, grid.values().size()));
      continue;
    }

    const CostSet costs(grid.values(), cap);
    const AllocationRule rule = solve_unbiased(costs, schedule.per_round(round));
    const std::size_t k = costs.ceil_index(agent.cost);
    const double a = rule.probabilities[k];
    const double price = myerson_payment_at(costs.costs(), rule.probabilities, k);
    const bool purchased = rng.bernoulli(a);

    RoundTranscript t;
    t.round = round;
    t.cost = agent.cost;
    t.grid_size = costs.size();
    t.probability = a;
    t.payment = price;
    t.purchased = purchased;
    if (purchased) {
      t.observed = agent.datum;
      t.y = agent.datum / a;
      t.paid = price;
    }
    result.y[i] = t.y;
    result.spend += t.paid;
    if (options.keep_transcripts) result.transcripts.push_back(t);
    grid.insert(agent.cost);
  }
  result.estimate = horvitz_thompson(result.y);
  return result;
}

RunResult run_ci_online(std::span<const Agent> arrivals, const BudgetSchedule& schedule, double cap, double gamma,
                        std::uint64_t seed, RunOptions options) {
  validate_arrivals(arrivals, cap);
  const std::size_t n = arrivals.size();
  if (n < 2) throw InvalidInput("the interval mechanism needs at least two agents");
  const CIParameters params = make_ci_parameters(gamma, n);
  Rng rng(seed);
  Grid grid(cap);

  RunResult result;
  result.y.assign(n, 0.0);
  if (options.keep_transcripts) result.transcripts.reserve(n);
  std::vector<double> effective;
  for (std::size_t i = 0; i < n; ++i) {
    const Agent& agent = arrivals[i];
    const std::size_t round = i + 1;
    if (agent.cost > cap) {
      ++result.declined;
      if (options.keep_transcripts) result.transcripts.push_back(declined_round(round, agent, grid.values().size()));
      continue;
    }

    const CostSet costs(grid.values(), cap);
    const CISolution solution = solve_ci(costs, schedule.per_round(round), params.beta);
    const auto& u = solution.ignore.u_values;
    const auto& alloc = solution.allocation.probabilities;
    effective.resize(costs.size());
    for (std::size_t j = 0; j < costs.size(); ++j) effective[j] = u[j] >= 0.5 ? 0.0 : alloc[j];

    const std::size_t k = costs.ceil_index(agent.cost);
    RoundTranscript t;
    t.round = round;
    t.cost = agent.cost;
    t.grid_size = costs.size();
    t.ignored = u[k] >= 0.5;
    t.probability = effective[k];
    t.payment = myerson_payment_at(costs.costs(), effective, k);
    if (t.ignored) {
      ++result.ignored;
    } else {
      t.purchased = rng.bernoulli(t.probability);
      if (t.purchased) {
        t.observed = agent.datum;
        t.y = agent.datum / t.probability;
        t.paid = t.payment;
      }
    }
    result.y[i] = t.y;
    result.spend += t.paid;
    if (options.keep_transcripts) result.transcripts.push_back(t);
    grid.insert(agent.cost);
  }

  result.estimate = horvitz_thompson(result.y);
  const double sigma = std::sqrt(sample_variance(result.y));
  const double bias = static_cast<double>(result.ignored) / static_cast<double>(n);
  result.interval = bernstein_interval(result.estimate, sigma, n, gamma, bias, options.clip_interval);
  return result;
}

UnbiasedBenchmark benchmark_unbiased(std::span<const double> costs, double cap, double budget) {
  std::vector<double> grid(costs.begin(), costs.end());
  grid.push_back(cap);
  const CostSet cost_set = CostSet::from_unsorted(grid, cap);

  UnbiasedBenchmark bench;
  bench.grid.assign(cost_set.costs().begin(), cost_set.costs().end());
  bench.rule = solve_unbiased(cost_set, budget);
  bench.var_star = worst_case_variance(bench.rule.probabilities);
  bench.cap_allocation = bench.rule.probabilities.back();
  return bench;
}

CIBenchmark benchmark_ci(std::span<const double> costs, double cap, double budget, double gamma) {
  std::vector<double> grid(costs.begin(), costs.end());
  grid.push_back(cap);
  const CostSet cost_set = CostSet::from_unsorted(grid, cap);

  CIBenchmark bench;
  bench.grid.assign(cost_set.costs().begin(), cost_set.costs().end());
  bench.beta = make_ci_parameters(gamma, cost_set.size()).beta;
  bench.solution = solve_ci(cost_set, budget, bench.beta);
  bench.l_star = ci_length_objective(bench.solution.allocation.probabilities, bench.solution.ignore.u_values,
                                     bench.beta, static_cast<double>(cost_set.size()));
  return bench;
}

double unbiased_variance_bound(const UnbiasedBenchmark& bench, std::size_t n) {
  const double nn = static_cast<double>(n);
  const double lead = (1.0 + 1.0 / nn) * (1.0 + 1.0 / nn);
  return 16.0 * (lead * bench.var_star + 1.0 / nn + 1.0 / (nn * std::sqrt(nn)) / bench.cap_allocation);
}

double ci_length_bound(const CIBenchmark& bench, std::size_t n) {
  const double root_n = std::sqrt(static_cast<double>(n));
  const double root_ten = std::sqrt(10.0);
  return 8.0 * root_ten * bench.l_star + 2.0 * root_ten / root_n + 1.0 / root_n;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buffer[64];
  const auto res = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, res.ptr);
}

void write_transcript_csv(std::ostream& out, std::span<const RoundTranscript> transcripts) {
  out << "round,cost,probability,payment,ignored,purchased,declined,y,paid\n";
  for (const auto& t : transcripts) {
    out << t.round << ',' << format_number(t.cost) << ',' << format_number(t.probability) << ','
        << format_number(t.payment) << ',' << (t.ignored ? 1 : 0) << ',' << (t.purchased ? 1 : 0) << ','
        << (t.declined ? 1 : 0) << ',' << format_number(t.y) << ',' << format_number(t.paid) << '\n';
  }
}

std::string run_summary_json(const RunResult& result, Task task) {
  nlohmann::ordered_json j;
  j["task"] = to_string(task);
  j["n"] = result.y.size();
  j["estimate"] = result.estimate;
  j["spend"] = result.spend;
  j["declined"] = result.declined;
  j["ignored"] = result.ignored;
  if (task == Task::ci) {
    j["interval"] = {{"lower", result.interval.lower},
                     {"upper", result.interval.upper},
                     {"sample_mean", result.interval.sample_mean},
                     {"sample_sigma", result.interval.sample_sigma},
                     {"bias_term", result.interval.bias_term},
                     {"gamma", result.interval.gamma}};
  }
  return j.dump(2);
}

}  // namespace surveymech
