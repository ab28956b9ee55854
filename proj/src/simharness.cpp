#include "surveymech/simharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <ostream>
#include <thread>

#include "surveymech/errors.hpp"
#include "surveymech/random.hpp"

namespace surveymech {

namespace {

using nlohmann::json;

double number_field(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_number()) throw ConfigError(std::string("field '") + key + "' must be a number");
  return j.at(key).get<double>();
}

std::string string_field(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw ConfigError(std::string("field '") + key + "' must be a string");
  return j.at(key).get<std::string>();
}

std::vector<double> pair_field(const json& j, const char* key, std::vector<double> fallback) {
  if (!j.contains(key)) {
    if (fallback.empty()) throw ConfigError(std::string("missing field '") + key + "'");
    return fallback;
  }
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ConfigError(std::string("field '") + key + "' must be an array of two numbers");
  return {v[0].get<double>(), v[1].get<double>()};
}

// Class sizes for a two-class split; the first class gets round(f n).
std::pair<std::size_t, std::size_t> split_counts(const std::vector<double>& fractions, std::size_t n) {
  if (fractions[0] < 0.0 || fractions[1] < 0.0 || std::abs(fractions[0] + fractions[1] - 1.0) > 1e-9)
    throw ConfigError("two-point fractions must be non-negative and sum to 1");
  const auto first = static_cast<std::size_t>(std::llround(fractions[0] * static_cast<double>(n)));
  return {std::min(first, n), n - std::min(first, n)};
}

std::vector<double> draw_costs(const json& law, std::size_t n, double cap, Rng& rng) {
  if (!law.is_object()) throw ConfigError("cost law must be an object");
  const std::string name = string_field(law, "law", "uniform");
  std::vector<double> costs(n);
  if (name == "uniform") {
    const double low = number_field(law, "low", 0.0);
    const double high = number_field(law, "high", cap);
    if (!(0.0 <= low && low <= high && high <= cap)) throw ConfigError("uniform cost law needs 0 <= low <= high <= cap");
    for (double& c : costs) c = rng.uniform(low, high);
  } else if (name == "constant") {
    const double value = number_field(law, "value", cap);
    if (!(value >= 0.0 && value <= cap)) throw ConfigError("constant cost must lie in [0, cap]");
    std::fill(costs.begin(), costs.end(), value);
  } else if (name == "two_point") {
    const auto values = pair_field(law, "values", {});
    const auto [first, second] = split_counts(pair_field(law, "fractions", {}), n);
    for (double v : values)
      if (!(v >= 0.0 && v <= cap)) throw ConfigError("two-point costs must lie in [0, cap]");
    std::fill(costs.begin(), costs.begin() + static_cast<std::ptrdiff_t>(first), values[0]);
    std::fill(costs.begin() + static_cast<std::ptrdiff_t>(first), costs.end(), values[1]);
    (void)second;
  } else if (name == "lognormal") {
    const double mu = number_field(law, "mu", 0.0);
    const double sigma = number_field(law, "sigma", 1.0);
    if (!(sigma >= 0.0)) throw ConfigError("lognormal sigma must be non-negative");
    for (double& c : costs) c = std::min(std::exp(mu + sigma * rng.normal()), cap);
  } else {
    throw ConfigError("unknown cost law '" + name + "'");
  }
  return costs;
}

double draw_datum(const json& law, Rng& rng) {
  const std::string name = string_field(law, "law", "uniform");
  if (name == "uniform") return rng.uniform01();
  if (name == "bernoulli") {
    const double p = number_field(law, "p", 0.5);
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("bernoulli p must lie in [0, 1]");
    return rng.bernoulli(p) ? 1.0 : 0.0;
  }
  if (name == "constant") {
    const double value = number_field(law, "value", 1.0);
    if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("constant datum must lie in [0, 1]");
    return value;
  }
  throw ConfigError("unknown data law '" + name + "'");
}

const json& sub_object(const json& j, const char* key) {
  static const json empty = json::object();
  if (!j.contains(key)) return empty;
  if (!j.at(key).is_object()) throw ConfigError(std::string("field '") + key + "' must be an object");
  return j.at(key);
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // runs - 1 denominator
  double fourth = 0.0;    // central fourth moment, runs denominator
};

Moments moments(const std::vector<double>& x) {
  Moments m;
  const double count = static_cast<double>(x.size());
  for (double v : x) m.mean += v;
  m.mean /= count;
  double second = 0.0;
  for (double v : x) {
    const double d = v - m.mean;
    second += d * d;
    m.fourth += d * d * d * d;
  }
  m.variance = x.size() > 1 ? second / (count - 1.0) : 0.0;
  m.fourth /= count;
  return m;
}

}  // namespace

double Population::mean() const {
  double sum = 0.0;
  for (const Agent& a : records) sum += a.datum;
  return sum / static_cast<double>(records.size());
}

std::vector<double> Population::costs() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const Agent& a : records) out.push_back(a.cost);
  return out;
}

PopulationSpec PopulationSpec::parse(const json& descriptor) {
  if (!descriptor.is_object()) throw ConfigError("population spec must be a JSON object");
  const std::string kind = string_field(descriptor, "kind", "");
  if (kind != "worst_case" && kind != "independent" && kind != "correlated" && kind != "two_point")
    throw ConfigError("unknown population kind '" + kind + "'");
  return {descriptor};
}

PopulationSpec PopulationSpec::worst_case() { return {json{{"kind", "worst_case"}}}; }

std::string PopulationSpec::tag() const { return descriptor.dump(); }

Population gen_population(const PopulationSpec& spec, std::size_t n, double cap, std::uint64_t seed) {
  if (n == 0) throw ConfigError("population size must be positive");
  if (!std::isfinite(cap) || cap <= 0.0) throw ConfigError("cap must be positive and finite");
  const json& d = spec.descriptor;
  Rng rng(seed);
  Population pop;
  pop.cap = cap;
  pop.tag = spec.tag();
  pop.records.resize(n);

  try {
    const std::string kind = string_field(d, "kind", "");
    if (kind == "two_point") {
      const auto costs = pair_field(d, "costs", {});
      const auto data = pair_field(d, "data", {1.0, 1.0});
      const auto [first, second] = split_counts(pair_field(d, "fractions", {}), n);
      (void)second;
      for (std::size_t c = 0; c < 2; ++c) {
        if (!(costs[c] >= 0.0 && costs[c] <= cap)) throw ConfigError("two-point costs must lie in [0, cap]");
        if (!(data[c] >= 0.0 && data[c] <= 1.0)) throw ConfigError("two-point data must lie in [0, 1]");
      }
      for (std::size_t i = 0; i < n; ++i) pop.records[i] = i < first ? Agent{costs[0], data[0]} : Agent{costs[1], data[1]};
      return pop;
    }

    const auto costs = draw_costs(sub_object(d, "cost"), n, cap, rng);
    if (kind == "worst_case") {
      for (std::size_t i = 0; i < n; ++i) pop.records[i] = {costs[i], 1.0};
    } else if (kind == "independent") {
      const json& data_law = sub_object(d, "data");
      for (std::size_t i = 0; i < n; ++i) pop.records[i] = {costs[i], draw_datum(data_law, rng)};
    } else if (kind == "correlated") {
      const std::string map = string_field(d, "map", "increasing");
      if (map != "increasing" && map != "decreasing") throw ConfigError("correlated map must be increasing or decreasing");
      for (std::size_t i = 0; i < n; ++i) {
        const double z = std::clamp(costs[i] / cap, 0.0, 1.0);
        pop.records[i] = {costs[i], map == "increasing" ? z : 1.0 - z};
      }
    } else {
      throw ConfigError("unknown population kind '" + kind + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed population spec: ") + e.what());
  }
  return pop;
}

SimMetrics monte_carlo(Task task, const Population& population, double budget, double gamma, std::size_t runs,
                       std::uint64_t seed, std::size_t threads, std::vector<RunRecord>* log) {
  if (runs == 0) throw InvalidInput("runs must be at least 1");
  if (population.records.empty()) throw InvalidInput("population must be non-empty");
  const std::size_t n = population.size();
  const double truth = population.mean();
  const BudgetSchedule schedule = BudgetSchedule::for_task(task, n, budget);

  SimMetrics metrics;
  metrics.task = task;
  metrics.runs = runs;
  metrics.n = n;
  metrics.budget = budget;
  metrics.gamma = gamma;
  metrics.seed = seed;
  metrics.population_mean = truth;

  const auto costs = population.costs();
  if (task == Task::unbiased) {
    const auto bench = benchmark_unbiased(costs, population.cap, budget);
    metrics.benchmark_var_star = bench.var_star;
    metrics.bound_rhs_unbiased = unbiased_variance_bound(bench, n);
  } else {
    const auto bench = benchmark_ci(costs, population.cap, budget, gamma);
    metrics.benchmark_l_star = bench.l_star;
    metrics.bound_rhs_ci = ci_length_bound(bench, n);
  }

  std::vector<RunRecord> records(runs);
  const RunOptions options{false, false};
  auto one_run = [&](std::size_t r) {
    Rng rng(derive_seed(seed, r));
    const auto order = random_permutation(n, rng);
    std::vector<Agent> arrivals(n);
    for (std::size_t i = 0; i < n; ++i) arrivals[i] = population.records[order[i]];
    const std::uint64_t mechanism_seed = rng.next();
    const RunResult result = task == Task::unbiased
                                 ? run_unbiased_online(arrivals, schedule, population.cap, mechanism_seed, options)
                                 : run_ci_online(arrivals, schedule, population.cap, gamma, mechanism_seed, options);
    RunRecord& rec = records[r];
    rec.run = r;
    rec.estimate = result.estimate;
    rec.spend = result.spend;
    rec.declined = result.declined;
    double sq = 0.0;
    for (double y : result.y) sq += y * y;
    rec.mean_y_sq = sq / static_cast<double>(n);
    rec.sigma = n > 1 ? std::sqrt(sample_variance(result.y)) : 0.0;
    if (task == Task::ci) {
      rec.lower = result.interval.lower;
      rec.upper = result.interval.upper;
      rec.covered = result.interval.covers(truth);
    }
  };

  const std::size_t workers = std::clamp<std::size_t>(threads, 1, runs);
  if (workers == 1) {
    for (std::size_t r = 0; r < runs; ++r) one_run(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const std::size_t r = next.fetch_add(1);
          if (r >= runs) return;
          try {
            one_run(r);
          } catch (...) {
            const std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
            next.store(runs);
            return;
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
  }

  // Reduce in run order so the floating-point sums are schedule-independent.
  std::vector<double> estimates(runs), spends(runs), lengths(runs);
  double covered = 0.0;
  for (std::size_t r = 0; r < runs; ++r) {
    const RunRecord& rec = records[r];
    estimates[r] = rec.estimate;
    spends[r] = rec.spend;
    lengths[r] = rec.upper - rec.lower;
    covered += rec.covered ? 1.0 : 0.0;
    metrics.mean_sigma += rec.sigma;
    metrics.mean_sigma_sq += rec.sigma * rec.sigma;
    metrics.mean_y_sq += rec.mean_y_sq;
    metrics.declined_rounds += rec.declined;
  }
  const double count = static_cast<double>(runs);
  metrics.mean_sigma /= count;
  metrics.mean_sigma_sq /= count;
  metrics.mean_y_sq /= count;

  const Moments est = moments(estimates);
  metrics.estimator_mean = est.mean;
  metrics.estimator_variance = est.variance;
  metrics.estimator_mean_se = std::sqrt(est.variance / count);
  metrics.estimator_variance_se = std::sqrt(std::max(0.0, est.fourth - est.variance * est.variance) / count);

  const Moments sp = moments(spends);
  metrics.expected_spend = sp.mean;
  metrics.spend_se = std::sqrt(sp.variance / count);

  if (task == Task::ci) {
    const Moments len = moments(lengths);
    metrics.ci_mean_length = len.mean;
    metrics.ci_length_se = std::sqrt(len.variance / count);
    metrics.ci_coverage = covered / count;
  }

  if (log != nullptr) *log = std::move(records);
  return metrics;
}

std::vector<Verdict> bound_verdicts(const SimMetrics& m) {
  std::vector<Verdict> out;
  auto add = [&](std::string name, bool passed, double lhs, double rhs) {
    out.push_back({std::move(name), passed, format_number(lhs) + " vs " + format_number(rhs)});
  };
  const double spend_limit = m.budget + 3.0 * m.spend_se;
  add("budget", m.expected_spend <= spend_limit, m.expected_spend, spend_limit);
  if (m.task == Task::unbiased) {
    const double gap = std::abs(m.estimator_mean - m.population_mean);
    add("unbiased", gap <= 3.0 * m.estimator_mean_se, gap, 3.0 * m.estimator_mean_se);
    const double limit = m.bound_rhs_unbiased + 3.0 * m.estimator_variance_se;
    add("variance_bound", m.estimator_variance <= limit, m.estimator_variance, limit);
  } else {
    const double coverage_floor = m.gamma - 2.0 * std::sqrt(m.gamma * (1.0 - m.gamma) / static_cast<double>(m.runs));
    add("coverage", m.ci_coverage >= coverage_floor, m.ci_coverage, coverage_floor);
    const double limit = m.bound_rhs_ci + 3.0 * m.ci_length_se;
    add("length_bound", m.ci_mean_length <= limit, m.ci_mean_length, limit);
  }
  return out;
}

std::string metrics_json(const SimMetrics& m, std::span<const Verdict> verdicts) {
  nlohmann::ordered_json j;
  j["task"] = to_string(m.task);
  j["runs"] = m.runs;
  j["n"] = m.n;
  j["budget"] = m.budget;
  j["gamma"] = m.gamma;
  j["seed"] = m.seed;
  j["population_mean"] = m.population_mean;
  j["estimator_mean"] = m.estimator_mean;
  j["estimator_variance"] = m.estimator_variance;
  j["estimator_mean_se"] = m.estimator_mean_se;
  j["estimator_variance_se"] = m.estimator_variance_se;
  j["expected_spend"] = m.expected_spend;
  j["spend_se"] = m.spend_se;
  j["declined_rounds"] = m.declined_rounds;
  if (m.task == Task::unbiased) {
    j["benchmark_var_star"] = m.benchmark_var_star;
    j["bound_rhs_unbiased"] = m.bound_rhs_unbiased;
  } else {
    j["ci_mean_length"] = m.ci_mean_length;
    j["ci_length_se"] = m.ci_length_se;
    j["ci_coverage"] = m.ci_coverage;
    j["benchmark_l_star"] = m.benchmark_l_star;
    j["bound_rhs_ci"] = m.bound_rhs_ci;
  }
  j["mean_sigma"] = m.mean_sigma;
  j["mean_sigma_sq"] = m.mean_sigma_sq;
  j["mean_y_sq"] = m.mean_y_sq;
  auto& v = j["verdicts"] = nlohmann::ordered_json::array();
  for (const auto& verdict : verdicts)
    v.push_back({{"name", verdict.name}, {"passed", verdict.passed}, {"detail", verdict.detail}});
  return j.dump(2);
}

void write_run_log_csv(std::ostream& out, std::span<const RunRecord> records) {
  out << "run,estimate,spend,lower,upper,covered\n";
  for (const auto& r : records) {
    out << r.run << ',' << format_number(r.estimate) << ',' << format_number(r.spend) << ','
        << format_number(r.lower) << ',' << format_number(r.upper) << ',' << (r.covered ? 1 : 0) << '\n';
  }
}

MechanismRound MechanismRound::with_myerson_payments(std::vector<double> grid, std::vector<double> allocation) {
  const double cap = grid.empty() ? 0.0 : grid.back();
  const CostSet cost_set(grid, cap);
  MechanismRound round;
  round.payments = myerson_payments_allowing_zero(cost_set, allocation).payments;
  round.grid = std::move(grid);
  round.allocation = std::move(allocation);
  return round;
}

TruthfulnessReport truthfulness_audit(const MechanismRound& round, std::size_t resolution) {
  const auto& grid = round.grid;
  if (grid.empty() || round.allocation.size() != grid.size() || round.payments.size() != grid.size())
    throw InvalidInput("mechanism round misaligned");
  if (resolution < 2) throw InvalidInput("audit resolution must be at least 2");
  const double cap = grid.back();

  TruthfulnessReport report;
  auto offer_index = [&](double cost) {
    return static_cast<std::size_t>(std::lower_bound(grid.begin(), grid.end(), cost) - grid.begin());
  };
  auto utility = [&](double true_cost, std::size_t k) {
    return round.allocation[k] * (round.payments[k] - true_cost);
  };
  auto sweep = [&](const std::vector<double>& points) {
    std::vector<std::size_t> index(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) index[i] = offer_index(points[i]);
    for (std::size_t t = 0; t < points.size(); ++t) {
      const double truthful = utility(points[t], index[t]);
      for (std::size_t r = 0; r < points.size(); ++r) {
        ++report.pairs;
        const double gain = utility(points[t], index[r]) - truthful;
        if (gain > report.max_violation) {
          report.max_violation = gain;
          report.worst_true = points[t];
          report.worst_report = points[r];
        }
      }
    }
  };

  sweep(grid);
  std::vector<double> points(resolution);
  for (std::size_t i = 0; i < resolution; ++i)
    points[i] = cap * static_cast<double>(i) / static_cast<double>(resolution - 1);
  points.back() = cap;
  sweep(points);

  for (std::size_t k = 0; k < grid.size(); ++k)
    if (round.allocation[k] > 0.0) report.max_ir_violation = std::max(report.max_ir_violation, grid[k] - round.payments[k]);

  report.passed = report.max_violation <= 1e-9 && report.max_ir_violation <= 1e-9;
  return report;
}

}  // namespace surveymech
