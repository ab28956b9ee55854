#include "surveymech/audit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "surveymech/allocation.hpp"
#include "surveymech/ci_solver.hpp"
#include "surveymech/errors.hpp"
#include "surveymech/oracle.hpp"
#include "surveymech/simharness.hpp"
#include "surveymech/virtual_cost.hpp"

namespace surveymech {

namespace {

// Tracks the worst violation of one property across instances.
class Tally {
 public:
  Tally(std::string suite, std::string property, double limit)
      : result_{std::move(suite), std::move(property), true, 0, 0.0, ""}, limit_(limit) {}

  void observe(double violation, const std::string& where = "") {
    ++result_.checked;
    if (violation > result_.worst || (std::isnan(violation) && !std::isnan(result_.worst))) {
      result_.worst = violation;
      if (!where.empty()) worst_where_ = where;
    }
    if (!(violation <= limit_)) result_.passed = false;
  }
  void fail(const std::string& why) {
    ++result_.checked;
    result_.passed = false;
    worst_where_ = why;
  }

  [[nodiscard]] PropertyResult finish() const {
    PropertyResult out = result_;
    std::ostringstream detail;
    detail << "checked " << out.checked << ", worst " << format_number(out.worst) << " (limit "
           << format_number(limit_) << ")";
    if (!worst_where_.empty()) detail << " at " << worst_where_;
    out.detail = detail.str();
    return out;
  }

 private:
  PropertyResult result_;
  double limit_;
  std::string worst_where_;
};

double sum(std::span<const double> v) { return std::accumulate(v.begin(), v.end(), 0.0); }

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double relative_gap(double a, double b, double floor_scale) {
  const double scale = std::max({std::abs(a), std::abs(b), floor_scale});
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

double inverse_sum(std::span<const double> a) {
  double s = 0.0;
  for (double x : a) s += 1.0 / x;
  return s;
}

std::string describe(std::span<const double> costs) {
  std::ostringstream out;
  out << "costs {";
  for (std::size_t i = 0; i < costs.size() && i < 8; ++i) out << (i ? ", " : "") << format_number(costs[i]);
  if (costs.size() > 8) out << ", ...";
  out << "}";
  return out.str();
}

std::vector<PropertyResult> ironing_suite(const AuditOptions& options) {
  Rng rng(derive_seed(options.seed, 101));
  Tally equal("ironing", "fast_equals_naive", 1e-12);
  Tally psi_check("ironing", "psi_matches_direct", 1e-12);
  Tally monotone("ironing", "phi_monotone", 0.0);
  Tally prefix("ironing", "prefix_dominance", 1e-9);
  Tally blocks("ironing", "block_sums", 1e-9);
  Tally paper("ironing", "three_point_example", 0.0);

  for (std::size_t t = 0; t < options.instances; ++t) {
    const std::size_t m = 1 + rng.below(200);
    const double cap = rng.uniform(1.0, 100.0);
    const auto costs = random_costs(rng, m, cap);
    const CostSet set(costs, cap);
    const auto psi = virtual_costs(set);
    const auto direct = oracle::virtual_costs_direct(costs);
    const double scale = max_abs(psi);

    double psi_gap = 0.0;
    for (std::size_t i = 0; i < m; ++i) psi_gap = std::max(psi_gap, relative_gap(psi[i], direct[i], 1e-300));
    psi_check.observe(psi_gap, describe(costs));

    const auto fast = regularize(psi);
    const auto naive = oracle::regularize_naive(psi);
    double gap = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double diff = std::abs(fast[i] - naive[i]);
      // Cancellation can leave phi near zero; measure against the psi scale there.
      gap = std::max(gap, diff / std::max({std::abs(fast[i]), std::abs(naive[i]), 1e-3 * scale, 1e-300}));
    }
    equal.observe(gap, describe(costs));

    double drop = 0.0;
    for (std::size_t i = 1; i < m; ++i) drop = std::max(drop, fast[i - 1] - fast[i]);
    monotone.observe(drop, describe(costs));

    double phi_prefix = 0.0;
    double psi_prefix = 0.0;
    double abs_prefix = 0.0;
    double worst_prefix = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      phi_prefix += fast[i];
      psi_prefix += psi[i];
      abs_prefix += std::abs(psi[i]);
      const double tol_scale = std::max(abs_prefix, 1e-300);
      worst_prefix = std::max(worst_prefix, (phi_prefix - psi_prefix) / tol_scale);
      const bool block_end = i + 1 == m || fast[i] != fast[i + 1];
      if (block_end) worst_prefix = std::max(worst_prefix, std::abs(phi_prefix - psi_prefix) / tol_scale);
    }
    prefix.observe(worst_prefix, describe(costs));

    double worst_block = 0.0;
    for (std::size_t b = 0; b < m;) {
      std::size_t e = b;
      double phi_sum = 0.0;
      double psi_sum = 0.0;
      double abs_sum = 0.0;
      while (e < m && fast[e] == fast[b]) {
        phi_sum += fast[e];
        psi_sum += psi[e];
        abs_sum += std::abs(psi[e]);
        ++e;
      }
      worst_block = std::max(worst_block, std::abs(phi_sum - psi_sum) / std::max(abs_sum, 1e-300));
      b = e;
    }
    blocks.observe(worst_block, describe(costs));
  }

  const CostSet example({1.0, 10.0, 11.0});
  const auto psi = virtual_costs(example);
  const auto phi = regularize(psi);
  const std::vector<double> psi_expected{1.0, 19.0, 13.0};
  const std::vector<double> phi_expected{1.0, 16.0, 16.0};
  double miss = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    miss = std::max({miss, std::abs(psi[i] - psi_expected[i]), std::abs(phi[i] - phi_expected[i])});
  paper.observe(miss, "costs {1, 10, 11}");

  return {equal.finish(), psi_check.finish(), monotone.finish(), prefix.finish(), blocks.finish(), paper.finish()};
}

std::vector<PropertyResult> adjacency_suite(const AuditOptions& options) {
  Rng rng(derive_seed(options.seed, 202));
  Tally sandwich("adjacency", "phi_factor_two", 1e-12);
  Tally upper("adjacency", "half_budget_below_full", 1e-9);
  Tally lower("adjacency", "half_budget_above_quarter", 1e-9);
  Tally pay_upper("adjacency", "spend_at_next_below_full", 1e-9);
  Tally pay_lower("adjacency", "spend_at_next_above_quarter", 1e-9);
  Tally mass("adjacency", "ignore_mass_ordering", 1e-9);

  for (std::size_t t = 0; t < options.instances; ++t) {
    const std::size_t m = 2 + rng.below(39);
    const double cap = rng.uniform(1.0, 100.0);
    const auto costs2 = random_costs(rng, m, cap);
    const std::size_t k = rng.below(m);
    auto costs1 = costs2;
    costs1.erase(costs1.begin() + static_cast<std::ptrdiff_t>(k));
    const CostSet set1(costs1, cap);
    const CostSet set2(costs2, cap);
    const std::string where = describe(costs2) + " k=" + std::to_string(k);

    const auto profile1 = make_profile(set1);
    const auto profile2 = make_profile(set2);
    const double scale = std::max(max_abs(profile1.psi), max_abs(profile2.psi));
    double worst = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (i == k) continue;
      const double phi1 = profile1.phi[i < k ? i : i - 1];
      const double phi2 = profile2.phi[i];
      const double slack = 1e-12 * scale;
      worst = std::max({worst, (0.5 * phi1 - phi2 - slack) / std::max(scale, 1e-300),
                        (phi2 - 2.0 * phi1 - slack) / std::max(scale, 1e-300)});
    }
    sandwich.observe(worst, where);

    const double total = sum(profile2.psi);
    if (total > 0.0) {
      const double budget = rng.uniform(0.05, 1.5) * total;
      const auto a1 = solve_unbiased(set1, budget / 2.0);
      const auto a2 = solve_unbiased(set2, budget);
      const auto a3 = solve_unbiased(set2, budget / 4.0);
      double up = 0.0;
      double low = 0.0;
      for (std::size_t i = k + 1; i < m; ++i) {
        up = std::max(up, a1.probabilities[i - 1] - a2.probabilities[i]);
        low = std::max(low, a3.probabilities[i] - a1.probabilities[i - 1]);
      }
      upper.observe(up, where);
      lower.observe(low, where);
      if (k + 1 < m) {
        const auto p1 = myerson_payments(set1, a1);
        const auto p2 = myerson_payments(set2, a2);
        const auto p3 = myerson_payments(set2, a3);
        const double s1 = a1.probabilities[k] * p1.payments[k];
        const double s2 = a2.probabilities[k + 1] * p2.payments[k + 1];
        const double s3 = a3.probabilities[k + 1] * p3.payments[k + 1];
        const double ref = std::max({std::abs(s1), std::abs(s2), std::abs(s3), 1e-300});
        pay_upper.observe((s1 - s2) / ref, where);
        pay_lower.observe((s3 - s1) / ref, where);
      }
    }

    const double ci_budget = rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, 1.2) * std::max(total, 1e-9);
    const double beta = rng.uniform(0.05, 1.5);
    const double m1 = solve_ci(set1, ci_budget, beta).ignore.total_mass;
    const double m2 = solve_ci(set2, ci_budget / 2.0, beta).ignore.total_mass;
    mass.observe((m1 - m2) / static_cast<double>(m), where + " beta=" + format_number(beta));
  }
  return {sandwich.finish(), upper.finish(), lower.finish(), pay_upper.finish(), pay_lower.finish(), mass.finish()};
}

std::vector<PropertyResult> truthfulness_suite(const AuditOptions& options) {
  Rng rng(derive_seed(options.seed, 303));
  Tally truthful("truthfulness", "no_profitable_misreport", 1e-9);
  Tally rational("truthfulness", "individually_rational", 1e-9);
  Tally corrupted("truthfulness", "corrupted_payment_detected", 1e-9);

  for (std::size_t t = 0; t < options.instances; ++t) {
    const std::size_t m = 1 + rng.below(20);
    const double cap = rng.uniform(1.0, 100.0);
    auto grid = random_costs(rng, m - 1, cap);
    grid.push_back(cap);
    const CostSet set(grid, cap);

    std::vector<double> allocation(m);
    switch (t % 3) {
      case 0:
        for (double& a : allocation) a = rng.uniform(0.01, 1.0);
        std::sort(allocation.begin(), allocation.end(), std::greater<>());
        break;
      case 1: {
        const double budget = rng.uniform(0.05, 1.2) * std::max(sum(virtual_costs(set)), 1e-6);
        allocation = solve_unbiased(set, budget).probabilities;
        break;
      }
      default: {
        const double budget = rng.uniform(0.0, 1.2) * std::max(sum(virtual_costs(set)), 1e-6);
        const auto solution = solve_ci(set, budget, rng.uniform(0.05, 1.5));
        for (std::size_t j = 0; j < m; ++j)
          allocation[j] = solution.ignore.u_values[j] >= 0.5 ? 0.0 : solution.allocation.probabilities[j];
        break;
      }
    }
    const auto round = MechanismRound::with_myerson_payments(grid, allocation);
    const auto report = truthfulness_audit(round, 201);
    const std::string where = describe(grid);
    truthful.observe(report.max_violation, where);
    rational.observe(report.max_ir_violation, where);
  }

  MechanismRound bad = MechanismRound::with_myerson_payments({1.0, 2.0}, {1.0, 0.5});
  bad.payments[0] -= 0.1;
  const auto report = truthfulness_audit(bad, 201);
  // The gain from misreporting must be visible and equal to the payment cut.
  if (report.passed) corrupted.fail("corrupted payment passed the audit");
  else corrupted.observe(std::abs(report.max_violation - 0.1), "grid {1, 2}");

  return {truthful.finish(), rational.finish(), corrupted.finish()};
}

std::vector<PropertyResult> oracle_suite(const AuditOptions& options) {
  Rng rng(derive_seed(options.seed, 404));
  Tally closed("oracle", "closed_form_within_one_percent", 0.01);
  Tally tight("oracle", "grid_search_beats_rounded_closed_form", 1e-9);
  Tally calibrated("oracle", "budget_calibration", 1e-9);
  Tally example("oracle", "three_point_rule", 1e-6);
  Tally ci("oracle", "interval_closed_form_not_worse", 1e-9);
  Tally ci_example("oracle", "interval_four_point_example", 1e-3);

  constexpr double kStep = 1e-3;
  for (std::size_t t = 0; t < options.instances; ++t) {
    const std::size_t m = 1 + rng.below(6);
    const double cap = rng.uniform(1.0, 20.0);
    const auto costs = random_costs(rng, m, cap);
    const CostSet set(costs, cap);
    const double total = sum(virtual_costs(set));
    if (total <= 0.0) continue;
    const double budget = rng.uniform(0.05, 1.2) * total;
    const auto rule = solve_unbiased(set, budget);
    const double objective = inverse_sum(rule.probabilities);
    const auto grid = oracle::grid_search_unbiased(costs, budget, kStep);
    const std::string where = describe(costs) + " B=" + format_number(budget);
    if (!grid.feasible) {
      tight.fail("grid search found no feasible rule for " + where);
      continue;
    }
    closed.observe((objective - grid.objective) / grid.objective, where);

    const auto psi = oracle::virtual_costs_direct(costs);
    double spend = 0.0;
    for (std::size_t i = 0; i < m; ++i) spend += rule.probabilities[i] * psi[i];
    if (!rule.saturated) calibrated.observe(std::abs(spend - budget) / std::max(budget, 1e-3), where);
    else calibrated.observe(std::max(0.0, total - budget) / budget, where);

    // Rounding the closed form down onto the lattice stays monotone and feasible,
    // so the exact lattice optimum can be no worse.
    bool representable = true;
    double rounded = 0.0;
    for (double a : rule.probabilities) {
      const double level = std::floor(a / kStep + 1e-9);
      if (level < 1.0) representable = false;
      rounded += 1.0 / (level * kStep);
    }
    if (representable) tight.observe((grid.objective - rounded) / rounded, where);
  }

  const CostSet three({1.0, 10.0, 11.0});
  const auto rule = solve_unbiased(three, 3.0);
  const std::vector<double> expected{1.0 / 3.0, 1.0 / 12.0, 1.0 / 12.0};
  double miss = 0.0;
  for (std::size_t i = 0; i < 3; ++i) miss = std::max(miss, std::abs(rule.probabilities[i] - expected[i]));
  example.observe(miss, "costs {1, 10, 11}, B = 3");

  const std::size_t ci_instances = std::max<std::size_t>(1, options.instances / 20);
  for (std::size_t t = 0; t < ci_instances; ++t) {
    const std::size_t m = 1 + rng.below(4);
    const double cap = rng.uniform(1.0, 20.0);
    const auto costs = random_costs(rng, m, cap);
    const CostSet set(costs, cap);
    const double total = sum(virtual_costs(set));
    const double budget = rng.bernoulli(0.1) ? 0.0 : rng.uniform(0.0, 1.0) * total;
    const double beta = rng.uniform(0.1, 1.2);
    const auto solution = solve_ci(set, budget, beta);
    const auto grid = oracle::grid_search_ci(costs, budget, beta);
    const std::string where = describe(costs) + " B=" + format_number(budget) + " beta=" + format_number(beta);
    if (!grid.feasible) {
      ci.fail("interval grid search found nothing for " + where);
      continue;
    }
    ci.observe((solution.objective - grid.objective) / std::max(grid.objective, 1e-12), where);
  }

  const std::vector<double> four{1.0, 1.0, 100.0, 100.0};
  const double beta = make_ci_parameters(0.1, 4).beta;
  const auto solution = solve_ci(CostSet(four), 2.0, beta);
  const auto grid = oracle::grid_search_ci(four, 2.0, beta);
  ci_example.observe(std::abs(solution.objective - grid.objective), "costs {1, 1, 100, 100}, B = 2");

  return {closed.finish(), tight.finish(), calibrated.finish(), example.finish(), ci.finish(), ci_example.finish()};
}

std::vector<PropertyResult> convexity_suite(const AuditOptions& options) {
  Rng rng(derive_seed(options.seed, 505));
  Tally convex("convexity", "second_differences", 1e-6);
  Tally derivative("convexity", "derivative_non_decreasing", 1e-9);
  Tally argmin("convexity", "chosen_mass_is_sampled_argmin", 1e-9);
  Tally structure("convexity", "threshold_structure", 1e-12);
  Tally budget_check("convexity", "interval_budget", 1e-9);

  for (std::size_t t = 0; t < options.instances; ++t) {
    const std::size_t m = 2 + rng.below(29);
    const double cap = rng.uniform(1.0, 100.0);
    const auto costs = random_costs(rng, m, cap);
    const CostSet set(costs, cap);
    const double total = sum(virtual_costs(set));
    const double budget = rng.uniform(0.01, 1.2) * std::max(total, 1e-6);
    const double beta = rng.uniform(0.05, 2.0);
    const IgnoreMassProblem problem(set, budget, beta);
    const double n = problem.size();
    const std::string where = describe(costs) + " B=" + format_number(budget) + " beta=" + format_number(beta);

    std::vector<double> values(101);
    std::vector<double> slopes(100);
    double scale = 1.0;
    for (std::size_t j = 0; j <= 100; ++j) {
      const double mass = n * static_cast<double>(j) / 100.0;
      values[j] = problem.objective(mass);
      scale = std::max(scale, std::abs(values[j]));
      if (j < 100) slopes[j] = problem.variance_term_derivative(mass);
    }
    double worst = 0.0;
    for (std::size_t j = 1; j < 100; ++j)
      worst = std::max(worst, -(values[j - 1] - 2.0 * values[j] + values[j + 1]) / scale);
    convex.observe(worst, where);

    double slope_scale = 1e-300;
    for (double s : slopes) slope_scale = std::max(slope_scale, std::abs(s));
    double slope_drop = 0.0;
    for (std::size_t j = 1; j < 100; ++j) slope_drop = std::max(slope_drop, (slopes[j - 1] - slopes[j]) / slope_scale);
    derivative.observe(slope_drop, where);

    const auto best = std::min_element(values.begin(), values.end());
    const double sampled_mass = n * static_cast<double>(best - values.begin()) / 100.0;
    const double chosen = problem.optimal_mass();
    const double chosen_value = problem.objective(chosen);
    double miss = std::max(0.0, chosen_value - *best) / scale;
    if (std::abs(chosen - sampled_mass) > n / 100.0 + 1e-9 * n && std::abs(chosen_value - *best) > 1e-9 * scale)
      miss = std::max(miss, 1.0);
    argmin.observe(miss, where);

    const auto solution = problem.rule_at(chosen);
    const auto& u = solution.ignore.u_values;
    const auto& a = solution.allocation.probabilities;
    const auto& phi = problem.profile().phi;
    const double h = solution.ignore.threshold_phi;
    double bad = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (phi[i] < h && u[i] != 0.0) bad = std::max(bad, u[i]);
      if (phi[i] > h && u[i] != 1.0) bad = std::max(bad, 1.0 - u[i]);
      if (phi[i] == h && u[i] != solution.ignore.boundary_fraction)
        bad = std::max(bad, std::abs(u[i] - solution.ignore.boundary_fraction));
      if (i > 0) {
        bad = std::max(bad, u[i - 1] - u[i]);
        bad = std::max(bad, (1.0 - u[i]) * a[i] - (1.0 - u[i - 1]) * a[i - 1] - 1e-15);
      }
    }
    structure.observe(bad, where);

    const auto& psi = problem.profile().psi;
    double spend = 0.0;
    for (std::size_t i = 0; i < m; ++i) spend += (1.0 - u[i]) * a[i] * psi[i];
    double excess = (spend - budget) / budget;
    if (!solution.allocation.saturated && solution.ignore.total_mass < n)
      excess = std::abs(spend - budget) / budget;
    budget_check.observe(excess, where);
  }
  return {convex.finish(), derivative.finish(), argmin.finish(), structure.finish(), budget_check.finish()};
}

}  // namespace

std::vector<double> random_costs(Rng& rng, std::size_t m, double cap) {
  std::vector<double> costs(m);
  switch (rng.below(3)) {
    case 0:
      for (double& c : costs) c = rng.uniform(0.0, cap);
      break;
    case 1: {
      const auto levels = 1 + rng.below(8);
      for (double& c : costs)
        c = std::min(cap, cap * static_cast<double>(rng.below(levels + 1)) / static_cast<double>(levels));
      break;
    }
    default: {
      const double centre = rng.uniform(0.0, cap);
      const double width = rng.uniform(0.0, 0.2) * cap;
      for (double& c : costs) c = rng.bernoulli(0.7) ? std::clamp(centre + width * (rng.uniform01() - 0.5), 0.0, cap)
                                                     : rng.uniform(0.0, cap);
      break;
    }
  }
  std::sort(costs.begin(), costs.end());
  return costs;
}

const std::vector<std::string>& audit_suite_names() {
  static const std::vector<std::string> names{"ironing", "adjacency", "truthfulness", "oracle", "convexity"};
  return names;
}

std::vector<PropertyResult> run_audit_suite(const std::string& name, const AuditOptions& options) {
  if (name == "ironing") return ironing_suite(options);
  if (name == "adjacency") return adjacency_suite(options);
  if (name == "truthfulness") return truthfulness_suite(options);
  if (name == "oracle") return oracle_suite(options);
  if (name == "convexity") return convexity_suite(options);
  throw ConfigError("unknown audit suite '" + name + "'");
}

}  // namespace surveymech
