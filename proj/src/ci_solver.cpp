#include "surveymech/ci_solver.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "surveymech/errors.hpp"

namespace surveymech {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

double alpha_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidInput("gamma must lie in (0, 1)");
  const double log_term = std::log(4.0 / gamma);
  return std::sqrt(2.0 * log_term) + 7.0 * log_term / 3.0;
}

CIParameters make_ci_parameters(double gamma, std::size_t n) {
  if (n == 0) throw InvalidInput("population size must be positive");
  CIParameters params;
  params.gamma = gamma;
  params.alpha_gamma = alpha_gamma(gamma);
  params.beta = 2.0 * params.alpha_gamma / std::sqrt(static_cast<double>(n));
  return params;
}

double ci_objective(std::span<const double> allocation, std::span<const double> ignore, double beta, double n) {
  if (allocation.size() != ignore.size()) throw InvalidInput("allocation and ignore rules misaligned");
  double variance = 0.0;
  double mass = 0.0;
  for (std::size_t k = 0; k < allocation.size(); ++k) {
    mass += ignore[k];
    if (ignore[k] >= 1.0) continue;
    variance += (1.0 - ignore[k]) / allocation[k];
  }
  const double bias = mass / n;
  return beta * beta * variance / n + bias * bias;
}

double ci_objective(const AllocationRule& rule, const IgnoreRule& ignore, double beta, std::size_t n) {
  return ci_objective(rule.probabilities, ignore.u_values, beta, static_cast<double>(n));
}

double ci_length_objective(std::span<const double> allocation, std::span<const double> ignore, double beta,
                           double n) {
  if (allocation.size() != ignore.size()) throw InvalidInput("allocation and ignore rules misaligned");
  double variance = 0.0;
  double mass = 0.0;
  for (std::size_t k = 0; k < allocation.size(); ++k) {
    mass += ignore[k];
    if (ignore[k] >= 1.0) continue;
    variance += (1.0 - ignore[k]) / allocation[k];
  }
  return beta * std::sqrt(variance / n) + mass / n;
}

// ------------------------------ IgnoreMassProblem ------------------------------

IgnoreMassProblem::IgnoreMassProblem(const CostSet& cost_set, double budget, double beta)
    : n_(static_cast<double>(cost_set.size())), budget_(budget), beta_(beta), profile_(make_profile(cost_set)) {
  if (!std::isfinite(budget) || budget < 0.0) throw InvalidInput("budget must be non-negative and finite");
  if (!std::isfinite(beta) || beta <= 0.0) throw InvalidInput("beta must be positive and finite");

  const auto& blocks = profile_.blocks;
  const std::size_t k = blocks.size();
  saturated_prefix_.assign(k + 1, 0.0);
  slope_prefix_.assign(k + 1, 0.0);
  top_mass_.assign(k + 1, 0.0);
  for (std::size_t b = 0; b < k; ++b) {
    saturated_prefix_[b + 1] = saturated_prefix_[b] + blocks[b].psi_sum;
    const double slope = blocks[b].phi > 0.0 ? blocks[b].psi_sum / std::sqrt(blocks[b].phi) : 0.0;
    slope_prefix_[b + 1] = slope_prefix_[b] + slope;
  }
  for (std::size_t b = k; b-- > 0;) top_mass_[b] = top_mass_[b + 1] + static_cast<double>(blocks[b].count());
}

IgnoreMassProblem::Cut IgnoreMassProblem::locate(double mass) const {
  if (mass >= n_) return {-1, 0.0};
  // First block whose top mass no longer exceeds M; the cut sits just below it.
  const auto it = std::lower_bound(top_mass_.begin(), top_mass_.end(), mass, std::greater<>());
  const auto r = static_cast<std::ptrdiff_t>(it - top_mass_.begin()) - 1;
  const auto& block = profile_.blocks[static_cast<std::size_t>(r)];
  const double fraction = (mass - top_mass_[static_cast<std::size_t>(r) + 1]) / static_cast<double>(block.count());
  return {r, std::clamp(fraction, 0.0, 1.0)};
}

IgnoreMassProblem::Multiplier IgnoreMassProblem::multiplier(const Cut& cut) const {
  if (cut.boundary < 0) return {0.0, true, true};
  const auto r = static_cast<std::size_t>(cut.boundary);
  const auto& blocks = profile_.blocks;
  const double keep = 1.0 - cut.fraction;
  const double top_phi = blocks[r].phi;

  if (budget_ <= 0.0) {
    // Nothing can be paid for; only zero-cost mass can be kept.
    if (top_phi <= 0.0) return {0.0, true, true};
    return {0.0, false, false};
  }

  const double full_spend = saturated_prefix_[r] + keep * blocks[r].psi_sum;
  if (full_spend <= budget_) return {std::sqrt(top_phi), true, true};

  const double boundary_slope = keep * blocks[r].psi_sum / std::sqrt(top_phi);
  auto tail_slope = [&](std::size_t k) { return slope_prefix_[r] - slope_prefix_[k] + boundary_slope; };
  auto spend_at_breakpoint = [&](std::size_t k) {
    if (k == r) return full_spend;
    return saturated_prefix_[k + 1] + std::sqrt(blocks[k].phi) * tail_slope(k + 1);
  };

  std::size_t lo = 0;
  std::size_t hi = r;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (spend_at_breakpoint(mid) >= budget_) hi = mid;
    else lo = mid + 1;
  }
  return {(budget_ - saturated_prefix_[lo]) / tail_slope(lo), false, true};
}

std::vector<double> IgnoreMassProblem::block_weights(const Cut& cut) const {
  std::vector<double> weights(profile_.blocks.size(), 0.0);
  if (cut.boundary < 0) return weights;
  const auto r = static_cast<std::size_t>(cut.boundary);
  std::fill(weights.begin(), weights.begin() + static_cast<std::ptrdiff_t>(r), 1.0);
  weights[r] = 1.0 - cut.fraction;
  return weights;
}

double IgnoreMassProblem::variance_term(double mass) const {
  const Cut cut = locate(mass);
  if (cut.boundary < 0) return 0.0;
  const Multiplier mult = multiplier(cut);
  if (!mult.feasible) return kInf;
  const auto r = static_cast<std::size_t>(cut.boundary);
  double sum = 0.0;
  for (std::size_t b = 0; b <= r; ++b) {
    const auto& block = profile_.blocks[b];
    const double a = mult.saturated ? 1.0 : allocation_for(mult.lambda, block.phi);
    const double weight = b == r ? 1.0 - cut.fraction : 1.0;
    sum += weight * static_cast<double>(block.count()) / a;
  }
  return beta_ * beta_ * sum / n_;
}

double IgnoreMassProblem::objective(double mass) const {
  const double bias = mass / n_;
  return variance_term(mass) + bias * bias;
}

double IgnoreMassProblem::variance_term_derivative(double mass) const {
  const Cut cut = locate(mass);
  if (cut.boundary < 0) return 0.0;
  const Multiplier mult = multiplier(cut);
  if (!mult.feasible) return -kInf;
  const double scale = beta_ * beta_ / n_;
  // Once the retained mass is fully bought the freed budget has no use, so only
  // the direct term remains.
  if (mult.saturated) return -scale;
  const double top = allocation_for(mult.lambda, profile_.blocks[static_cast<std::size_t>(cut.boundary)].phi);
  return -2.0 * scale / top;
}

double IgnoreMassProblem::optimal_mass() const {
  const auto& blocks = profile_.blocks;
  if (budget_ <= 0.0) {
    // Only the zero-cost block can be kept, at A = 1; the objective is a parabola in M.
    const double free_mass = blocks.front().phi <= 0.0 ? static_cast<double>(blocks.front().count()) : 0.0;
    return std::clamp(beta_ * beta_ * n_ / 2.0, n_ - free_mass, n_);
  }

  auto slope = [&](double mass) { return variance_term_derivative(mass) + 2.0 * mass / (n_ * n_); };

  double lo = 0.0;
  double hi = n_;
  if (slope(0.0) >= 0.0) {
    hi = 0.0;
  } else {
    for (int iter = 0; iter < 200 && hi - lo > 1e-14 * n_; ++iter) {
      const double mid = 0.5 * (lo + hi);
      if (slope(mid) >= 0.0) hi = mid;
      else lo = mid;
    }
  }

  std::vector<double> candidates{0.0, lo, 0.5 * (lo + hi), hi, n_};
  const double snap = 1e-9 * std::max(1.0, n_);
  for (double x : {lo, hi}) {
    for (double boundary : top_mass_)
      if (std::abs(boundary - x) <= snap) candidates.push_back(boundary);
  }
  std::sort(candidates.begin(), candidates.end());

  double best_mass = candidates.front();
  double best_value = objective(best_mass);
  for (double x : candidates) {
    const double value = objective(x);
    if (value < best_value) {
      best_value = value;
      best_mass = x;
    }
  }
  return best_mass;
}

CISolution IgnoreMassProblem::rule_at(double mass) const {
  mass = std::clamp(mass, 0.0, n_);
  const Cut cut = locate(mass);
  const auto& blocks = profile_.blocks;
  const std::size_t m = profile_.phi.size();

  CISolution solution;
  auto& ignore = solution.ignore;
  ignore.u_values.assign(m, 0.0);
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    const auto bb = static_cast<std::ptrdiff_t>(b);
    const double u = bb > cut.boundary ? 1.0 : (bb == cut.boundary ? cut.fraction : 0.0);
    std::fill(ignore.u_values.begin() + static_cast<std::ptrdiff_t>(blocks[b].begin),
              ignore.u_values.begin() + static_cast<std::ptrdiff_t>(blocks[b].end), u);
  }
  double total = 0.0;
  for (double u : ignore.u_values) total += u;
  ignore.total_mass = total;

  if (cut.boundary < 0) {
    ignore.threshold_phi = blocks.front().phi;
    ignore.boundary_fraction = 1.0;
  } else {
    const auto r = static_cast<std::size_t>(cut.boundary);
    if (cut.fraction > 0.0) {
      ignore.threshold_phi = blocks[r].phi;
      ignore.boundary_fraction = cut.fraction;
    } else if (r + 1 < blocks.size()) {
      ignore.threshold_phi = blocks[r + 1].phi;
      ignore.boundary_fraction = 1.0;
    } else {
      ignore.threshold_phi = kInf;
      ignore.boundary_fraction = 1.0;
    }
  }

  auto& rule = solution.allocation;
  const double max_phi = blocks.back().phi;
  if (cut.boundary < 0 || budget_ <= 0.0) {
    rule.lambda = std::sqrt(max_phi);
    rule.saturated = true;
  } else {
    const auto calibration = calibrate_multiplier(blocks, block_weights(cut), budget_);
    rule.lambda = calibration.lambda;
    rule.saturated = calibration.saturated;
  }
  rule.probabilities.resize(m);
  for (std::size_t k = 0; k < m; ++k) rule.probabilities[k] = allocation_for(rule.lambda, profile_.phi[k]);
  if (cut.boundary < 0 || budget_ <= 0.0) std::fill(rule.probabilities.begin(), rule.probabilities.end(), 1.0);

  solution.objective = ci_objective(rule.probabilities, ignore.u_values, beta_, n_);
  return solution;
}

CISolution solve_ci(const CostSet& cost_set, double budget, double beta) {
  const IgnoreMassProblem problem(cost_set, budget, beta);
  return problem.rule_at(problem.optimal_mass());
}

double g_derivative(const CostSet& cost_set, double budget, double beta, double mass) {
  const IgnoreMassProblem problem(cost_set, budget, beta);
  if (!(mass >= 0.0) || mass >= problem.size()) throw InvalidInput("ignore mass must lie in [0, n)");
  const double d = problem.variance_term_derivative(mass);
  if (std::isinf(d)) throw SolverError("budget cannot cover the retained mass");
  return d;
}

}  // namespace surveymech
