#include "surveymech/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "surveymech/errors.hpp"

namespace surveymech {

Calibration calibrate_multiplier(std::span<const PhiBlock> blocks, std::span<const double> block_weights,
                                 double budget) {
  if (blocks.size() != block_weights.size()) throw InvalidInput("block weights misaligned with blocks");
  if (!(budget > 0.0) || !std::isfinite(budget)) throw InvalidInput("calibration needs a positive finite budget");

  const std::size_t k = blocks.size();
  double full_spend = 0.0;
  double max_phi = 0.0;
  for (std::size_t b = 0; b < k; ++b) {
    if (block_weights[b] <= 0.0) continue;
    full_spend += block_weights[b] * blocks[b].psi_sum;
    max_phi = std::max(max_phi, blocks[b].phi);
  }
  if (full_spend <= budget) return {std::sqrt(max_phi), true};

  // Spend on [t_{b-1}, t_b] with t_b = sqrt(phi_b) is linear: blocks below b are
  // saturated, the rest pay weight * psi_sum * lambda / t.
  std::vector<double> unsaturated_slope(k + 1, 0.0);
  for (std::size_t b = k; b-- > 0;) {
    double term = 0.0;
    if (block_weights[b] > 0.0 && blocks[b].phi > 0.0)
      term = block_weights[b] * blocks[b].psi_sum / std::sqrt(blocks[b].phi);
    unsaturated_slope[b] = unsaturated_slope[b + 1] + term;
  }

  double saturated_spend = 0.0;
  for (std::size_t b = 0; b < k; ++b) {
    if (block_weights[b] <= 0.0 || blocks[b].phi <= 0.0) continue;
    const double breakpoint = std::sqrt(blocks[b].phi);
    const double spend_at_breakpoint = saturated_spend + breakpoint * unsaturated_slope[b];
    if (spend_at_breakpoint >= budget) return {(budget - saturated_spend) / unsaturated_slope[b], false};
    saturated_spend += block_weights[b] * blocks[b].psi_sum;
  }
  // Only reachable through rounding when full_spend is a hair above budget.
  return {std::sqrt(max_phi), true};
}

AllocationRule solve_unbiased(const CostSet& cost_set, double budget) {
  if (!std::isfinite(budget) || budget <= 0.0) throw InvalidInput("budget must be positive and finite");
  const auto profile = make_profile(cost_set);
  const std::vector<double> weights(profile.blocks.size(), 1.0);
  const auto calibration = calibrate_multiplier(profile.blocks, weights, budget);

  AllocationRule rule;
  rule.lambda = calibration.lambda;
  rule.saturated = calibration.saturated;
  rule.probabilities.resize(cost_set.size());
  for (std::size_t i = 0; i < cost_set.size(); ++i)
    rule.probabilities[i] = calibration.saturated ? 1.0 : allocation_for(calibration.lambda, profile.phi[i]);
  return rule;
}

void require_monotone(std::span<const double> allocation) {
  for (std::size_t i = 0; i < allocation.size(); ++i) {
    const double a = allocation[i];
    if (!std::isfinite(a) || a < 0.0 || a > 1.0)
      throw InvalidInput("allocation " + std::to_string(i) + " is outside [0, 1]");
    if (i > 0 && a > allocation[i - 1]) throw InvalidInput("allocation is not monotone non-increasing");
  }
}

namespace {

PaymentRule payments_unchecked(std::span<const double> costs, std::span<const double> allocation) {
  const std::size_t m = costs.size();
  PaymentRule rule;
  rule.payments.resize(m);
  double tail = 0.0;  // sum_{j > k} A_j (c_j - c_{j-1})
  for (std::size_t k = m; k-- > 0;) {
    rule.payments[k] = allocation[k] > 0.0 ? costs[k] + tail / allocation[k] : costs[k];
    if (k > 0) tail += allocation[k] * (costs[k] - costs[k - 1]);
  }
  return rule;
}

}  // namespace

PaymentRule myerson_payments(const CostSet& cost_set, std::span<const double> allocation) {
  if (allocation.size() != cost_set.size()) throw InvalidInput("allocation misaligned with cost set");
  require_monotone(allocation);
  if (allocation.back() <= 0.0) throw InvalidInput("payment undefined for zero allocation");
  return payments_unchecked(cost_set.costs(), allocation);
}

PaymentRule myerson_payments(const CostSet& cost_set, const AllocationRule& rule) {
  return myerson_payments(cost_set, rule.probabilities);
}

PaymentRule myerson_payments_allowing_zero(const CostSet& cost_set, std::span<const double> allocation) {
  if (allocation.size() != cost_set.size()) throw InvalidInput("allocation misaligned with cost set");
  require_monotone(allocation);
  return payments_unchecked(cost_set.costs(), allocation);
}

double myerson_payment_at(std::span<const double> costs, std::span<const double> allocation, std::size_t k) {
  if (allocation[k] <= 0.0) return costs[k];
  double tail = 0.0;
  for (std::size_t j = costs.size() - 1; j > k; --j) tail += allocation[j] * (costs[j] - costs[j - 1]);
  return costs[k] + tail / allocation[k];
}

Offer extend(const CostSet& cost_set, std::span<const double> allocation, std::span<const double> payments,
             double query_cost) {
  if (allocation.size() != cost_set.size() || payments.size() != cost_set.size())
    throw InvalidInput("rule misaligned with cost set");
  if (!(query_cost >= 0.0) || query_cost > cost_set.cap())
    throw OutOfRange("reported cost outside [0, cap]; mechanism declines");
  const std::size_t k = cost_set.ceil_index(query_cost);
  if (k == cost_set.size()) throw OutOfRange("reported cost above every grid cost");
  return {allocation[k], payments[k], k};
}

double worst_case_variance(std::span<const double> allocation) {
  const double n = static_cast<double>(allocation.size());
  double inverse_sum = 0.0;
  for (double a : allocation) {
    if (a <= 0.0) return std::numeric_limits<double>::infinity();
    inverse_sum += 1.0 / a;
  }
  return (inverse_sum - n) / (n * n);
}

double worst_case_variance(const AllocationRule& rule, const CostSet& cost_set) {
  if (rule.probabilities.size() != cost_set.size()) throw InvalidInput("rule misaligned with cost set");
  return worst_case_variance(rule.probabilities);
}

double expected_spend(const AllocationRule& rule, const PaymentRule& payments, const CostSet& cost_set) {
  const std::size_t m = cost_set.size();
  if (rule.probabilities.size() != m || payments.payments.size() != m)
    throw InvalidInput("rule and payments misaligned with cost set");
  const auto psi = virtual_costs(cost_set);
  double paid = 0.0;
  double virtual_spend = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    paid += rule.probabilities[k] * payments.payments[k];
    virtual_spend += rule.probabilities[k] * psi[k];
  }
  const double scale = std::max({std::abs(paid), std::abs(virtual_spend), 1e-300});
  if (std::abs(paid - virtual_spend) > 1e-9 * scale)
    throw SolverError("expected payment differs from expected virtual cost");
  return paid / static_cast<double>(m);
}

}  // namespace surveymech
