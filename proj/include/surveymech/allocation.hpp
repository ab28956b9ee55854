#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "surveymech/virtual_cost.hpp"

namespace surveymech {

/// Purchase probabilities aligned with a CostSet.
struct AllocationRule {
  std::vector<double> probabilities;
  double lambda = 0.0;     ///< calibration multiplier in A = min{1, lambda / sqrt(phi)}
  bool saturated = false;  ///< budget covers full collection; every probability is 1
};

/// Prices paid on a successful purchase, aligned with a CostSet.
struct PaymentRule {
  std::vector<double> payments;
};

/// Multiplier that makes sum_b weight_b * psi_sum_b * min{1, lambda / sqrt(phi_b)}
/// hit the budget. Solved exactly on the piecewise-linear spend curve.
struct Calibration {
  double lambda = 0.0;
  bool saturated = false;
};

Calibration calibrate_multiplier(std::span<const PhiBlock> blocks, std::span<const double> block_weights,
                                 double budget);

/// Approximately optimal unbiased allocation: A_k = min{1, lambda / sqrt(phi_k)} with
/// sum_k A_k psi_k = budget, or the all-ones rule when sum psi <= budget.
AllocationRule solve_unbiased(const CostSet& cost_set, double budget);

/// Minimal truthful, individually rational payments for a monotone allocation:
/// P_k = c_k + (1 / A_k) sum_{j > k} A_j (c_j - c_{j-1}). Rejects zero allocations.
PaymentRule myerson_payments(const CostSet& cost_set, std::span<const double> allocation);
PaymentRule myerson_payments(const CostSet& cost_set, const AllocationRule& rule);

/// Same formula, but entries with zero allocation get P_k = c_k (they are never
/// paid). Used for rules that ignore a suffix of the costs outright.
PaymentRule myerson_payments_allowing_zero(const CostSet& cost_set, std::span<const double> allocation);

/// Payment at a single grid index, O(m - k).
double myerson_payment_at(std::span<const double> costs, std::span<const double> allocation, std::size_t k);

/// A discrete mechanism extended to every cost in [0, cap].
struct Offer {
  double probability = 0.0;
  double payment = 0.0;
  std::size_t grid_index = 0;
};

/// Offer for an arbitrary cost: the grid values at the least grid cost >= query.
/// Throws OutOfRange above the cap or above the largest grid cost.
Offer extend(const CostSet& cost_set, std::span<const double> allocation, std::span<const double> payments,
             double query_cost);

/// (1/n^2)(sum 1/A_k - n), the worst-case variance at z == 1. Infinity if any A_k == 0.
double worst_case_variance(std::span<const double> allocation);
double worst_case_variance(const AllocationRule& rule, const CostSet& cost_set);

/// (1/m) sum A_k P_k, checked against (1/m) sum A_k psi_k to 1e-9 relative.
double expected_spend(const AllocationRule& rule, const PaymentRule& payments, const CostSet& cost_set);

/// Throws InvalidInput unless the probabilities are finite, in [0, 1] and non-increasing.
void require_monotone(std::span<const double> allocation);

/// min{1, lambda / sqrt(phi)}; zero regularized cost is always bought.
inline double allocation_for(double lambda, double phi) noexcept {
  if (phi <= 0.0) return 1.0;
  const double a = lambda / std::sqrt(phi);
  return a < 1.0 ? a : 1.0;
}

}  // namespace surveymech

