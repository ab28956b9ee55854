#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "surveymech/allocation.hpp"
#include "surveymech/virtual_cost.hpp"

namespace surveymech {

/// Probability of discarding a data point outright, aligned with a CostSet.
///
/// Threshold form: U = 0 below threshold_phi, U = boundary_fraction on the block
/// at threshold_phi, U = 1 above. threshold_phi is +inf when nothing is ignored.
struct IgnoreRule {
  std::vector<double> u_values;
  double threshold_phi = 0.0;
  double boundary_fraction = 1.0;
  double total_mass = 0.0;
};

struct CIParameters {
  double gamma = 0.0;
  double alpha_gamma = 0.0;
  double beta = 0.0;  ///< 2 * alpha_gamma / sqrt(n)
};

/// Conservative empirical-Bernstein constant sqrt(2 ln(4/g)) + 7 ln(4/g) / 3.
double alpha_gamma(double gamma);

CIParameters make_ci_parameters(double gamma, std::size_t n);

struct CISolution {
  AllocationRule allocation;
  IgnoreRule ignore;
  double objective = 0.0;
};

/// beta^2 (1/n) sum (1 - U_k) / A_k + (sum U_k / n)^2, the squared-length surrogate at z == 1.
double ci_objective(std::span<const double> allocation, std::span<const double> ignore, double beta, double n);
double ci_objective(const AllocationRule& rule, const IgnoreRule& ignore, double beta, std::size_t n);

/// beta * sqrt((1/n) sum (1 - U_k) / A_k) + sum U_k / n, the length objective at z == 1.
double ci_length_objective(std::span<const double> allocation, std::span<const double> ignore, double beta,
                           double n);

/// The ignore-mass parametrisation of the interval problem over one cost set.
///
/// For a total ignore mass M in [0, n], the ignored mass is taken from the top
/// phi blocks, spread uniformly over the block it cuts into, and the allocation
/// is recalibrated on what remains. g(M) is the variance term at that optimum.
class IgnoreMassProblem {
 public:
  IgnoreMassProblem(const CostSet& cost_set, double budget, double beta);

  [[nodiscard]] double size() const noexcept { return n_; }
  [[nodiscard]] const VirtualCostProfile& profile() const noexcept { return profile_; }

  /// Variance term g(M); +inf when the budget cannot buy every remaining point.
  [[nodiscard]] double variance_term(double mass) const;
  /// g(M) + (M / n)^2.
  [[nodiscard]] double objective(double mass) const;
  /// Right derivative of g at M, for 0 <= M < n. -inf when infeasible.
  [[nodiscard]] double variance_term_derivative(double mass) const;

  /// Allocation and ignore rules realising mass M.
  [[nodiscard]] CISolution rule_at(double mass) const;

  /// Minimiser of the objective over M in [0, n].
  [[nodiscard]] double optimal_mass() const;

 private:
  struct Cut {
    std::ptrdiff_t boundary;  ///< block being partially ignored; -1 when all ignored
    double fraction;          ///< ignored fraction of that block, in [0, 1)
  };
  struct Multiplier {
    double lambda;
    bool saturated;
    bool feasible;
  };

  [[nodiscard]] Cut locate(double mass) const;
  [[nodiscard]] Multiplier multiplier(const Cut& cut) const;
  [[nodiscard]] std::vector<double> block_weights(const Cut& cut) const;

  double n_;
  double budget_;
  double beta_;
  VirtualCostProfile profile_;
  std::vector<double> saturated_prefix_;  // sum of psi_sum over blocks < b
  std::vector<double> slope_prefix_;      // sum of psi_sum / sqrt(phi) over blocks < b
  std::vector<double> top_mass_;          // number of points in blocks >= b
};

/// Joint (A, U) minimising ci_objective subject to sum (1 - U_k) A_k psi_k <= budget.
/// The allocation keeps the form min{1, lambda / sqrt(phi)} on the retained mass.
CISolution solve_ci(const CostSet& cost_set, double budget, double beta);

/// Right derivative of the variance term g at ignore mass M: -2 beta^2 / (n A_M(c_r))
/// while the retained mass is budget-bound, -beta^2 / n once it is fully bought.
double g_derivative(const CostSet& cost_set, double budget, double beta, double mass);

}  // namespace surveymech
