#pragma once

// Brute-force references for the closed-form solvers. Nothing here calls into
// the main library: costs come in as plain sorted spans and virtual costs are
// recomputed locally.

#include <cstddef>
#include <span>
#include <vector>

namespace surveymech::oracle {

/// psi_i = i*c_i - (i-1)*c_{i-1} on sorted costs, evaluated directly.
std::vector<double> virtual_costs_direct(std::span<const double> sorted_costs);

/// Literal O(m^2) ironing: psi'_i = min_{k >= i} Avg(i, k), phi_i = max_{j <= i} psi'_j.
/// Ties in the inner minimum resolve to the largest k.
std::vector<double> regularize_naive(std::span<const double> psi);

struct GridSearchResult {
  bool feasible = false;
  std::vector<double> allocation;
  double objective = 0.0;
  std::size_t nodes = 0;  ///< level evaluations spent in the exact search
};

/// Exact minimum of sum 1/A_k over non-increasing A on the lattice {step, 2 step, ..., 1}
/// subject to sum A_k psi_k <= budget. Branch and bound with a Lagrangian dynamic
/// programming bound, so the result is the true lattice optimum.
/// Requires m <= 6 and step in {1e-2, 1e-3}; throws otherwise.
GridSearchResult grid_search_unbiased(std::span<const double> sorted_costs, double budget, double step);

struct GridSteps {
  double ignore_step = 0.1;
  double allocation_step = 1e-2;
};

struct GridSearchCIResult {
  bool feasible = false;
  std::vector<double> allocation;
  std::vector<double> ignore;
  double objective = 0.0;
};

/// Exact minimum of beta^2 (1/n) sum (1-U)/A + (sum U / n)^2 over U on the
/// {0, ignore_step, ..., 1} lattice and A on the allocation lattice, with
/// (1-U)A non-increasing and sum (1-U) A psi <= budget. Requires m <= 4.
GridSearchCIResult grid_search_ci(std::span<const double> sorted_costs, double budget, double beta,
                                  GridSteps steps = {});

}  // namespace surveymech::oracle
