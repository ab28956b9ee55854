#include "surveymech/virtual_cost.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "surveymech/errors.hpp"

namespace surveymech {

namespace {

void validate(const std::vector<double>& costs, double cap) {
  if (costs.empty()) throw InvalidInput("cost set is empty");
  if (!std::isfinite(cap) || cap < 0.0) throw InvalidInput("cost cap must be finite and non-negative");
  for (std::size_t i = 0; i < costs.size(); ++i) {
    const double c = costs[i];
    if (!std::isfinite(c)) throw InvalidInput("cost " + std::to_string(i) + " is not finite");
    if (c < 0.0) throw InvalidInput("cost " + std::to_string(i) + " is negative");
    if (c > cap) throw InvalidInput("cost " + std::to_string(i) + " exceeds the cap");
    if (i > 0 && c < costs[i - 1]) throw InvalidInput("costs are not sorted");
  }
}

double max_or_zero(const std::vector<double>& costs) {
  return costs.empty() ? 0.0 : *std::max_element(costs.begin(), costs.end());
}

}  // namespace

CostSet::CostSet(std::vector<double> sorted_costs)
    : CostSet(sorted_costs, max_or_zero(sorted_costs)) {}

CostSet::CostSet(std::vector<double> sorted_costs, double cap)
    : costs_(std::move(sorted_costs)), cap_(cap) {
  validate(costs_, cap_);
}

CostSet CostSet::from_unsorted(std::vector<double> costs) {
  std::sort(costs.begin(), costs.end());
  return CostSet(std::move(costs));
}

CostSet CostSet::from_unsorted(std::vector<double> costs, double cap) {
  std::sort(costs.begin(), costs.end());
  return CostSet(std::move(costs), cap);
}

std::size_t CostSet::ceil_index(double query) const noexcept {
  return static_cast<std::size_t>(std::lower_bound(costs_.begin(), costs_.end(), query) - costs_.begin());
}

std::vector<double> virtual_costs(const CostSet& cost_set) {
  const auto c = cost_set.costs();
  std::vector<double> psi(c.size());
  psi[0] = c[0];
  for (std::size_t i = 1; i < c.size(); ++i) {
    const double rank = static_cast<double>(i + 1);
    psi[i] = rank * c[i] - (rank - 1.0) * c[i - 1];
  }
  return psi;
}

std::vector<double> prefix_sums(std::span<const double> values) {
  std::vector<double> prefix(values.size() + 1, 0.0);
  for (std::size_t i = 0; i < values.size(); ++i) prefix[i + 1] = prefix[i] + values[i];
  return prefix;
}

std::vector<PhiBlock> regularize_blocks(std::span<const double> psi) {
  if (psi.empty()) throw InvalidInput("virtual cost vector is empty");
  const auto prefix = prefix_sums(psi);
  auto block_of = [&](std::size_t l, std::size_t r) {
    const double sum = prefix[r] - prefix[l];
    return PhiBlock{l, r, sum / static_cast<double>(r - l), sum};
  };

  std::vector<PhiBlock> stack;
  stack.reserve(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) {
    stack.push_back(block_of(i, i + 1));
    // Merging on ties keeps blocks maximal and the block values strictly increasing.
    while (stack.size() >= 2 && stack[stack.size() - 2].phi >= stack.back().phi) {
      const std::size_t l = stack[stack.size() - 2].begin;
      const std::size_t r = stack.back().end;
      stack.pop_back();
      stack.back() = block_of(l, r);
    }
  }
  return stack;
}

std::vector<double> regularize(std::span<const double> psi) {
  std::vector<double> phi(psi.size());
  for (const auto& b : regularize_blocks(psi)) std::fill(phi.begin() + b.begin, phi.begin() + b.end, b.phi);
  return phi;
}

VirtualCostProfile make_profile(const CostSet& cost_set) {
  VirtualCostProfile profile;
  profile.psi = virtual_costs(cost_set);
  profile.blocks = regularize_blocks(profile.psi);
  profile.phi.resize(profile.psi.size());
  for (const auto& b : profile.blocks)
    std::fill(profile.phi.begin() + b.begin, profile.phi.begin() + b.end, b.phi);
  return profile;
}

}  // namespace surveymech
