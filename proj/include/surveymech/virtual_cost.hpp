#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace surveymech {

/// Sorted multiset of private costs, all bounded by the cap.
///
/// Every solver in the library works over this discrete support. Equal costs
/// are kept (no deduplication) and addressed by index.
class CostSet {
 public:
  /// Takes costs already in non-decreasing order. The cap defaults to the
  /// largest cost. Throws InvalidInput on empty, unsorted, negative,
  /// non-finite input or a cost above the cap.
  explicit CostSet(std::vector<double> sorted_costs);
  CostSet(std::vector<double> sorted_costs, double cap);

  /// Sorts first, then validates as above.
  static CostSet from_unsorted(std::vector<double> costs);
  static CostSet from_unsorted(std::vector<double> costs, double cap);

  [[nodiscard]] std::span<const double> costs() const noexcept { return costs_; }
  [[nodiscard]] double operator[](std::size_t i) const noexcept { return costs_[i]; }
  [[nodiscard]] std::size_t size() const noexcept { return costs_.size(); }
  [[nodiscard]] double cap() const noexcept { return cap_; }
  [[nodiscard]] double max_cost() const noexcept { return costs_.back(); }

  /// Index of the least cost >= query, or size() if every cost is below it.
  [[nodiscard]] std::size_t ceil_index(double query) const noexcept;

 private:
  std::vector<double> costs_;
  double cap_;
};

/// A maximal run [begin, end) of equal regularized virtual cost.
struct PhiBlock {
  std::size_t begin;
  std::size_t end;
  double phi;      ///< block average of psi
  double psi_sum;  ///< sum of psi over the block, taken from prefix sums

  [[nodiscard]] std::size_t count() const noexcept { return end - begin; }
};

/// Virtual costs psi and their ironed counterpart phi, aligned with a CostSet.
struct VirtualCostProfile {
  std::vector<double> psi;
  std::vector<double> phi;
  std::vector<PhiBlock> blocks;
};

/// Virtual costs of the uniform distribution over the multiset:
/// psi_1 = c_1 and psi_i = i*c_i - (i-1)*c_{i-1}.
std::vector<double> virtual_costs(const CostSet& cost_set);

/// Left-to-right prefix sums, prefix[0] = 0. All block averages in the library
/// are formed as (prefix[r] - prefix[l]) / (r - l) from this array.
std::vector<double> prefix_sums(std::span<const double> values);

/// Ironing by pooling adjacent violators on the cumulative sums of psi.
/// Returns the maximal blocks of equal phi, with strictly increasing phi.
std::vector<PhiBlock> regularize_blocks(std::span<const double> psi);

/// Regularized virtual costs, one per entry of psi.
std::vector<double> regularize(std::span<const double> psi);

VirtualCostProfile make_profile(const CostSet& cost_set);

}  // namespace surveymech
