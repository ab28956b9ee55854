#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "surveymech/random.hpp"

namespace surveymech {

struct AuditOptions {
  std::size_t instances = 1000;
  std::uint64_t seed = 1;
};

struct PropertyResult {
  std::string suite;
  std::string property;
  bool passed = false;
  std::size_t checked = 0;
  double worst = 0.0;  ///< largest observed violation, in the property's own units
  std::string detail;
};

/// ironing, adjacency, truthfulness, oracle, convexity
const std::vector<std::string>& audit_suite_names();

/// Throws ConfigError for an unknown suite name.
std::vector<PropertyResult> run_audit_suite(const std::string& name, const AuditOptions& options);

/// Random sorted costs in [0, cap]. Mixes continuous draws, small-integer draws
/// (many ties) and clustered draws so ironing actually triggers.
std::vector<double> random_costs(Rng& rng, std::size_t m, double cap);

}  // namespace surveymech
