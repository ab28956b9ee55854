#pragma once

#include <span>

namespace surveymech {

/// Asymmetric empirical-Bernstein interval. The bias from ignored data only
/// pushes the upper endpoint, since ignored values are non-negative.
struct CIOutput {
  double lower = 0.0;
  double upper = 0.0;
  double sample_mean = 0.0;
  double sample_sigma = 0.0;
  double bias_term = 0.0;
  double gamma = 0.0;

  [[nodiscard]] double length() const noexcept { return upper - lower; }
  [[nodiscard]] bool covers(double value) const noexcept { return lower <= value && value <= upper; }
};

/// Arithmetic mean of the reweighted values. Throws InvalidInput when empty.
double horvitz_thompson(std::span<const double> y);

/// Unbiased (n - 1) sample variance. Throws InvalidInput below two values.
double sample_variance(std::span<const double> y);

/// [mean - r, mean + bias + r] with r = alpha_gamma(gamma) * sigma / sqrt(n).
/// With clip set the endpoints are clamped to [0, 1] after construction.
CIOutput bernstein_interval(double mean, double sigma, std::size_t n, double gamma, double bias_term,
                            bool clip = false);

}  // namespace surveymech
