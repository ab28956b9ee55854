#include "surveymech/estimation.hpp"

#include <algorithm>
#include <cmath>

#include "surveymech/ci_solver.hpp"
#include "surveymech/errors.hpp"

namespace surveymech {

double horvitz_thompson(std::span<const double> y) {
  if (y.empty()) throw InvalidInput("estimator needs at least one value");
  double sum = 0.0;
  for (double v : y) sum += v;
  return sum / static_cast<double>(y.size());
}

double sample_variance(std::span<const double> y) {
  if (y.size() < 2) throw InvalidInput("sample variance needs at least two values");
  const double mean = horvitz_thompson(y);
  double sum = 0.0;
  for (double v : y) sum += (v - mean) * (v - mean);
  return sum / static_cast<double>(y.size() - 1);
}

CIOutput bernstein_interval(double mean, double sigma, std::size_t n, double gamma, double bias_term, bool clip) {
  if (n < 2) throw InvalidInput("interval needs n >= 2");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidInput("sigma must be non-negative and finite");
  if (!(bias_term >= 0.0 && bias_term <= 1.0)) throw InvalidInput("bias term must lie in [0, 1]");
  const double radius = alpha_gamma(gamma) * sigma / std::sqrt(static_cast<double>(n));

  CIOutput out;
  out.sample_mean = mean;
  out.sample_sigma = sigma;
  out.bias_term = bias_term;
  out.gamma = gamma;
  out.lower = mean - radius;
  out.upper = mean + bias_term + radius;
  if (clip) {
    out.lower = std::clamp(out.lower, 0.0, 1.0);
    out.upper = std::clamp(out.upper, out.lower, 1.0);
  }
  return out;
}

}  // namespace surveymech
