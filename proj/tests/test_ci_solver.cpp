#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "surveymech/audit.hpp"
#include "surveymech/ci_solver.hpp"
#include "surveymech/errors.hpp"
#include "surveymech/oracle.hpp"

using namespace surveymech;

namespace {

double total_psi(const CostSet& set) {
  const auto psi = virtual_costs(set);
  return std::accumulate(psi.begin(), psi.end(), 0.0);
}

}  // namespace

TEST_CASE("alpha_gamma values") {
  CHECK(alpha_gamma(0.05) == doctest::Approx(std::sqrt(2.0 * std::log(80.0)) + 7.0 * std::log(80.0) / 3.0));
  CHECK(alpha_gamma(0.05) == doctest::Approx(13.185).epsilon(1e-4));
  CHECK(alpha_gamma(4.0 / std::exp(2.0)) == doctest::Approx(2.0 + 14.0 / 3.0));
  CHECK(alpha_gamma(0.9) == doctest::Approx(5.208).epsilon(1e-3));
  CHECK_THROWS_AS(alpha_gamma(0.0), InvalidInput);
  CHECK_THROWS_AS(alpha_gamma(1.0), InvalidInput);

  const auto params = make_ci_parameters(0.05, 100);
  CHECK(params.beta == doctest::Approx(2.0 * alpha_gamma(0.05) / 10.0));
  const double lo = std::sqrt(2.0 * std::log(80.0));
  CHECK(params.alpha_gamma >= lo);
}

TEST_CASE("interval objective examples") {
  const std::vector<double> a{1.0 / 3.0, 1.0 / 12.0, 1.0 / 12.0};
  CHECK(ci_objective(a, std::vector<double>(3, 0.0), 1.0, 3.0) == doctest::Approx(9.0));
  CHECK(ci_objective(std::vector<double>(4, 0.5), std::vector<double>(4, 1.0), 2.0, 4.0) == doctest::Approx(1.0));
  CHECK(ci_objective(std::vector<double>(4, 1.0), std::vector<double>(4, 0.0), 0.7, 4.0) == doctest::Approx(0.49));
}

TEST_CASE("degenerate budgets") {
  const CostSet set({1.0, 2.0, 5.0});
  const auto none = solve_ci(set, 0.0, 0.3);
  CHECK(none.ignore.total_mass == doctest::Approx(3.0));
  CHECK(none.objective == doctest::Approx(1.0));

  const auto rich = solve_ci(set, 100.0, 0.5);
  // With A = 1 the objective is beta^2 (n - M)/n + M^2/n^2, minimised at M = beta^2 n / 2.
  CHECK(rich.ignore.total_mass == doctest::Approx(0.375));
  CHECK(rich.objective == doctest::Approx(0.25 * 2.625 / 3.0 + 0.375 * 0.375 / 9.0));
  for (double a : rich.allocation.probabilities) CHECK(a == 1.0);

  // beta above one: ignoring everything (objective 1) beats buying everything (beta^2).
  const auto wide = solve_ci(set, 100.0, 1.5);
  CHECK(wide.objective == doctest::Approx(1.0));

  CHECK_THROWS_AS(solve_ci(set, -1.0, 0.5), InvalidInput);
  CHECK_THROWS_AS(solve_ci(set, 1.0, 0.0), InvalidInput);
}

TEST_CASE("zero budget keeps free data") {
  const CostSet set({0.0, 0.0, 3.0, 4.0});
  const auto sol = solve_ci(set, 0.0, 0.2);
  CHECK(sol.ignore.u_values[0] == 0.0);
  CHECK(sol.ignore.u_values[1] == 0.0);
  CHECK(sol.ignore.total_mass == doctest::Approx(2.0));
}

TEST_CASE("g derivative examples") {
  const CostSet three({1.0, 10.0, 11.0});
  CHECK(g_derivative(three, 3.0, 1.0, 0.0) == doctest::Approx(-8.0));
  // Saturated retained mass: the budget covers everything left.
  CHECK(g_derivative(three, 100.0, 1.0, 0.0) == doctest::Approx(-1.0 / 3.0));
  CHECK_THROWS_AS(g_derivative(three, 3.0, 1.0, 3.0), InvalidInput);
  CHECK_THROWS_AS(g_derivative(three, 0.0, 1.0, 0.5), SolverError);
}

TEST_CASE("derivative matches finite differences") {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const auto costs = random_costs(rng, 2 + rng.below(10), 10.0);
    const CostSet set(costs, 10.0);
    const double budget = rng.uniform(0.05, 1.0) * std::max(total_psi(set), 1e-3);
    const IgnoreMassProblem problem(set, budget, 0.8);
    const double mass = rng.uniform(0.0, problem.size() - 1e-3);
    const double h = 1e-7;
    const double numeric = (problem.variance_term(mass + h) - problem.variance_term(mass)) / h;
    const double analytic = problem.variance_term_derivative(mass);
    REQUIRE(numeric == doctest::Approx(analytic).epsilon(1e-3).scale(std::abs(analytic) + 1.0));
  }
}

TEST_CASE("solutions have the threshold structure and spend the budget") {
  Rng rng(32);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 1 + rng.below(40);
    const auto costs = random_costs(rng, m, 20.0);
    const CostSet set(costs, 20.0);
    const double budget = rng.uniform(0.0, 1.2) * total_psi(set);
    const double beta = rng.uniform(0.05, 1.5);
    const auto sol = solve_ci(set, budget, beta);
    const auto profile = make_profile(set);
    const auto& u = sol.ignore.u_values;
    const auto& a = sol.allocation.probabilities;
    double spend = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      REQUIRE(u[i] >= 0.0);
      REQUIRE(u[i] <= 1.0);
      if (profile.phi[i] < sol.ignore.threshold_phi) REQUIRE(u[i] == 0.0);
      if (profile.phi[i] > sol.ignore.threshold_phi) REQUIRE(u[i] == 1.0);
      if (i > 0) {
        REQUIRE(u[i - 1] <= u[i]);
        REQUIRE((1.0 - u[i]) * a[i] <= (1.0 - u[i - 1]) * a[i - 1] + 1e-15);
      }
      spend += (1.0 - u[i]) * a[i] * profile.psi[i];
    }
    REQUIRE(spend <= budget + 1e-9 * std::max(1.0, budget));
    REQUIRE(std::accumulate(u.begin(), u.end(), 0.0) == doctest::Approx(sol.ignore.total_mass));
    REQUIRE(sol.objective == doctest::Approx(ci_objective(a, u, beta, static_cast<double>(m))));
  }
}

TEST_CASE("length objective sits between the square root and sqrt(2) times it") {
  Rng rng(33);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 1 + rng.below(30);
    const CostSet set(random_costs(rng, m, 5.0), 5.0);
    const double beta = rng.uniform(0.05, 2.0);
    const auto sol = solve_ci(set, rng.uniform(0.0, 1.0) * total_psi(set), beta);
    const double n = static_cast<double>(m);
    const double length = ci_length_objective(sol.allocation.probabilities, sol.ignore.u_values, beta, n);
    REQUIRE(std::sqrt(sol.objective) <= length * (1.0 + 1e-12));
    REQUIRE(length <= std::sqrt(2.0) * std::sqrt(sol.objective) * (1.0 + 1e-12));
  }
}

TEST_CASE("objective is convex in the ignore mass") {
  Rng rng(34);
  for (int t = 0; t < 100; ++t) {
    const CostSet set(random_costs(rng, 2 + rng.below(30), 10.0), 10.0);
    const IgnoreMassProblem problem(set, rng.uniform(0.01, 1.0) * std::max(total_psi(set), 1e-3),
                                    rng.uniform(0.05, 2.0));
    std::vector<double> g(101);
    double scale = 1.0;
    for (std::size_t j = 0; j <= 100; ++j) {
      g[j] = problem.objective(problem.size() * static_cast<double>(j) / 100.0);
      scale = std::max(scale, std::abs(g[j]));
    }
    for (std::size_t j = 1; j < 100; ++j) REQUIRE(g[j - 1] - 2.0 * g[j] + g[j + 1] >= -1e-6 * scale);
    const double chosen = problem.objective(problem.optimal_mass());
    REQUIRE(chosen <= *std::min_element(g.begin(), g.end()) + 1e-9 * scale);
  }
}

TEST_CASE("ignore mass grows when the set gains a point and the budget halves") {
  Rng rng(35);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 2 + rng.below(30);
    const auto big = random_costs(rng, m, 30.0);
    const std::size_t k = rng.below(m);
    auto small = big;
    small.erase(small.begin() + static_cast<std::ptrdiff_t>(k));
    const CostSet s2(big, 30.0);
    const double budget = rng.uniform(0.0, 1.2) * total_psi(s2);
    const double beta = rng.uniform(0.05, 1.5);
    const double m1 = solve_ci(CostSet(small, 30.0), budget, beta).ignore.total_mass;
    const double m2 = solve_ci(s2, budget / 2.0, beta).ignore.total_mass;
    REQUIRE(m1 <= m2 + 1e-9 * static_cast<double>(m));
  }
}

TEST_CASE("four-point example against exhaustive search") {
  const std::vector<double> costs{1.0, 1.0, 100.0, 100.0};
  const double beta = make_ci_parameters(0.1, 4).beta;
  const auto sol = solve_ci(CostSet(costs), 2.0, beta);
  const auto grid = oracle::grid_search_ci(costs, 2.0, beta);
  CHECK(std::abs(sol.objective - grid.objective) <= 1e-3);

  // A smaller beta where buying the cheap half matters.
  const auto sol2 = solve_ci(CostSet(costs), 2.0, 0.5);
  const auto grid2 = oracle::grid_search_ci(costs, 2.0, 0.5);
  CHECK(sol2.objective <= grid2.objective + 1e-9);
  CHECK(grid2.objective - sol2.objective <= 0.05);
}

TEST_CASE("single point instance") {
  // Retaining mass 1 - M at cost 4 buys A = min{1, B / (4 (1 - M))}. Once A < 1
  // the objective is a (1 - M)^2 + M^2 with a = 4 beta^2 / B, minimised at a / (a + 1).
  const CostSet one({4.0});
  const auto tight = solve_ci(one, 0.1, 0.9);
  const double a = 4.0 * 0.81 / 0.1;
  CHECK(tight.objective == doctest::Approx(a / (a + 1.0)).epsilon(1e-9));
  CHECK(tight.ignore.total_mass == doctest::Approx(a / (a + 1.0)).epsilon(1e-9));
  CHECK(tight.objective < 1.0);

  // Enough budget that the retained part is fully bought: beta^2 (1 - M) + M^2.
  const auto loose = solve_ci(one, 4.0, 0.5);
  CHECK(loose.ignore.total_mass == doctest::Approx(0.125));
  CHECK(loose.objective == doctest::Approx(0.25 * 0.875 + 0.125 * 0.125));
}
