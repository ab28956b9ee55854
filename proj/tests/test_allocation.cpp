#include <doctest.h>

#include <numeric>
#include <vector>

#include "surveymech/allocation.hpp"
#include "surveymech/audit.hpp"
#include "surveymech/errors.hpp"
#include "surveymech/oracle.hpp"

using namespace surveymech;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

// P_k straight from the definition, one sum per index.
std::vector<double> payments_by_definition(const std::vector<double>& c, const std::vector<double>& a) {
  std::vector<double> p(c.size());
  for (std::size_t k = 0; k < c.size(); ++k) {
    double tail = 0.0;
    for (std::size_t j = k + 1; j < c.size(); ++j) tail += a[j] * (c[j] - c[j - 1]);
    p[k] = c[k] + tail / a[k];
  }
  return p;
}

}  // namespace

TEST_CASE("saturated and binding rules") {
  const auto flat = solve_unbiased(CostSet({1.0, 1.0, 1.0, 1.0}), 4.0);
  CHECK(flat.saturated);
  CHECK(flat.probabilities == std::vector<double>{1.0, 1.0, 1.0, 1.0});

  const CostSet three({1.0, 10.0, 11.0});
  const auto rule = solve_unbiased(three, 3.0);
  CHECK_FALSE(rule.saturated);
  CHECK(rule.lambda == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(rule.probabilities[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(rule.probabilities[1] == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
  CHECK(rule.probabilities[2] == doctest::Approx(1.0 / 12.0).epsilon(1e-12));

  const auto full = solve_unbiased(three, 33.0);
  CHECK(full.saturated);
  CHECK(full.probabilities == std::vector<double>{1.0, 1.0, 1.0});
}

TEST_CASE("solver input errors") {
  const CostSet set({1.0, 2.0});
  CHECK_THROWS_AS(solve_unbiased(set, 0.0), InvalidInput);
  CHECK_THROWS_AS(solve_unbiased(set, -1.0), InvalidInput);
  CHECK_THROWS_AS(solve_unbiased(set, std::numeric_limits<double>::quiet_NaN()), InvalidInput);
}

TEST_CASE("payment examples") {
  const CostSet two({1.0, 2.0});
  CHECK(myerson_payments(two, std::vector<double>{1.0, 0.5}).payments == std::vector<double>{1.5, 2.0});

  const CostSet spread({0.5, 2.0, 3.0, 7.0});
  for (double p : myerson_payments(spread, std::vector<double>(4, 0.3)).payments) CHECK(p == doctest::Approx(7.0));

  const CostSet three({1.0, 10.0, 11.0});
  const auto rule = solve_unbiased(three, 3.0);
  const auto pay = myerson_payments(three, rule);
  CHECK(pay.payments[0] == doctest::Approx(3.5));
  CHECK(pay.payments[1] == doctest::Approx(11.0));
  CHECK(pay.payments[2] == doctest::Approx(11.0));
  CHECK(expected_spend(rule, pay, three) == doctest::Approx(1.0));

  CHECK_THROWS_AS(myerson_payments(two, std::vector<double>{1.0, 0.0}), InvalidInput);
  CHECK_THROWS_AS(myerson_payments(two, std::vector<double>{0.5, 1.0}), InvalidInput);
  CHECK_THROWS_AS(myerson_payments(two, std::vector<double>{1.0}), InvalidInput);
}

TEST_CASE("expected spend examples") {
  const CostSet ones({1.0, 1.0, 1.0, 1.0});
  const auto rule = solve_unbiased(ones, 4.0);
  CHECK(expected_spend(rule, myerson_payments(ones, rule), ones) == doctest::Approx(1.0));

  const CostSet spread({0.5, 2.0, 3.0, 7.0});
  AllocationRule constant{std::vector<double>(4, 0.25), 0.0, false};
  CHECK(expected_spend(constant, myerson_payments(spread, constant), spread) == doctest::Approx(0.25 * 7.0));
  CHECK_THROWS_AS(expected_spend(constant, PaymentRule{{1.0}}, spread), InvalidInput);
}

TEST_CASE("extension to arbitrary costs") {
  const CostSet grid({1.0, 10.0});
  const std::vector<double> a{1.0, 0.2};
  const auto p = myerson_payments(grid, a).payments;
  CHECK(p[0] == doctest::Approx(2.8));
  const Offer at_one = extend(grid, a, p, 1.0);
  CHECK(at_one.probability == 1.0);
  CHECK(at_one.payment == doctest::Approx(2.8));
  const Offer mid = extend(grid, a, p, 5.0);
  CHECK(mid.probability == doctest::Approx(0.2));
  CHECK(mid.payment == doctest::Approx(10.0));
  CHECK_THROWS_AS(extend(grid, a, p, 10.5), OutOfRange);
  CHECK_THROWS_AS(extend(grid, a, p, -0.1), OutOfRange);
}

TEST_CASE("worst-case variance examples") {
  CHECK(worst_case_variance(std::vector<double>(7, 1.0)) == 0.0);
  CHECK(worst_case_variance(std::vector<double>(10, 0.5)) == doctest::Approx(0.1));
  CHECK(worst_case_variance(std::vector<double>{1.0 / 3.0, 1.0 / 12.0, 1.0 / 12.0}) == doctest::Approx(8.0 / 3.0));
  CHECK(std::isinf(worst_case_variance(std::vector<double>{1.0, 0.0})));
}

TEST_CASE("random rules: monotone, calibrated, payments match the definition") {
  Rng rng(21);
  for (int t = 0; t < 2000; ++t) {
    const std::size_t m = 1 + rng.below(50);
    const double cap = rng.uniform(0.5, 50.0);
    const auto costs = random_costs(rng, m, cap);
    const CostSet set(costs, cap);
    const auto psi = virtual_costs(set);
    const double total = std::accumulate(psi.begin(), psi.end(), 0.0);
    if (total <= 0.0) continue;
    const double budget = rng.uniform(0.01, 1.3) * total;
    const auto rule = solve_unbiased(set, budget);
    REQUIRE_NOTHROW(require_monotone(rule.probabilities));
    for (double a : rule.probabilities) REQUIRE(a > 0.0);
    const double spend = dot(rule.probabilities, psi);
    if (rule.saturated) REQUIRE(total <= budget);
    else REQUIRE(std::abs(spend - budget) <= std::max(1e-9 * budget, 1e-12));

    const auto pay = myerson_payments(set, rule).payments;
    const auto reference = payments_by_definition(costs, rule.probabilities);
    for (std::size_t k = 0; k < m; ++k) {
      REQUIRE(pay[k] == doctest::Approx(reference[k]).epsilon(1e-12));
      REQUIRE(pay[k] >= costs[k]);
      REQUIRE(myerson_payment_at(costs, rule.probabilities, k) == doctest::Approx(pay[k]).epsilon(1e-12));
    }
    REQUIRE(dot(rule.probabilities, pay) == doctest::Approx(spend).epsilon(1e-9));
  }
}

TEST_CASE("closed form matches the exact lattice search") {
  Rng rng(22);
  for (int t = 0; t < 40; ++t) {
    const std::size_t m = 1 + rng.below(5);
    const auto costs = random_costs(rng, m, 10.0);
    const CostSet set(costs, 10.0);
    const auto psi = virtual_costs(set);
    const double total = std::accumulate(psi.begin(), psi.end(), 0.0);
    if (total <= 0.0) continue;
    const double budget = rng.uniform(0.1, 1.1) * total;
    const auto rule = solve_unbiased(set, budget);
    double closed = 0.0;
    for (double a : rule.probabilities) closed += 1.0 / a;
    const auto grid = oracle::grid_search_unbiased(costs, budget, 1e-2);
    REQUIRE(grid.feasible);
    REQUIRE(closed <= grid.objective * (1.0 + 1e-9));
  }
}

TEST_CASE("solved rules on adjacent sets: the quarter-budget side") {
  Rng rng(23);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t m = 2 + rng.below(30);
    const auto big = random_costs(rng, m, 40.0);
    const std::size_t k = rng.below(m);
    auto small = big;
    small.erase(small.begin() + static_cast<std::ptrdiff_t>(k));
    const CostSet s1(small, 40.0);
    const CostSet s2(big, 40.0);
    const auto psi = virtual_costs(s2);
    const double total = std::accumulate(psi.begin(), psi.end(), 0.0);
    if (total <= 0.0) continue;
    const double budget = rng.uniform(0.05, 1.5) * total;
    const auto a1 = solve_unbiased(s1, budget / 2.0).probabilities;
    const auto a3 = solve_unbiased(s2, budget / 4.0).probabilities;
    for (std::size_t i = k + 1; i < m; ++i) REQUIRE(a1[i - 1] >= a3[i] - 1e-9);
  }
}

TEST_CASE("solved rules on adjacent sets: the full-budget side has counterexamples") {
  // T2 = {14.2, 87.6}, T1 = {87.6}. With B = 100 the half-budget rule on T1 buys
  // the shared point with probability 50/87.6 = 0.571, more than the full-budget
  // rule on T2, which spends 14.2 on the cheap point first and reaches 85.8/160.9 = 0.533.
  const CostSet s1({87.6}, 87.6);
  const CostSet s2({14.2, 87.6}, 87.6);
  const double a1 = solve_unbiased(s1, 50.0).probabilities[0];
  const double a2 = solve_unbiased(s2, 100.0).probabilities[1];
  CHECK(a1 == doctest::Approx(50.0 / 87.6));
  CHECK(a2 == doctest::Approx((100.0 - 14.2) / (2.0 * 87.6 - 14.2)));
  CHECK(a1 > a2);
  CHECK(a1 <= std::sqrt(2.0) * a2);
}
