#include "surveymech/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "surveymech/errors.hpp"

namespace surveymech::oracle {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kNodeLimit = 400'000'000;

void require_sorted(std::span<const double> costs) {
  if (costs.empty()) throw InvalidInput("oracle needs at least one cost");
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (!std::isfinite(costs[i]) || costs[i] < 0.0) throw InvalidInput("oracle costs must be finite and non-negative");
    if (i > 0 && costs[i] < costs[i - 1]) throw InvalidInput("oracle costs must be sorted");
  }
}

// One entry of a lattice search. The entry contributes weight / A to the
// objective and spend * A to the budget; scale * level must be non-increasing
// along the sequence.
struct Item {
  double weight;
  double spend;
  long scale;
};

struct LatticeResult {
  bool feasible = false;
  double objective = kInf;
  std::vector<int> levels;
  std::size_t nodes = 0;
};

// Exact minimiser over monotone lattice paths by branch and bound. The bound at
// a node is the Lagrangian relaxation of the remaining suffix, tabulated by DP.
class LatticeSearch {
 public:
  LatticeSearch(std::vector<Item> items, double budget, int levels, double step)
      : items_(std::move(items)), m_(items_.size()), budget_(budget), levels_(levels), step_(step),
        table_((m_ + 1) * static_cast<std::size_t>(levels + 1)), choice_(table_.size()) {
    budget_limit_ = budget_ * (1.0 + 1e-12) + 1e-15;
    min_spend_suffix_.assign(m_ + 1, 0.0);
    for (std::size_t j = m_; j-- > 0;) min_spend_suffix_[j] = min_spend_suffix_[j + 1] + items_[j].spend * step_;
  }

  LatticeResult run() {
    LatticeResult result;
    if (m_ == 0) {
      result.feasible = true;
      result.objective = 0.0;
      return result;
    }

    Relaxation at_zero = relax(0.0);
    if (!at_zero.path_exists) return result;
    if (at_zero.spend <= budget_limit_) {
      result.feasible = true;
      result.objective = at_zero.objective;
      result.levels = at_zero.levels;
      return result;
    }

    double best_dual_mu = 0.0;
    double best_dual = at_zero.dual;
    std::vector<int> incumbent_levels;
    double incumbent = kInf;
    auto record = [&](double mu, const Relaxation& r) {
      if (r.dual > best_dual) {
        best_dual = r.dual;
        best_dual_mu = mu;
      }
      if (r.spend <= budget_limit_ && r.objective < incumbent) {
        incumbent = r.objective;
        incumbent_levels = r.levels;
      }
    };

    double lo = 0.0;
    double hi = 1.0;
    Relaxation at_hi = relax(hi);
    for (int i = 0; i < 200 && at_hi.spend > budget_limit_; ++i) {
      lo = hi;
      hi *= 8.0;
      at_hi = relax(hi);
    }
    record(hi, at_hi);
    if (at_hi.spend > budget_limit_) return result;
    for (int i = 0; i < 100; ++i) {
      const double mid = 0.5 * (lo + hi);
      const Relaxation r = relax(mid);
      record(mid, r);
      if (r.spend > budget_limit_) lo = mid;
      else hi = mid;
    }

    relax(best_dual_mu);
    mu_ = best_dual_mu;
    best_value_ = incumbent * (1.0 + 1e-12);
    best_levels_.clear();
    current_.assign(m_, 0);
    nodes_ = 0;
    descend(0, levels_, 0.0, 0.0);

    result.feasible = true;
    if (best_levels_.empty()) {
      result.levels = incumbent_levels;
      result.objective = incumbent;
    } else {
      result.levels = best_levels_;
      result.objective = best_value_;
    }
    result.nodes = nodes_;
    return result;
  }

 private:
  struct Relaxation {
    bool path_exists = false;
    double dual = -kInf;
    double objective = kInf;
    double spend = kInf;
    std::vector<int> levels;
  };

  [[nodiscard]] std::size_t at(std::size_t j, int level) const {
    return j * static_cast<std::size_t>(levels_ + 1) + static_cast<std::size_t>(level);
  }

  [[nodiscard]] int next_cap(std::size_t j, int level) const {
    if (j + 1 >= m_) return levels_;
    const long cap = items_[j].scale * level / items_[j + 1].scale;
    return static_cast<int>(std::min<long>(cap, levels_));
  }

  // Fills table_ with min over monotone suffixes of sum (w / A + mu s A).
  Relaxation relax(double mu) {
    for (int l = 0; l <= levels_; ++l) table_[at(m_, l)] = 0.0;
    for (std::size_t j = m_; j-- > 0;) {
      table_[at(j, 0)] = kInf;
      choice_[at(j, 0)] = 0;
      const Item& item = items_[j];
      for (int l = 1; l <= levels_; ++l) {
        const double a = l * step_;
        const double here = item.weight / a + mu * item.spend * a + table_[at(j + 1, next_cap(j, l))];
        if (here < table_[at(j, l - 1)]) {
          table_[at(j, l)] = here;
          choice_[at(j, l)] = l;
        } else {
          table_[at(j, l)] = table_[at(j, l - 1)];
          choice_[at(j, l)] = choice_[at(j, l - 1)];
        }
      }
    }

    Relaxation r;
    if (!std::isfinite(table_[at(0, levels_)])) return r;
    r.path_exists = true;
    r.dual = table_[at(0, levels_)] - mu * budget_;
    r.objective = 0.0;
    r.spend = 0.0;
    int cap = levels_;
    for (std::size_t j = 0; j < m_; ++j) {
      const int l = choice_[at(j, cap)];
      r.levels.push_back(l);
      r.objective += items_[j].weight / (l * step_);
      r.spend += items_[j].spend * (l * step_);
      cap = next_cap(j, l);
    }
    return r;
  }

  void descend(std::size_t j, int cap, double spent, double objective) {
    if (j == m_) {
      if (objective < best_value_) {
        best_value_ = objective;
        best_levels_ = current_;
      }
      return;
    }
    const Item& item = items_[j];
    const double slack_margin = 1e-12 * std::abs(best_value_);
    int first = 1;
    int last = cap;
    if (item.spend == 0.0 && item.weight > 0.0) {
      // A free entry only gets worse and tightens later caps when lowered.
      first = cap;
    } else if (std::isfinite(best_value_)) {
      // The suffix term is smallest at the highest reachable cap, so only levels with
      // w/a + mu s a below the remaining room can survive; that set is an interval.
      const double floor_term = objective + table_[at(j + 1, next_cap(j, cap))] - mu_ * (budget_ - spent);
      const double room = best_value_ + slack_margin - floor_term;
      if (!(room > 0.0)) return;
      const double k = mu_ * item.spend;
      double a_lo = 0.0;
      double a_hi = kInf;
      if (k > 0.0) {
        const double disc = room * room - 4.0 * k * item.weight;
        if (disc < 0.0) return;
        const double root = std::sqrt(disc);
        a_lo = (room - root) / (2.0 * k);
        a_hi = (room + root) / (2.0 * k);
      } else {
        a_lo = item.weight / room;
      }
      first = std::max(first, static_cast<int>(std::floor(a_lo / step_)) - 1);
      if (a_hi / step_ < static_cast<double>(cap)) last = std::min(last, static_cast<int>(std::ceil(a_hi / step_)) + 1);
    }
    for (int l = first; l <= last; ++l) {
      if (++nodes_ > kNodeLimit) throw SolverError("lattice search exceeded its node limit");
      const double a = l * step_;
      const double new_spent = spent + item.spend * a;
      if (new_spent + min_spend_suffix_[j + 1] > budget_limit_) break;
      const double new_objective = objective + item.weight / a;
      const int sub_cap = next_cap(j, l);
      const double bound = new_objective + table_[at(j + 1, sub_cap)] - mu_ * (budget_ - new_spent);
      if (bound >= best_value_ + slack_margin) continue;
      current_[j] = l;
      descend(j + 1, sub_cap, new_spent, new_objective);
    }
  }

  std::vector<Item> items_;
  std::size_t m_;
  double budget_;
  double budget_limit_ = 0.0;
  int levels_;
  double step_;
  std::vector<double> table_;
  std::vector<int> choice_;
  std::vector<double> min_spend_suffix_;

  double mu_ = 0.0;
  double best_value_ = kInf;
  std::vector<int> best_levels_;
  std::vector<int> current_;
  std::size_t nodes_ = 0;
};

int lattice_size(double step) {
  const double count = 1.0 / step;
  const long rounded = std::lround(count);
  if (!(step > 0.0) || std::abs(count - static_cast<double>(rounded)) > 1e-9 || rounded < 1)
    throw InvalidInput("grid step must divide 1");
  return static_cast<int>(rounded);
}

}  // namespace

std::vector<double> virtual_costs_direct(std::span<const double> sorted_costs) {
  require_sorted(sorted_costs);
  std::vector<double> psi(sorted_costs.size());
  for (std::size_t i = 0; i < sorted_costs.size(); ++i) {
    const double rank = static_cast<double>(i + 1);
    psi[i] = i == 0 ? sorted_costs[0] : rank * sorted_costs[i] - (rank - 1.0) * sorted_costs[i - 1];
  }
  return psi;
}

std::vector<double> regularize_naive(std::span<const double> psi) {
  if (psi.empty()) throw InvalidInput("psi must be non-empty");
  const std::size_t m = psi.size();
  std::vector<double> prefix(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) prefix[i + 1] = prefix[i] + psi[i];
  auto avg = [&](std::size_t i, std::size_t k) {
    return (prefix[k + 1] - prefix[i]) / static_cast<double>(k + 1 - i);
  };

  std::vector<double> phi(m);
  double running_max = -kInf;
  for (std::size_t i = 0; i < m; ++i) {
    double best = avg(i, i);
    for (std::size_t k = i + 1; k < m; ++k) best = std::min(best, avg(i, k));
    running_max = std::max(running_max, best);
    phi[i] = running_max;
  }
  return phi;
}

GridSearchResult grid_search_unbiased(std::span<const double> sorted_costs, double budget, double step) {
  if (sorted_costs.size() > 6) throw InvalidInput("grid search refuses more than 6 costs");
  if (step != 1e-2 && step != 1e-3) throw InvalidInput("grid step must be 1e-2 or 1e-3");
  if (!std::isfinite(budget) || budget < 0.0) throw InvalidInput("budget must be non-negative and finite");
  const auto psi = virtual_costs_direct(sorted_costs);
  const int levels = lattice_size(step);

  std::vector<Item> items;
  for (double p : psi) items.push_back({1.0, p, 1});
  LatticeSearch search(std::move(items), budget, levels, step);
  const LatticeResult found = search.run();

  GridSearchResult result;
  result.feasible = found.feasible;
  result.nodes = found.nodes;
  if (!found.feasible) return result;
  result.objective = found.objective;
  for (int l : found.levels) result.allocation.push_back(l * step);
  return result;
}

GridSearchCIResult grid_search_ci(std::span<const double> sorted_costs, double budget, double beta,
                                  GridSteps steps) {
  if (sorted_costs.size() > 4) throw InvalidInput("interval grid search refuses more than 4 costs");
  if (!std::isfinite(budget) || budget < 0.0) throw InvalidInput("budget must be non-negative and finite");
  if (!std::isfinite(beta) || beta <= 0.0) throw InvalidInput("beta must be positive and finite");
  const auto psi = virtual_costs_direct(sorted_costs);
  const int u_levels = lattice_size(steps.ignore_step);
  const int a_levels = lattice_size(steps.allocation_step);
  const std::size_t m = psi.size();
  const double n = static_cast<double>(m);
  const double scale = beta * beta / n;

  GridSearchCIResult best;
  best.objective = kInf;

  // Odometer over U levels in lexicographic order; strict improvement keeps the
  // lexicographically smallest minimiser.
  std::vector<int> u(m, 0);
  while (true) {
    // A fully ignored entry has zero effective allocation, so every later entry
    // must be fully ignored too.
    std::size_t kept = m;
    for (std::size_t j = 0; j < m; ++j) {
      if (u[j] == u_levels) {
        kept = j;
        break;
      }
    }
    bool valid = true;
    for (std::size_t j = kept; j < m; ++j) valid = valid && u[j] == u_levels;

    if (valid) {
      double mass = 0.0;
      double retained = 0.0;
      for (std::size_t j = 0; j < m; ++j) {
        const double uj = static_cast<double>(u[j]) / u_levels;
        mass += uj;
        if (j < kept) retained += 1.0 - uj;
      }
      const double bias = (mass / n) * (mass / n);
      // With A <= 1 the variance term is at least scale * retained.
      if (bias + scale * retained < best.objective) {
        std::vector<Item> items;
        for (std::size_t j = 0; j < kept; ++j) {
          const double keep = static_cast<double>(u_levels - u[j]) / u_levels;
          items.push_back({keep, keep * psi[j], u_levels - u[j]});
        }
        LatticeSearch search(std::move(items), budget, a_levels, steps.allocation_step);
        const LatticeResult found = search.run();
        if (found.feasible) {
          const double value = scale * found.objective + bias;
          if (value < best.objective) {
            best.feasible = true;
            best.objective = value;
            best.ignore.assign(m, 1.0);
            best.allocation.assign(m, steps.allocation_step);
            for (std::size_t j = 0; j < m; ++j) best.ignore[j] = static_cast<double>(u[j]) / u_levels;
            for (std::size_t j = 0; j < kept; ++j) best.allocation[j] = found.levels[j] * steps.allocation_step;
          }
        }
      }
    }

    std::size_t pos = m;
    while (pos > 0) {
      --pos;
      if (u[pos] < u_levels) {
        ++u[pos];
        std::fill(u.begin() + static_cast<std::ptrdiff_t>(pos) + 1, u.end(), 0);
        break;
      }
      if (pos == 0) return best;
    }
    if (m == 0) return best;
  }
}

}  // namespace surveymech::oracle
