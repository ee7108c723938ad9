#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "onalloc/allocation.hpp"
#include "onalloc/instance.hpp"
#include "onalloc/rational.hpp"

namespace onalloc {

enum class Sense { le, eq, ge };
enum class Direction { maximize, minimize };
enum class LpStatus { optimal, infeasible, unbounded };

struct LpRow {
  std::vector<Rat> coeff;
  Sense sense = Sense::le;
  Rat rhs = 0;
};

struct LinearProgram {
  Direction direction = Direction::maximize;
  std::vector<Rat> objective;  // one entry per variable, variables are >= 0
  std::vector<LpRow> rows;

  int num_vars() const { return static_cast<int>(objective.size()); }
};

struct LpSolution {
  LpStatus status = LpStatus::optimal;
  Rat value = 0;
  std::vector<Rat> primal;  // per variable
  std::vector<Rat> dual;    // per row; satisfies strong duality exactly
};

namespace detail {

/// Dense rational simplex in standard form. All arithmetic exact; Bland's
/// rule (smallest eligible index) precludes cycling.
class SimplexTableau {
 public:
  // rows_in: inequality rows a.x <= b over n structural variables.
  SimplexTableau(int n, std::vector<std::pair<std::vector<Rat>, Rat>> rows_in)
      : n_(n), m_(static_cast<int>(rows_in.size())) {
    slack_begin_ = n_;
    art_begin_ = n_ + m_;
    int n_art = 0;
    for (const auto& [a, b] : rows_in)
      if (b < 0) ++n_art;
    ncols_ = art_begin_ + n_art;
    rows_.assign(m_, std::vector<Rat>(ncols_, Rat(0)));
    rhs_.resize(m_);
    basis_.resize(m_);
    slack_negated_.assign(m_, false);
    int art = art_begin_;
    for (int r = 0; r < m_; ++r) {
      auto& [a, b] = rows_in[r];
      const bool neg = b < 0;
      slack_negated_[r] = neg;
      for (int j = 0; j < n_; ++j) rows_[r][j] = neg ? Rat(-a[j]) : a[j];
      rows_[r][slack_begin_ + r] = neg ? Rat(-1) : Rat(1);
      rhs_[r] = neg ? Rat(-b) : b;
      if (neg) {
        rows_[r][art] = 1;
        basis_[r] = art++;
      } else {
        basis_[r] = slack_begin_ + r;
      }
    }
  }

  bool needs_phase1() const { return ncols_ > art_begin_; }

  /// Runs phase 1 (minimize artificial sum). Returns true iff feasible.
  bool phase1() {
    std::vector<Rat> cost(ncols_, Rat(0));
    for (int j = art_begin_; j < ncols_; ++j) cost[j] = -1;
    reset_costs(cost);
    iterate(/*allow_cols_below=*/ncols_);
    if (objective_ < 0) return false;
    drive_out_artificials();
    return true;
  }

  /// Runs phase 2 with the given structural costs (maximization).
  /// Returns false on unboundedness.
  bool phase2(const std::vector<Rat>& structural_cost) {
    std::vector<Rat> cost(ncols_, Rat(0));
    for (int j = 0; j < n_; ++j) cost[j] = structural_cost[j];
    reset_costs(cost);
    return iterate(/*allow_cols_below=*/art_begin_);
  }

  Rat objective() const { return objective_; }

  std::vector<Rat> structural_solution() const {
    std::vector<Rat> x(n_, Rat(0));
    for (int r = 0; r < m_; ++r)
      if (basis_[r] < n_) x[basis_[r]] = rhs_[r];
    return x;
  }

  /// Multiplier of internal row r as originally written (a.x <= b form):
  /// rho_r = -redcost(slack_r), sign-corrected for rows stored negated.
  Rat row_multiplier(int r) const { return Rat(-redcost_[slack_begin_ + r]); }

 private:
  void reset_costs(const std::vector<Rat>& cost) {
    redcost_ = cost;
    objective_ = 0;
    for (int r = 0; r < m_; ++r) {
      const Rat& cb = cost[basis_[r]];
      if (cb == 0) continue;
      objective_ += cb * rhs_[r];
      for (int j = 0; j < ncols_; ++j)
        if (rows_[r][j] != 0) redcost_[j] -= cb * rows_[r][j];
    }
  }

  // Bland: entering = smallest index with positive reduced cost; leaving =
  // min ratio, ties by smallest basic variable index.
  bool iterate(int allow_cols_below) {
    for (;;) {
      int enter = -1;
      for (int j = 0; j < allow_cols_below; ++j)
        if (redcost_[j] > 0) {
          enter = j;
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      Rat best_ratio;
      for (int r = 0; r < m_; ++r) {
        if (rows_[r][enter] <= 0) continue;
        Rat ratio = rhs_[r] / rows_[r][enter];
        if (leave < 0 || ratio < best_ratio ||
            (ratio == best_ratio && basis_[r] < basis_[leave])) {
          leave = r;
          best_ratio = std::move(ratio);
        }
      }
      if (leave < 0) return false;  // unbounded direction
      pivot(leave, enter);
    }
  }

  void pivot(int r, int s) {
    auto& prow = rows_[r];
    const Rat piv = prow[s];
    std::vector<int> nz;
    nz.reserve(16);
    for (int j = 0; j < ncols_; ++j)
      if (prow[j] != 0) {
        if (piv != 1) prow[j] /= piv;
        nz.push_back(j);
      }
    if (piv != 1) rhs_[r] /= piv;

    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      const Rat f = rows_[i][s];
      if (f == 0) continue;
      for (int j : nz) rows_[i][j] -= f * prow[j];
      rows_[i][s] = 0;  // exact by construction; reassign to keep it canonical
      rhs_[i] -= f * rhs_[r];
    }
    const Rat fc = redcost_[s];
    if (fc != 0) {
      for (int j : nz) redcost_[j] -= fc * prow[j];
      redcost_[s] = 0;
      objective_ += fc * rhs_[r];
    }
    basis_[r] = s;
  }

  // Pivot remaining zero-level artificials out of the basis; a row with no
  // eligible pivot column is redundant and dropped.
  void drive_out_artificials() {
    for (int r = m_ - 1; r >= 0; --r) {
      if (basis_[r] < art_begin_) continue;
      int col = -1;
      for (int j = 0; j < art_begin_; ++j)
        if (rows_[r][j] != 0) {
          col = j;
          break;
        }
      if (col >= 0) {
        pivot(r, col);
        continue;
      }
      rows_.erase(rows_.begin() + r);
      rhs_.erase(rhs_.begin() + r);
      basis_.erase(basis_.begin() + r);
      slack_negated_.erase(slack_negated_.begin() + r);
      --m_;
    }
    for (auto& row : rows_) row.resize(art_begin_);
    ncols_ = art_begin_;
  }

  int n_ = 0, m_ = 0, ncols_ = 0, slack_begin_ = 0, art_begin_ = 0;
  std::vector<std::vector<Rat>> rows_;
  std::vector<Rat> rhs_;
  std::vector<int> basis_;
  std::vector<bool> slack_negated_;
  std::vector<Rat> redcost_;
  Rat objective_ = 0;
};

inline void verify_lp_certificate(const LinearProgram& lp, const LpSolution& sol) {
  const int n = lp.num_vars();
  const bool maximize = lp.direction == Direction::maximize;
  Rat primal_obj = 0;
  for (int j = 0; j < n; ++j) {
    if (sol.primal[j] < 0) throw std::logic_error("lp internal: negative primal");
    primal_obj += lp.objective[j] * sol.primal[j];
  }
  Rat dual_obj = 0;
  for (std::size_t u = 0; u < lp.rows.size(); ++u) {
    const auto& row = lp.rows[u];
    Rat act = 0;
    for (int j = 0; j < n; ++j) act += row.coeff[j] * sol.primal[j];
    const bool tight = act == row.rhs;
    switch (row.sense) {
      case Sense::le:
        if (act > row.rhs) throw std::logic_error("lp internal: primal infeasible (le)");
        if ((maximize ? sol.dual[u] < 0 : sol.dual[u] > 0))
          throw std::logic_error("lp internal: dual sign (le)");
        break;
      case Sense::ge:
        if (act < row.rhs) throw std::logic_error("lp internal: primal infeasible (ge)");
        if ((maximize ? sol.dual[u] > 0 : sol.dual[u] < 0))
          throw std::logic_error("lp internal: dual sign (ge)");
        break;
      case Sense::eq:
        if (act != row.rhs) throw std::logic_error("lp internal: primal infeasible (eq)");
        break;
    }
    if (sol.dual[u] != 0 && !tight)
      throw std::logic_error("lp internal: complementary slackness (row)");
    dual_obj += sol.dual[u] * row.rhs;
  }
  for (int j = 0; j < n; ++j) {
    Rat lhs = 0;
    for (std::size_t u = 0; u < lp.rows.size(); ++u) lhs += sol.dual[u] * lp.rows[u].coeff[j];
    if (maximize) {
      if (lhs < lp.objective[j]) throw std::logic_error("lp internal: dual infeasible");
    } else {
      if (lhs > lp.objective[j]) throw std::logic_error("lp internal: dual infeasible");
    }
    if (sol.primal[j] != 0 && lhs != lp.objective[j])
      throw std::logic_error("lp internal: complementary slackness (column)");
  }
  if (primal_obj != sol.value || dual_obj != sol.value)
    throw std::logic_error("lp internal: strong duality violated");
}

}  // namespace detail

/// Exact rational LP solve. Every optimal solve returns a matching dual
/// vector and verifies strong duality and complementary slackness before
/// returning.
inline LpSolution solve_lp(const LinearProgram& lp) {
  const int n = lp.num_vars();
  for (const auto& row : lp.rows)
    if (static_cast<int>(row.coeff.size()) != n)
      throw std::invalid_argument("lp row dimension mismatch");

  const bool maximize = lp.direction == Direction::maximize;

  // Internal form: each row becomes one or two <= rows; eq keeps both with
  // opposite signs so a free multiplier can be recovered as a difference.
  std::vector<std::pair<std::vector<Rat>, Rat>> internal;
  struct RowMap {
    int first = -1, second = -1;  // internal indices; second only for eq
    Sense sense = Sense::le;
  };
  std::vector<RowMap> mapping(lp.rows.size());
  for (std::size_t u = 0; u < lp.rows.size(); ++u) {
    const auto& row = lp.rows[u];
    mapping[u].sense = row.sense;
    std::vector<Rat> pos = row.coeff;
    std::vector<Rat> negv(n);
    for (int j = 0; j < n; ++j) negv[j] = -row.coeff[j];
    switch (row.sense) {
      case Sense::le:
        mapping[u].first = static_cast<int>(internal.size());
        internal.emplace_back(std::move(pos), row.rhs);
        break;
      case Sense::ge:
        mapping[u].first = static_cast<int>(internal.size());
        internal.emplace_back(std::move(negv), Rat(-row.rhs));
        break;
      case Sense::eq:
        mapping[u].first = static_cast<int>(internal.size());
        internal.emplace_back(std::move(pos), row.rhs);
        mapping[u].second = static_cast<int>(internal.size());
        internal.emplace_back(std::move(negv), Rat(-row.rhs));
        break;
    }
  }

  detail::SimplexTableau tab(n, std::move(internal));
  LpSolution sol;
  if (tab.needs_phase1() && !tab.phase1()) {
    sol.status = LpStatus::infeasible;
    return sol;
  }
  std::vector<Rat> cost = lp.objective;
  if (!maximize)
    for (auto& c : cost) c = -c;
  if (!tab.phase2(cost)) {
    sol.status = LpStatus::unbounded;
    return sol;
  }

  sol.status = LpStatus::optimal;
  sol.value = maximize ? tab.objective() : Rat(-tab.objective());
  sol.primal = tab.structural_solution();
  sol.dual.resize(lp.rows.size());
  for (std::size_t u = 0; u < lp.rows.size(); ++u) {
    Rat lambda;
    switch (mapping[u].sense) {
      case Sense::le: lambda = tab.row_multiplier(mapping[u].first); break;
      case Sense::ge: lambda = -tab.row_multiplier(mapping[u].first); break;
      case Sense::eq:
        lambda = tab.row_multiplier(mapping[u].first) -
                 tab.row_multiplier(mapping[u].second);
        break;
    }
    sol.dual[u] = maximize ? lambda : Rat(-lambda);
  }
  detail::verify_lp_certificate(lp, sol);
  return sol;
}

/// The offline allocation LP for an instance: maximize sum(bid * x) subject
/// to unit item mass and buyer budgets. Variables are edges in item-major
/// order; rows are buyers first, then items.
inline LinearProgram offline_lp(const Instance& inst) {
  int nv = 0;
  for (const auto& it : inst.items) nv += static_cast<int>(it.edges.size());
  LinearProgram lp;
  lp.direction = Direction::maximize;
  lp.objective.assign(nv, Rat(0));
  const int nb = static_cast<int>(inst.buyers.size());
  const int ni = static_cast<int>(inst.items.size());
  lp.rows.assign(nb + ni, LpRow{std::vector<Rat>(nv, Rat(0)), Sense::le, Rat(0)});
  for (int i = 0; i < nb; ++i) lp.rows[i].rhs = inst.buyers[i].budget;
  int v = 0;
  for (int j = 0; j < ni; ++j) {
    lp.rows[nb + j].rhs = 1;
    for (const auto& e : inst.items[j].edges) {
      lp.objective[v] = e.bid;
      lp.rows[e.buyer].coeff[v] = inst.spend_coeff(e);
      lp.rows[nb + j].coeff[v] = 1;
      ++v;
    }
  }
  return lp;
}

struct OfflineOpt {
  Rat value;
  Allocation<Rat> alloc;
};

/// Exact offline optimum and an optimal fractional allocation.
inline OfflineOpt offline_opt(const Instance& inst) {
  const LinearProgram lp = offline_lp(inst);
  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::optimal)
    throw std::logic_error("offline LP must be feasible and bounded");
  OfflineOpt res{sol.value, Allocation<Rat>::zero(inst)};
  int v = 0;
  for (std::size_t j = 0; j < inst.items.size(); ++j)
    for (std::size_t k = 0; k < inst.items[j].edges.size(); ++k)
      res.alloc.x[j][k] = sol.primal[v++];
  res.alloc.recompute_levels(inst);
  return res;
}

struct FrlpResult {
  Rat alpha_star;
  std::vector<Rat> c;  // optimal spend profile, one entry per scale
};

/// Worst-case guarantee of scale-restricted allocation over k scales:
/// maximize the smallest restricted value alpha subject to a unit budget
/// split c across scales, where scale s only credits c_t at rate 2^{t-s}
/// for t <= s.
inline FrlpResult factor_revealing_lp(int k) {
  if (k < 1) throw std::invalid_argument("factor_revealing_lp requires k >= 1");
  // Variables: alpha, c_0 .. c_{k-1}.
  LinearProgram lp;
  lp.direction = Direction::maximize;
  lp.objective.assign(1 + k, Rat(0));
  lp.objective[0] = 1;
  LpRow budget{std::vector<Rat>(1 + k, Rat(0)), Sense::le, Rat(1)};
  for (int t = 0; t < k; ++t) budget.coeff[1 + t] = 1;
  lp.rows.push_back(std::move(budget));
  for (int s = 0; s < k; ++s) {
    LpRow row{std::vector<Rat>(1 + k, Rat(0)), Sense::le, Rat(0)};
    row.coeff[0] = 1;
    for (int t = 0; t <= s; ++t) row.coeff[1 + t] = -pow2_rat(t - s);
    lp.rows.push_back(std::move(row));
  }
  const LpSolution sol = solve_lp(lp);
  if (sol.status != LpStatus::optimal)
    throw std::logic_error("factor-revealing LP must be feasible and bounded");
  FrlpResult res;
  res.alpha_star = sol.value;
  res.c.assign(sol.primal.begin() + 1, sol.primal.end());
  return res;
}

}  // namespace onalloc
