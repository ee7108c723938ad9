#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include "onalloc/instance.hpp"
#include "onalloc/rational.hpp"

namespace onalloc {

namespace detail {

template <class Num>
Num feasibility_tol() {
  if constexpr (std::is_same_v<Num, Rat>)
    return Rat(1, BigInt("1000000000000"));  // 1e-12, exact
  else
    return Num(1e-12);
}

}  // namespace detail

/// Fractional assignment: x[item][k] is the mass of item j on its k-th edge,
/// level[i] the resulting budget spend of buyer i.
template <class Num>
struct Allocation {
  std::vector<std::vector<Num>> x;
  std::vector<Num> level;

  static Allocation zero(const Instance& inst) {
    Allocation a;
    a.x.resize(inst.items.size());
    for (std::size_t j = 0; j < inst.items.size(); ++j)
      a.x[j].assign(inst.items[j].edges.size(), Num(0));
    a.level.assign(inst.buyers.size(), Num(0));
    return a;
  }

  /// Recomputes buyer levels from x (spend = weight for ongap, bid otherwise).
  void recompute_levels(const Instance& inst) {
    level.assign(inst.buyers.size(), Num(0));
    for (std::size_t j = 0; j < x.size(); ++j)
      for (std::size_t k = 0; k < x[j].size(); ++k)
        level[inst.items[j].edges[k].buyer] +=
            num_cast<Num>(inst.spend_coeff(inst.items[j].edges[k])) * x[j][k];
  }
};

template <class Num>
Allocation<Rat> to_exact(const Instance& inst, const Allocation<Num>& a) {
  Allocation<Rat> out = Allocation<Rat>::zero(inst);
  for (std::size_t j = 0; j < a.x.size(); ++j)
    for (std::size_t k = 0; k < a.x[j].size(); ++k) out.x[j][k] = rat_cast(a.x[j][k]);
  out.recompute_levels(inst);
  return out;
}

/// Returns the first feasibility violation as text, or empty if feasible
/// within tolerance 1e-12 (item mass <= 1, buyer spend <= budget, x >= 0).
template <class Num>
std::string feasibility_violation(const Instance& inst, const Allocation<Num>& a) {
  const Num tol = detail::feasibility_tol<Num>();
  if (a.x.size() != inst.items.size()) return "allocation has wrong item count";
  std::vector<Num> spend(inst.buyers.size(), Num(0));
  for (std::size_t j = 0; j < inst.items.size(); ++j) {
    if (a.x[j].size() != inst.items[j].edges.size())
      return "allocation has wrong edge count on item \"" + inst.items[j].id + "\"";
    Num mass(0);
    for (std::size_t k = 0; k < a.x[j].size(); ++k) {
      if (a.x[j][k] < -tol)
        return "negative allocation on item \"" + inst.items[j].id + "\"";
      mass += a.x[j][k];
      spend[inst.items[j].edges[k].buyer] +=
          num_cast<Num>(inst.spend_coeff(inst.items[j].edges[k])) * a.x[j][k];
    }
    if (mass > Num(1) + tol)
      return "item \"" + inst.items[j].id + "\" allocated more than unit mass";
  }
  for (std::size_t i = 0; i < inst.buyers.size(); ++i)
    if (spend[i] > num_cast<Num>(inst.buyers[i].budget) + tol)
      return "buyer \"" + inst.buyers[i].id + "\" exceeds budget";
  return {};
}

template <class Num>
bool is_feasible(const Instance& inst, const Allocation<Num>& a) {
  return feasibility_violation(inst, a).empty();
}

/// Objective sum(bid * x). Throws on an infeasible allocation.
template <class Num>
Num primal_value(const Instance& inst, const Allocation<Num>& a) {
  if (auto why = feasibility_violation(inst, a); !why.empty())
    throw ValidationError("infeasible allocation: " + why);
  Num v(0);
  for (std::size_t j = 0; j < inst.items.size(); ++j)
    for (std::size_t k = 0; k < a.x[j].size(); ++k)
      v += num_cast<Num>(inst.items[j].edges[k].bid) * a.x[j][k];
  return v;
}

/// Per-edge record of one arrival step: buyer levels before/after and the
/// mass the step assigned along this edge.
template <class Num>
struct TraceEdge {
  int buyer = -1;
  int k = -1;  // edge index within the item
  Num level_before{};
  Num level_after{};
  Num dx{};
};

template <class Num>
struct TraceStep {
  int item = -1;
  int rank = -1;  // position in the processed order
  std::vector<TraceEdge<Num>> edges;  // one per instance edge of the item
  Num gain{};                         // objective increase of this step
  bool skipped = false;               // integral algorithms only
};

/// Full replay of one run: processed order, per-step level movements, and
/// final buyer levels. Dual builders consume this rather than re-running.
template <class Num>
struct RunTrace {
  const Instance* inst = nullptr;
  std::vector<int> order;
  std::vector<TraceStep<Num>> steps;
  std::vector<Num> final_level;

  /// Internal consistency: steps aligned with order, levels non-decreasing
  /// and continuous across steps, dx consistent with level movement.
  std::string consistency_violation() const {
    if (!inst) return "trace has no instance";
    if (steps.size() != order.size()) return "trace steps misaligned with order";
    std::vector<Num> level(inst->buyers.size(), Num(0));
    const Num tol = detail::feasibility_tol<Num>();
    for (std::size_t r = 0; r < steps.size(); ++r) {
      const auto& st = steps[r];
      if (st.item != order[r]) return "trace step item mismatch";
      if (st.rank != static_cast<int>(r)) return "trace step rank mismatch";
      const auto& item = inst->items[st.item];
      if (st.edges.size() != item.edges.size()) return "trace step edge count mismatch";
      for (std::size_t k = 0; k < st.edges.size(); ++k) {
        const auto& te = st.edges[k];
        if (te.buyer != item.edges[k].buyer || te.k != static_cast<int>(k))
          return "trace edge identity mismatch";
        Num lo = level[te.buyer] - tol, hi = level[te.buyer] + tol;
        if (te.level_before < lo || te.level_before > hi)
          return "trace level discontinuity";
        if (te.level_after < te.level_before - tol) return "trace level decreased";
        const Num moved = num_cast<Num>(inst->spend_coeff(item.edges[k])) * te.dx;
        if (te.level_after - te.level_before - moved > tol ||
            moved - (te.level_after - te.level_before) > tol)
          return "trace dx inconsistent with level movement";
      }
      for (const auto& te : st.edges) level[te.buyer] = te.level_after;
    }
    for (std::size_t i = 0; i < level.size(); ++i) {
      const Num tol2 = detail::feasibility_tol<Num>();
      if (final_level.size() != level.size()) return "trace final level size mismatch";
      if (final_level[i] - level[i] > tol2 || level[i] - final_level[i] > tol2)
        return "trace final level mismatch";
    }
    return {};
  }
};

}  // namespace onalloc
