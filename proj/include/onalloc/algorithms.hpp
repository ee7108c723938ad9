#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "onalloc/allocation.hpp"
#include "onalloc/gfunction.hpp"
#include "onalloc/instance.hpp"
#include "onalloc/tape.hpp"

namespace onalloc {

template <class Num>
struct RunResult {
  Allocation<Num> alloc;
  RunTrace<Num> trace;
};

struct BisectionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Transformed level b_{i,j}(g(y/B) - 1): the allocation priority key of
/// virtual water-filling. Nonpositive while budget remains, 0 at exhaustion.
struct VirtualLevel {
  double value = 0.0;
};

inline VirtualLevel make_virtual_level(const GFunction& f, double bid, double norm_level) {
  return {bid * (f.g(norm_level) - 1.0)};
}

// ---------------------------------------------------------------------------
// Tie policies
// ---------------------------------------------------------------------------

/// Orders tied candidates by buyer index: one fixed ordering shared by every
/// arriving item.
struct GlobalOrderTie {
  template <class Num>
  void arrange(const Instance& inst, int item, std::vector<int>& tied_edges,
               const std::vector<Num>& /*levels*/) const {
    std::sort(tied_edges.begin(), tied_edges.end(), [&](int a, int b) {
      return inst.items[item].edges[a].buyer < inst.items[item].edges[b].buyer;
    });
  }
};

/// A distinct fixed ordering per arriving item, derived from a seed. Still
/// deterministic and independent of levels, so allocation-monotone.
struct PerItemOrderTie {
  std::uint64_t seed = 0;

  template <class Num>
  void arrange(const Instance& inst, int item, std::vector<int>& tied_edges,
               const std::vector<Num>& /*levels*/) const {
    auto key = [&](int e) {
      std::uint64_t s = seed ^ (0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(item) + 1));
      s ^= 0xD1B54A32D192ED03ULL * (static_cast<std::uint64_t>(inst.items[item].edges[e].buyer) + 1);
      return detail::splitmix64(s);
    };
    std::sort(tied_edges.begin(), tied_edges.end(), [&](int a, int b) {
      const auto ka = key(a), kb = key(b);
      if (ka != kb) return ka < kb;
      return inst.items[item].edges[a].buyer < inst.items[item].edges[b].buyer;
    });
  }
};

namespace detail {

inline std::span<const int> order_or_arrival(const Instance& inst, std::span<const int> order) {
  return order.empty() ? std::span<const int>(inst.arrival) : order;
}

template <class Num>
void begin_step(const Instance& inst, RunTrace<Num>& trace, TraceStep<Num>& step, int item,
                int rank, const std::vector<Num>& level) {
  step.item = item;
  step.rank = rank;
  step.gain = Num(0);
  step.edges.clear();
  const auto& edges = inst.items[item].edges;
  step.edges.reserve(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    TraceEdge<Num> te;
    te.buyer = edges[k].buyer;
    te.k = static_cast<int>(k);
    te.level_before = level[te.buyer];
    te.level_after = level[te.buyer];
    te.dx = Num(0);
    step.edges.push_back(std::move(te));
  }
  (void)trace;
}

template <class Num>
void finish_step(TraceStep<Num>& step, const std::vector<Num>& level) {
  for (auto& te : step.edges) te.level_after = level[te.buyer];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Water-filling (matching)
// ---------------------------------------------------------------------------

/// BALANCE: each arriving item continuously raises its minimum-level
/// unsaturated neighbors, all at the same rate. Event-driven: steps jump to
/// the next level merge, saturation, or exhaustion of the item's unit mass,
/// so rational inputs give exact rational levels.
// The returned trace borrows the instance, so temporaries are rejected at
// compile time for every runner below.
template <class Num = Rat>
RunResult<Num> water_filling(Instance&&, std::span<const int> = {}) = delete;

template <class Num = Rat>
RunResult<Num> water_filling(const Instance& inst, std::span<const int> order = {}) {
  if (inst.kind != Kind::matching)
    throw std::invalid_argument("water_filling requires a matching instance");
  const auto ord = detail::order_or_arrival(inst, order);

  RunResult<Num> res;
  res.alloc = Allocation<Num>::zero(inst);
  res.trace.inst = &inst;
  res.trace.order.assign(ord.begin(), ord.end());
  std::vector<Num>& level = res.alloc.level;

  for (std::size_t r = 0; r < ord.size(); ++r) {
    const int j = ord[r];
    const auto& edges = inst.items[j].edges;
    TraceStep<Num> step;
    detail::begin_step(inst, res.trace, step, j, static_cast<int>(r), level);

    Num remaining(1);
    std::vector<int> active;  // edge indices with unsaturated buyer
    for (std::size_t k = 0; k < edges.size(); ++k)
      if (level[edges[k].buyer] < Num(1)) active.push_back(static_cast<int>(k));

    while (remaining > Num(0) && !active.empty()) {
      Num low = level[edges[active[0]].buyer];
      for (int k : active) low = std::min(low, level[edges[k].buyer]);
      std::vector<int> lows;
      bool has_next = false;
      Num next_up(0);
      for (int k : active) {
        const Num& l = level[edges[k].buyer];
        if (l == low) {
          lows.push_back(k);
        } else if (!has_next || l < next_up) {
          has_next = true;
          next_up = l;
        }
      }
      // Raise the low set uniformly to the nearest event.
      Num delta = Num(1) - low;                        // saturation
      if (has_next) delta = std::min(delta, Num(next_up - low));  // merge
      const Num exhaust = remaining / Num(static_cast<int>(lows.size()));
      delta = std::min(delta, exhaust);                // item used up
      for (int k : lows) {
        res.alloc.x[j][k] += delta;
        step.edges[k].dx += delta;
        level[edges[k].buyer] = low + delta;
      }
      remaining -= delta * Num(static_cast<int>(lows.size()));
      if (low + delta >= Num(1))
        std::erase_if(active, [&](int k) { return level[edges[k].buyer] >= Num(1); });
    }
    step.gain = Num(1) - remaining;
    detail::finish_step(step, level);
    res.trace.steps.push_back(std::move(step));
  }
  res.trace.final_level = level;
  return res;
}

// ---------------------------------------------------------------------------
// Virtual water-filling (onbap; matching as the B=b=1 case)
// ---------------------------------------------------------------------------

/// MSVV-style allocation: each item continuously feeds the neighbors of
/// minimum virtual level b(g(y/B)-1), raising virtual levels equally (which
/// means unequal water rates across unequal bids). Solved per item by
/// bisection on the common target virtual level v; each buyer's water
/// consumption is monotone in v. Floating point by necessity (g is
/// transcendental).
inline RunResult<double> virtual_water_filling(Instance&&, const GFunction&,
                                               std::span<const int> = {}) = delete;

inline RunResult<double> virtual_water_filling(const Instance& inst, const GFunction& g,
                                               std::span<const int> order = {}) {
  if (inst.kind != Kind::matching && inst.kind != Kind::onbap)
    throw std::invalid_argument("virtual_water_filling requires a matching or onbap instance");
  const auto ord = detail::order_or_arrival(inst, order);

  RunResult<double> res;
  res.alloc = Allocation<double>::zero(inst);
  res.trace.inst = &inst;
  res.trace.order.assign(ord.begin(), ord.end());
  std::vector<double>& level = res.alloc.level;
  std::vector<double> budget(inst.buyers.size());
  for (std::size_t i = 0; i < budget.size(); ++i) budget[i] = to_double(inst.buyers[i].budget);

  // Normalized target level of a buyer with bid b if its virtual level were
  // raised to v (<= 0): the y solving b(g(y)-1) = v, clamped to [0,1].
  const auto target_norm = [&](double v, double bid) {
    return gfunction_inverse(g, 1.0 + v / bid);
  };

  for (std::size_t r = 0; r < ord.size(); ++r) {
    const int j = ord[r];
    const auto& edges = inst.items[j].edges;
    TraceStep<double> step;
    detail::begin_step(inst, res.trace, step, j, static_cast<int>(r), level);

    struct Cand {
      int k;
      double bid, bud, ynorm, vcur;
    };
    std::vector<Cand> cands;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const double bid = to_double(edges[k].bid);
      const double bud = budget[edges[k].buyer];
      if (bid <= 0.0 || bud <= 0.0) continue;
      const double ynorm = level[edges[k].buyer] / bud;
      if (ynorm >= 1.0) continue;
      cands.push_back({static_cast<int>(k), bid, bud, ynorm,
                       make_virtual_level(g, bid, ynorm).value});
    }

    if (!cands.empty()) {
      // Water consumed if all candidates are raised to common virtual level v.
      const auto consumption = [&](double v) {
        double total = 0.0;
        for (const auto& c : cands) {
          const double t = target_norm(v, c.bid);
          if (t > c.ynorm) total += (t - c.ynorm) * c.bud / c.bid;
        }
        return total;
      };
      double vstar = 0.0;
      const double full = consumption(0.0);
      if (std::isnan(full))
        throw BisectionError("virtual water-filling: consumption is NaN (malformed g)");
      if (full > 1.0 && cands.size() == 1) {
        // One candidate: the unit mass lands on it outright, no bisection.
        auto& c = cands[0];
        res.alloc.x[j][c.k] += 1.0;
        step.edges[c.k].dx += 1.0;
        level[edges[c.k].buyer] += c.bid;
        step.gain = c.bid;
        detail::finish_step(step, level);
        res.trace.steps.push_back(std::move(step));
        continue;
      }
      if (full > 1.0) {
        double lo = cands[0].vcur, hi = 0.0;
        for (const auto& c : cands) lo = std::min(lo, c.vcur);
        for (int it = 0; it < 200; ++it) {
          const double mid = 0.5 * (lo + hi);
          const double cons = consumption(mid);
          if (std::isnan(cons))
            throw BisectionError("virtual water-filling: consumption is NaN (malformed g)");
          (cons <= 1.0 ? lo : hi) = mid;
          // Convergence is measured on buyer levels, not on v itself.
          double level_gap = 0.0;
          for (const auto& c : cands)
            level_gap = std::max(level_gap, target_norm(hi, c.bid) - target_norm(lo, c.bid));
          if (level_gap <= 1e-12) break;
        }
        double level_gap = 0.0;
        for (const auto& c : cands)
          level_gap = std::max(level_gap, target_norm(hi, c.bid) - target_norm(lo, c.bid));
        if (!(level_gap <= 1e-12))
          throw BisectionError(
              "virtual water-filling: bisection did not converge in 200 iterations "
              "(malformed g)");
        vstar = lo;  // never over-allocates the item's unit mass
      }
      double gain = 0.0;
      for (const auto& c : cands) {
        const double t = target_norm(vstar, c.bid);
        if (t <= c.ynorm) continue;
        const double dx = (t - c.ynorm) * c.bud / c.bid;
        res.alloc.x[j][c.k] += dx;
        step.edges[c.k].dx += dx;
        level[edges[c.k].buyer] = t * c.bud;
        gain += c.bid * dx;
      }
      step.gain = gain;
    }
    detail::finish_step(step, level);
    res.trace.steps.push_back(std::move(step));
  }
  res.trace.final_level = level;
  return res;
}

// ---------------------------------------------------------------------------
// Greedy (fractional; matching and onbap)
// ---------------------------------------------------------------------------

/// Continuously feeds the maximum-bid neighbor with remaining budget, ties
/// split by the policy; never leaves item mass unallocated while any
/// neighbor has budget left.
template <class Num = Rat, class Tie = GlobalOrderTie>
RunResult<Num> greedy_fractional(Instance&&, const Tie& = {}, std::span<const int> = {}) = delete;

template <class Num = Rat, class Tie = GlobalOrderTie>
RunResult<Num> greedy_fractional(const Instance& inst, const Tie& tie = {},
                                 std::span<const int> order = {}) {
  if (inst.kind != Kind::matching && inst.kind != Kind::onbap)
    throw std::invalid_argument("greedy_fractional requires a matching or onbap instance");
  const auto ord = detail::order_or_arrival(inst, order);

  RunResult<Num> res;
  res.alloc = Allocation<Num>::zero(inst);
  res.trace.inst = &inst;
  res.trace.order.assign(ord.begin(), ord.end());
  std::vector<Num>& level = res.alloc.level;
  std::vector<Num> budget(inst.buyers.size());
  for (std::size_t i = 0; i < budget.size(); ++i)
    budget[i] = num_cast<Num>(inst.buyers[i].budget);

  for (std::size_t r = 0; r < ord.size(); ++r) {
    const int j = ord[r];
    const auto& edges = inst.items[j].edges;
    TraceStep<Num> step;
    detail::begin_step(inst, res.trace, step, j, static_cast<int>(r), level);

    Num remaining(1);
    std::vector<Num> bid(edges.size());
    for (std::size_t k = 0; k < edges.size(); ++k) bid[k] = num_cast<Num>(edges[k].bid);

    while (remaining > Num(0)) {
      int best = -1;
      for (std::size_t k = 0; k < edges.size(); ++k) {
        if (level[edges[k].buyer] >= budget[edges[k].buyer]) continue;
        if (best < 0 || bid[k] > bid[best]) best = static_cast<int>(k);
      }
      if (best < 0) break;
      std::vector<int> tied;
      for (std::size_t k = 0; k < edges.size(); ++k)
        if (level[edges[k].buyer] < budget[edges[k].buyer] && bid[k] == bid[best])
          tied.push_back(static_cast<int>(k));
      tie.arrange(inst, j, tied, level);
      for (int k : tied) {
        if (remaining == Num(0)) break;
        const int i = edges[k].buyer;
        Num dx = remaining;
        if (bid[k] > Num(0)) dx = std::min(dx, Num((budget[i] - level[i]) / bid[k]));
        if (dx == Num(0)) continue;
        res.alloc.x[j][k] += dx;
        step.edges[k].dx += dx;
        level[i] += bid[k] * dx;
        step.gain += bid[k] * dx;
        remaining -= dx;
      }
    }
    detail::finish_step(step, level);
    res.trace.steps.push_back(std::move(step));
  }
  res.trace.final_level = level;
  return res;
}

// ---------------------------------------------------------------------------
// I-greedy (integral; onbap and matching)
// ---------------------------------------------------------------------------

/// Integral greedy: give the whole item to the maximum bidder among buyers
/// with unexhausted budget if the bid fits the remaining budget; otherwise
/// skip the item entirely. Ties break by the fixed buyer ordering.
template <class Num = Rat>
RunResult<Num> i_greedy(Instance&&, std::span<const int> = {}, std::span<const int> = {}) = delete;

template <class Num = Rat>
RunResult<Num> i_greedy(const Instance& inst, std::span<const int> buyer_preference = {},
                        std::span<const int> order = {}) {
  if (inst.kind != Kind::matching && inst.kind != Kind::onbap)
    throw std::invalid_argument("i_greedy requires a matching or onbap instance");
  const auto ord = detail::order_or_arrival(inst, order);
  std::vector<int> pref(inst.buyers.size());
  if (buyer_preference.empty()) {
    std::iota(pref.begin(), pref.end(), 0);
  } else {
    if (buyer_preference.size() != inst.buyers.size())
      throw std::invalid_argument("i_greedy buyer ordering size mismatch");
    pref.assign(buyer_preference.begin(), buyer_preference.end());
  }

  RunResult<Num> res;
  res.alloc = Allocation<Num>::zero(inst);
  res.trace.inst = &inst;
  res.trace.order.assign(ord.begin(), ord.end());
  std::vector<Num>& level = res.alloc.level;
  std::vector<Num> budget(inst.buyers.size());
  for (std::size_t i = 0; i < budget.size(); ++i)
    budget[i] = num_cast<Num>(inst.buyers[i].budget);

  for (std::size_t r = 0; r < ord.size(); ++r) {
    const int j = ord[r];
    const auto& edges = inst.items[j].edges;
    TraceStep<Num> step;
    detail::begin_step(inst, res.trace, step, j, static_cast<int>(r), level);

    int best = -1;
    Num best_bid(0);
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const int i = edges[k].buyer;
      if (level[i] >= budget[i]) continue;  // exhausted
      const Num b = num_cast<Num>(edges[k].bid);
      if (best < 0 || b > best_bid ||
          (b == best_bid && pref[i] < pref[edges[best].buyer])) {
        best = static_cast<int>(k);
        best_bid = b;
      }
    }
    if (best >= 0 && best_bid <= budget[edges[best].buyer] - level[edges[best].buyer]) {
      res.alloc.x[j][best] = Num(1);
      step.edges[best].dx = Num(1);
      level[edges[best].buyer] += best_bid;
      step.gain = best_bid;
    } else {
      step.skipped = true;  // no eligible bidder, or the max bid does not fit
    }
    detail::finish_step(step, level);
    res.trace.steps.push_back(std::move(step));
  }
  res.trace.final_level = level;
  return res;
}

// ---------------------------------------------------------------------------
// Ranking (integral matching)
// ---------------------------------------------------------------------------

inline std::vector<int> random_priorities(std::size_t n, std::uint64_t seed) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  Rng rng(seed);
  rng.shuffle(p);
  return p;
}

/// Each arriving item is matched to its highest-priority (lowest rank value)
/// unmatched neighbor.
template <class Num = Rat>
RunResult<Num> ranking(Instance&&, std::span<const int>, std::span<const int> = {}) = delete;

template <class Num = Rat>
RunResult<Num> ranking(const Instance& inst, std::span<const int> priorities,
                       std::span<const int> order = {}) {
  if (inst.kind != Kind::matching)
    throw std::invalid_argument("ranking requires a matching instance");
  if (priorities.size() != inst.buyers.size())
    throw std::invalid_argument("ranking priorities size mismatch");
  const auto ord = detail::order_or_arrival(inst, order);

  RunResult<Num> res;
  res.alloc = Allocation<Num>::zero(inst);
  res.trace.inst = &inst;
  res.trace.order.assign(ord.begin(), ord.end());
  std::vector<Num>& level = res.alloc.level;

  for (std::size_t r = 0; r < ord.size(); ++r) {
    const int j = ord[r];
    const auto& edges = inst.items[j].edges;
    TraceStep<Num> step;
    detail::begin_step(inst, res.trace, step, j, static_cast<int>(r), level);

    int best = -1;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const int i = edges[k].buyer;
      if (level[i] >= Num(1)) continue;
      if (best < 0 || priorities[i] < priorities[edges[best].buyer])
        best = static_cast<int>(k);
    }
    if (best >= 0) {
      res.alloc.x[j][best] = Num(1);
      step.edges[best].dx = Num(1);
      level[edges[best].buyer] = Num(1);
      step.gain = Num(1);
    } else {
      step.skipped = true;
    }
    detail::finish_step(step, level);
    res.trace.steps.push_back(std::move(step));
  }
  res.trace.final_level = level;
  return res;
}

// ---------------------------------------------------------------------------
// Allocation-monotonicity probe
// ---------------------------------------------------------------------------

template <class Num>
struct MonotonicityCounterexample {
  std::vector<int> seq1, seq2;  // item index sequences, seq1 ⊆ seq2
  int appended_item = -1;
  int buyer = -1;
  Num level_seq1{}, level_seq2{};  // post-append levels at the violating buyer
};

/// Falsification probe for allocation-monotonicity: samples seq2 (a random
/// subsequence of the arrival order) and seq1 (a random deletion-subsequence
/// of seq2), keeps pairs whose pre-append levels are already ordered, appends
/// a common unseen item to both, and reports any buyer whose post-append
/// levels flip the order. `run` maps (instance, order) to final levels.
template <class Num, class RunLevels>
std::vector<MonotonicityCounterexample<Num>> probe_allocation_monotonicity(
    const Instance& inst, RunLevels&& run, int trials, std::uint64_t seed) {
  std::vector<MonotonicityCounterexample<Num>> found;
  if (inst.items.empty()) return found;
  const Num tol = detail::feasibility_tol<Num>();

  for (int t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::vector<int> seq2;
    for (int j : inst.arrival)
      if (rng.uniform01() < 0.7) seq2.push_back(j);
    if (seq2.size() == inst.items.size() && !seq2.empty())
      seq2.erase(seq2.begin() + static_cast<std::ptrdiff_t>(rng.below(seq2.size())));
    std::vector<char> in2(inst.items.size(), 0);
    for (int j : seq2) in2[j] = 1;
    std::vector<int> outside;
    for (int j : inst.arrival)
      if (!in2[j]) outside.push_back(j);
    if (outside.empty()) continue;
    const int appended = outside[rng.below(outside.size())];

    std::vector<int> seq1;
    for (int j : seq2)
      if (rng.uniform01() < 0.7) seq1.push_back(j);

    const std::vector<Num> pre1 = run(inst, std::span<const int>(seq1));
    const std::vector<Num> pre2 = run(inst, std::span<const int>(seq2));
    bool premise = true;
    for (std::size_t i = 0; i < pre1.size() && premise; ++i)
      premise = pre1[i] <= pre2[i] + tol;
    if (!premise) continue;

    std::vector<int> ext1 = seq1, ext2 = seq2;
    ext1.push_back(appended);
    ext2.push_back(appended);
    const std::vector<Num> post1 = run(inst, std::span<const int>(ext1));
    const std::vector<Num> post2 = run(inst, std::span<const int>(ext2));
    for (std::size_t i = 0; i < post1.size(); ++i) {
      if (post1[i] > post2[i] + tol) {
        MonotonicityCounterexample<Num> ce;
        ce.seq1 = seq1;
        ce.seq2 = seq2;
        ce.appended_item = appended;
        ce.buyer = static_cast<int>(i);
        ce.level_seq1 = post1[i];
        ce.level_seq2 = post2[i];
        found.push_back(std::move(ce));
        break;
      }
    }
  }
  return found;
}

}  // namespace onalloc
