#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "onalloc/algorithms.hpp"
#include "onalloc/allocation.hpp"
#include "onalloc/gfunction.hpp"
#include "onalloc/instance.hpp"
#include "onalloc/parallel.hpp"
#include "onalloc/tape.hpp"

namespace onalloc {

/// Arrival order induced by a Z tape: items sorted by Z, ties broken by item
/// id (a probability-zero event in the continuous model, pinned for floats).
inline std::vector<int> order_from_tape(const Instance& inst, const RandomTape& tape) {
  if (tape.variable != RandomTape::Variable::Z)
    throw std::invalid_argument("order_from_tape requires a Z tape");
  if (tape.values.size() != inst.items.size())
    throw std::invalid_argument("Z tape size does not match item count");
  std::vector<int> order(inst.items.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    if (tape.values[a] != tape.values[b]) return tape.values[a] < tape.values[b];
    return inst.items[a].id < inst.items[b].id;
  });
  return order;
}

/// One realized dual vector. Negative beta realizations are permitted (the
/// guarantees are in expectation) and surfaced via negative_beta_count.
struct DualSolution {
  const Instance* inst = nullptr;
  std::vector<double> alpha;  // per buyer
  std::vector<double> beta;   // per item

  double objective() const {
    double v = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i)
      v += to_double(inst->buyers[i].budget) * alpha[i];
    for (double b : beta) v += b;
    return v;
  }

  /// Constraint slack of edge k of item j: coef*alpha_i + beta_j - bid,
  /// where coef is weight for ongap and bid otherwise (1 for matching).
  double slack(int item, int k) const {
    const Edge& e = inst->items[item].edges[k];
    const double coef = to_double(inst->spend_coeff(e));
    return coef * alpha[e.buyer] + beta[item] - to_double(e.bid);
  }

  int negative_beta_count() const {
    int n = 0;
    for (double b : beta)
      if (b < 0.0) ++n;
    return n;
  }
};

namespace detail {

template <class Num>
void require_trace(const RunTrace<Num>& trace) {
  if (!trace.inst) throw std::invalid_argument("trace has no instance");
}

inline void require_u_tape(const Instance& inst, const RandomTape& tape) {
  if (tape.variable != RandomTape::Variable::U)
    throw std::invalid_argument("builder requires a U tape");
  if (tape.values.size() != inst.buyers.size())
    throw std::invalid_argument("U tape size does not match buyer count");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Worst-case water-filling dual (matching)
// ---------------------------------------------------------------------------

/// Threshold dual for water-filling: after each item, alpha_i = g(U_i) if the
/// buyer's level has reached U_i, and beta_j absorbs the step's value minus
/// the alpha movement, so dual equals primal identically.
template <class Num>
DualSolution build_dual_wf_worst(const RunTrace<Num>& trace, const RandomTape& tape,
                                 const GFunction& g) {
  detail::require_trace(trace);
  const Instance& inst = *trace.inst;
  if (inst.kind != Kind::matching)
    throw std::invalid_argument("build_dual_wf_worst requires a matching trace");
  detail::require_u_tape(inst, tape);

  DualSolution d;
  d.inst = &inst;
  d.alpha.assign(inst.buyers.size(), 0.0);
  d.beta.assign(inst.items.size(), 0.0);
  for (const auto& step : trace.steps) {
    double alpha_moved = 0.0;
    for (const auto& te : step.edges) {
      const double y_new = as_double(te.level_after);
      const double before = d.alpha[te.buyer];
      if (tape.values[te.buyer] <= y_new) d.alpha[te.buyer] = g.g(tape.values[te.buyer]);
      alpha_moved += d.alpha[te.buyer] - before;
    }
    d.beta[step.item] = as_double(step.gain) - alpha_moved;
  }
  return d;
}

// ---------------------------------------------------------------------------
// Expected duals (closed form over U)
// ---------------------------------------------------------------------------

struct ExpectedDualEdge {
  int item = -1;
  int k = -1;
  double mean_slack = 0.0;  // E[coef*alpha + beta], the constraint LHS
  double se = 0.0;
  double required = 0.0;    // F * rhs
};

struct ExpectedDual {
  enum class Mode { closed_form, monte_carlo };
  const Instance* inst = nullptr;
  std::vector<double> alpha;  // E[alpha_i]
  std::vector<double> beta;   // E[beta_j]
  Mode mode = Mode::closed_form;
  int trials = 0;            // monte_carlo only
  std::uint64_t seed = 0;    // monte_carlo only
  std::vector<ExpectedDualEdge> edges;

  double objective() const {
    double v = 0.0;
    for (std::size_t i = 0; i < alpha.size(); ++i)
      v += to_double(inst->buyers[i].budget) * alpha[i];
    for (double b : beta) v += b;
    return v;
  }
};

namespace detail {

/// E[alpha] = G(final normalized level); E[beta_j] = gain_j - sum of budget-
/// scaled G deltas over the step. `normalized` selects the vwf form.
template <class Num>
ExpectedDual expected_dual_threshold(const RunTrace<Num>& trace, const GFunction& g,
                                     bool normalized) {
  require_trace(trace);
  const Instance& inst = *trace.inst;
  ExpectedDual ed;
  ed.inst = &inst;
  ed.mode = ExpectedDual::Mode::closed_form;
  ed.alpha.assign(inst.buyers.size(), 0.0);
  ed.beta.assign(inst.items.size(), 0.0);

  std::vector<double> budget(inst.buyers.size(), 1.0);
  if (normalized)
    for (std::size_t i = 0; i < budget.size(); ++i)
      budget[i] = to_double(inst.buyers[i].budget);

  const auto norm = [&](double level, int buyer) {
    if (!normalized) return level;
    return budget[buyer] > 0.0 ? level / budget[buyer] : 1.0;
  };

  for (std::size_t i = 0; i < inst.buyers.size(); ++i)
    ed.alpha[i] = g.G(norm(as_double(trace.final_level[i]), static_cast<int>(i)));

  for (const auto& step : trace.steps) {
    double moved = 0.0;
    for (const auto& te : step.edges)
      moved += budget[te.buyer] * (g.G(norm(as_double(te.level_after), te.buyer)) -
                                   g.G(norm(as_double(te.level_before), te.buyer)));
    ed.beta[step.item] = as_double(step.gain) - moved;
  }

  for (std::size_t j = 0; j < inst.items.size(); ++j)
    for (std::size_t k = 0; k < inst.items[j].edges.size(); ++k) {
      const Edge& e = inst.items[j].edges[k];
      ExpectedDualEdge edge;
      edge.item = static_cast<int>(j);
      edge.k = static_cast<int>(k);
      const double coef = to_double(inst.spend_coeff(e));
      edge.mean_slack = coef * ed.alpha[e.buyer] + ed.beta[j];
      edge.required = g.F * to_double(e.bid);
      ed.edges.push_back(edge);
    }
  return ed;
}

}  // namespace detail

/// Closed-form expectation of build_dual_wf_worst over U: no sampling needed
/// because alpha is a threshold transform of an independent uniform.
template <class Num>
ExpectedDual expected_dual_wf_worst(const RunTrace<Num>& trace, const GFunction& g) {
  if (!trace.inst || trace.inst->kind != Kind::matching)
    throw std::invalid_argument("expected_dual_wf_worst requires a matching trace");
  return detail::expected_dual_threshold(trace, g, /*normalized=*/false);
}

// ---------------------------------------------------------------------------
// Random-order dual (Z tape)
// ---------------------------------------------------------------------------

/// Dual for allocation-monotone greedy runs under random order: alpha_i
/// accrues b*x*(1-g(Z_j))/B_i as item j is allocated, beta_j keeps the
/// g(Z_j) share of the step value. Requires the trace to have been produced
/// by the order the tape induces.
template <class Num>
DualSolution build_dual_random_order(const RunTrace<Num>& trace, const RandomTape& tape,
                                     const GFunction& g) {
  detail::require_trace(trace);
  const Instance& inst = *trace.inst;
  if (inst.kind != Kind::matching && inst.kind != Kind::onbap)
    throw std::invalid_argument("build_dual_random_order requires matching or onbap");
  if (trace.order != order_from_tape(inst, tape))
    throw std::invalid_argument("Z tape did not induce the trace's arrival order");

  DualSolution d;
  d.inst = &inst;
  d.alpha.assign(inst.buyers.size(), 0.0);
  d.beta.assign(inst.items.size(), 0.0);
  for (const auto& step : trace.steps) {
    const double z = tape.values[step.item];
    const auto& edges = inst.items[step.item].edges;
    for (const auto& te : step.edges) {
      const double dx = as_double(te.dx);
      if (dx == 0.0) continue;
      const double bid = to_double(edges[te.k].bid);
      const double budget = to_double(inst.buyers[te.buyer].budget);
      if (budget > 0.0) d.alpha[te.buyer] += bid * dx * (1.0 - g.g(z)) / budget;
    }
    d.beta[step.item] = as_double(step.gain) * g.g(z);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Worst-case virtual water-filling dual (onbap)
// ---------------------------------------------------------------------------

/// Normalized-threshold dual for virtual water-filling: alpha_i = g(U_i) once
/// the buyer's normalized level reaches U_i; beta_j absorbs the rest of the
/// step value at budget scale.
template <class Num>
DualSolution build_dual_vwf_worst(const RunTrace<Num>& trace, const RandomTape& tape,
                                  const GFunction& g) {
  detail::require_trace(trace);
  const Instance& inst = *trace.inst;
  if (inst.kind != Kind::matching && inst.kind != Kind::onbap)
    throw std::invalid_argument("build_dual_vwf_worst requires matching or onbap");
  detail::require_u_tape(inst, tape);

  std::vector<double> budget(inst.buyers.size());
  for (std::size_t i = 0; i < budget.size(); ++i) budget[i] = to_double(inst.buyers[i].budget);
  const auto norm = [&](double level, int buyer) {
    return budget[buyer] > 0.0 ? level / budget[buyer] : 1.0;
  };

  DualSolution d;
  d.inst = &inst;
  d.alpha.assign(inst.buyers.size(), 0.0);
  d.beta.assign(inst.items.size(), 0.0);
  for (const auto& step : trace.steps) {
    double alpha_moved = 0.0;  // budget-scaled
    for (const auto& te : step.edges) {
      const double ybar = norm(as_double(te.level_after), te.buyer);
      const double before = d.alpha[te.buyer];
      if (tape.values[te.buyer] <= ybar) d.alpha[te.buyer] = g.g(tape.values[te.buyer]);
      alpha_moved += budget[te.buyer] * (d.alpha[te.buyer] - before);
    }
    d.beta[step.item] = as_double(step.gain) - alpha_moved;
  }
  return d;
}

/// Closed-form expectation of build_dual_vwf_worst over U.
template <class Num>
ExpectedDual expected_dual_vwf_worst(const RunTrace<Num>& trace, const GFunction& g) {
  if (!trace.inst ||
      (trace.inst->kind != Kind::matching && trace.inst->kind != Kind::onbap))
    throw std::invalid_argument("expected_dual_vwf_worst requires matching or onbap");
  return detail::expected_dual_threshold(trace, g, /*normalized=*/true);
}

// ---------------------------------------------------------------------------
// Bounded-degree deterministic dual (matching)
// ---------------------------------------------------------------------------

struct BoundedDegreeCertificate {
  DualSolution dual;
  double sum_gain_sq = 0.0;  // sum over items of (step gain)^2, for band1
  double primal = 0.0;

  /// band1: dual <= primal/F - (g'(0)/(2dF)) * sum_gain_sq for max degree d.
  double band1_rhs(const GFunction& g, int degree) const {
    return primal / g.F - g.g_deriv0 / (2.0 * degree * g.F) * sum_gain_sq;
  }
};

/// Deterministic F-scaled dual for water-filling: alpha_i = G(y_i,new)/F,
/// beta_j = 1 - G(l_j)/F with l_j the common level the step's raised set
/// reached (1 when the item was not fully matched). Feasible outright:
/// alpha_i + beta_j >= 1 on every edge, no expectation needed.
template <class Num>
BoundedDegreeCertificate build_dual_bounded_degree(const RunTrace<Num>& trace,
                                                   const GFunction& g) {
  detail::require_trace(trace);
  const Instance& inst = *trace.inst;
  if (inst.kind != Kind::matching)
    throw std::invalid_argument("build_dual_bounded_degree requires a matching trace");

  BoundedDegreeCertificate cert;
  cert.dual.inst = &inst;
  cert.dual.alpha.assign(inst.buyers.size(), 0.0);
  cert.dual.beta.assign(inst.items.size(), 0.0);
  for (const auto& step : trace.steps) {
    const double gain = as_double(step.gain);
    cert.primal += gain;
    cert.sum_gain_sq += gain * gain;
    // The raised set ends at a common level (saturated members at 1, which
    // dominates it); the min over moved edges is that level, and every other
    // neighbor sits at or above it. Items leaving mass unplaced saturate the
    // whole neighborhood, so the min degenerates to 1 on its own.
    double raised_level = 1.0;
    bool moved = false;
    for (const auto& te : step.edges)
      if (as_double(te.dx) > 0.0) {
        const double lvl = as_double(te.level_after);
        raised_level = moved ? std::min(raised_level, lvl) : lvl;
        moved = true;
      }
    if (!moved) raised_level = 1.0;
    cert.dual.beta[step.item] = 1.0 - g.G(raised_level) / g.F;
    for (const auto& te : step.edges)
      cert.dual.alpha[te.buyer] = g.G(as_double(te.level_after)) / g.F;
  }
  return cert;
}

// ---------------------------------------------------------------------------
// I-greedy transferred dual (onbap / matching)
// ---------------------------------------------------------------------------

struct IGreedyCertificate {
  DualSolution dual;
  double factor = 1.0;        // 1 + max bid/budget over all edges
  double primal = 0.0;        // i_greedy objective
  double kept_dual = 0.0;     // dual restricted to assigned items = primal
  int skipped = 0;
  std::vector<int> order;     // the tape-induced arrival order used
};

/// Runs i_greedy under the tape's order, builds the random-order dual on the
/// subsequence of assigned items, and pays F * (max neighboring bid) for each
/// skipped item; the factor bounds how far the transferred dual can exceed
/// the i_greedy objective.
inline IGreedyCertificate build_dual_igreedy(const Instance& inst, const RandomTape& tape,
                                             const GFunction& g,
                                             std::span<const int> buyer_preference = {}) {
  if (inst.kind != Kind::matching && inst.kind != Kind::onbap)
    throw std::invalid_argument("build_dual_igreedy requires matching or onbap");
  const std::vector<int> order = order_from_tape(inst, tape);
  const RunResult<double> run = i_greedy<double>(inst, buyer_preference, order);

  IGreedyCertificate cert;
  cert.order = order;
  cert.dual.inst = &inst;
  cert.dual.alpha.assign(inst.buyers.size(), 0.0);
  cert.dual.beta.assign(inst.items.size(), 0.0);

  for (const auto& step : run.trace.steps) {
    const auto& edges = inst.items[step.item].edges;
    if (step.skipped) {
      ++cert.skipped;
      double max_bid = 0.0;
      for (const auto& e : edges) max_bid = std::max(max_bid, to_double(e.bid));
      cert.dual.beta[step.item] = g.F * max_bid;
      continue;
    }
    const double z = tape.values[step.item];
    for (const auto& te : step.edges) {
      if (te.dx == 0.0) continue;
      const double bid = to_double(edges[te.k].bid);
      const double budget = to_double(inst.buyers[te.buyer].budget);
      if (budget > 0.0) cert.dual.alpha[te.buyer] += bid * te.dx * (1.0 - g.g(z)) / budget;
    }
    cert.dual.beta[step.item] = step.gain * g.g(z);
    cert.primal += step.gain;
  }
  double kept_beta = 0.0;
  for (const auto& step : run.trace.steps)
    if (!step.skipped) kept_beta += cert.dual.beta[step.item];
  double alpha_part = 0.0;
  for (std::size_t i = 0; i < cert.dual.alpha.size(); ++i)
    alpha_part += to_double(inst.buyers[i].budget) * cert.dual.alpha[i];
  cert.kept_dual = alpha_part + kept_beta;

  double worst = 0.0;
  for (const auto& it : inst.items)
    for (const auto& e : it.edges) {
      if (inst.buyers[e.buyer].budget <= 0) continue;
      worst = std::max(worst, to_double(Rat(e.bid / inst.buyers[e.buyer].budget)));
    }
  cert.factor = 1.0 + worst;
  return cert;
}

// ---------------------------------------------------------------------------
// Certificate checking
// ---------------------------------------------------------------------------

enum class AlgoId { water_filling, virtual_wf, greedy, i_greedy, ranking };
enum class BuilderId { wf_worst, vwf_worst, random_order, bounded_degree, igreedy };

inline std::string algo_name(AlgoId a) {
  switch (a) {
    case AlgoId::water_filling: return "water-filling";
    case AlgoId::virtual_wf: return "virtual-wf";
    case AlgoId::greedy: return "greedy";
    case AlgoId::i_greedy: return "i-greedy";
    case AlgoId::ranking: return "ranking";
  }
  return "?";
}

inline std::string builder_name(BuilderId b) {
  switch (b) {
    case BuilderId::wf_worst: return "wf-worst";
    case BuilderId::vwf_worst: return "vwf-worst";
    case BuilderId::random_order: return "random-order";
    case BuilderId::bounded_degree: return "bounded-degree";
    case BuilderId::igreedy: return "igreedy";
  }
  return "?";
}

/// Tie handling for greedy runs inside certificate checks and the harness.
struct TieSpec {
  enum class Kind { global, per_item };
  Kind kind = Kind::global;
  std::uint64_t seed = 0;  // per_item only
};

struct CheckOptions {
  TieSpec tie;
  std::uint64_t ranking_seed = 1;    // priorities for ranking runs
  int worst_case_realizations = 64;  // cap on U realizations for property-1 checks
};

struct FeasReportEdge {
  std::string buyer, item;
  double mean_slack = 0.0;
  double se = 0.0;
  double required = 0.0;
  bool pass = false;
};

struct FeasibilityReport {
  std::string builder;
  double F = 0.0;
  // Max |dual - primal| over realizations; NaN when the certificate style has
  // no value-equality property (bounded-degree).
  double property1_residual = std::numeric_limits<double>::quiet_NaN();
  std::vector<FeasReportEdge> edges;

  std::string algo;
  int trials = 0;
  std::uint64_t seed = 0;
  int negative_beta_realizations = 0;
  double factor = 0.0;              // igreedy only
  double mean_dual = 0.0;           // igreedy only
  double mean_primal = 0.0;         // igreedy only
  int factor_violations = 0;        // igreedy: per-realization, informational
  bool factor_holds_in_mean = true; // igreedy
  double band1_lhs = 0.0, band1_rhs = 0.0;  // bounded-degree only
  bool band1_ok = true;

  bool all_edges_pass() const {
    for (const auto& e : edges)
      if (!e.pass) return false;
    return true;
  }

  nlohmann::json to_json() const {
    nlohmann::json doc;
    doc["builder"] = builder;
    doc["algo"] = algo;
    doc["F"] = F;
    doc["trials"] = trials;
    doc["seed"] = seed;
    if (std::isnan(property1_residual))
      doc["property1_residual"] = nullptr;
    else
      doc["property1_residual"] = property1_residual;
    doc["negative_beta_realizations"] = negative_beta_realizations;
    if (builder == "igreedy") {
      doc["factor"] = factor;
      doc["mean_dual"] = mean_dual;
      doc["mean_primal"] = mean_primal;
      doc["factor_violations"] = factor_violations;
      doc["factor_holds_in_mean"] = factor_holds_in_mean;
    }
    if (builder == "bounded-degree") {
      doc["band1_lhs"] = band1_lhs;
      doc["band1_rhs"] = band1_rhs;
      doc["band1_ok"] = band1_ok;
    }
    doc["edges"] = nlohmann::json::array();
    for (const auto& e : edges)
      doc["edges"].push_back({{"buyer", e.buyer},
                              {"item", e.item},
                              {"mean_slack", e.mean_slack},
                              {"se", e.se},
                              {"required", e.required},
                              {"pass", e.pass}});
    return doc;
  }
};

namespace detail {

struct EdgeIndex {
  std::vector<std::pair<int, int>> list;  // (item, k) in item-major order
  explicit EdgeIndex(const Instance& inst) {
    for (std::size_t j = 0; j < inst.items.size(); ++j)
      for (std::size_t k = 0; k < inst.items[j].edges.size(); ++k)
        list.emplace_back(static_cast<int>(j), static_cast<int>(k));
  }
};

struct McPartial {
  std::vector<double> sum, sumsq;
  double p1max = 0.0;
  int negbeta = 0;
  double dual_sum = 0.0, primal_sum = 0.0;
  int factor_viol = 0;

  void ensure(std::size_t n) {
    if (sum.empty()) {
      sum.assign(n, 0.0);
      sumsq.assign(n, 0.0);
    }
  }
  void merge(const McPartial& o) {
    if (o.sum.empty()) return;
    ensure(o.sum.size());
    for (std::size_t i = 0; i < sum.size(); ++i) {
      sum[i] += o.sum[i];
      sumsq[i] += o.sumsq[i];
    }
    p1max = std::max(p1max, o.p1max);
    negbeta += o.negbeta;
    dual_sum += o.dual_sum;
    primal_sum += o.primal_sum;
    factor_viol += o.factor_viol;
  }
};

inline double primal_of_trace_steps_double(const RunTrace<double>& tr) {
  double p = 0.0;
  for (const auto& s : tr.steps) p += s.gain;
  return p;
}

}  // namespace detail

/// Builds and checks a certificate for (algo, builder) on the instance.
/// Property 1 is checked per realization; Property 2 in closed form for the
/// worst-case builders (trials then only controls how many realizations feed
/// the Property-1 residual) and by Monte Carlo for the random-order builders
/// (pass rule: mean slack >= required - 3*SE).
inline FeasibilityReport check_certificate(const Instance& inst, AlgoId algo, BuilderId builder,
                                           int trials, std::uint64_t seed, const GFunction& g,
                                           const CheckOptions& opt = {}) {
  FeasibilityReport rep;
  rep.builder = builder_name(builder);
  rep.algo = algo_name(algo);
  rep.F = g.F;
  rep.trials = trials;
  rep.seed = seed;
  const detail::EdgeIndex eix(inst);

  const auto edge_ids = [&](int j, int k) {
    return std::pair<std::string, std::string>(inst.buyers[inst.items[j].edges[k].buyer].id,
                                               inst.items[j].id);
  };

  const auto run_fractional = [&](std::span<const int> order) {
    switch (algo) {
      case AlgoId::water_filling: return water_filling<double>(inst, order);
      case AlgoId::greedy:
        if (opt.tie.kind == TieSpec::Kind::per_item)
          return greedy_fractional<double>(inst, PerItemOrderTie{opt.tie.seed}, order);
        return greedy_fractional<double>(inst, GlobalOrderTie{}, order);
      case AlgoId::ranking: {
        const auto pri = random_priorities(inst.buyers.size(), opt.ranking_seed);
        return ranking<double>(inst, pri, order);
      }
      default:
        throw std::invalid_argument("algorithm/builder pairing not supported");
    }
  };

  switch (builder) {
    case BuilderId::wf_worst:
    case BuilderId::vwf_worst: {
      const bool vwf = builder == BuilderId::vwf_worst;
      if (vwf && algo != AlgoId::virtual_wf)
        throw std::invalid_argument("vwf-worst builder requires the virtual-wf algorithm");
      if (!vwf && algo != AlgoId::water_filling)
        throw std::invalid_argument("wf-worst builder requires the water-filling algorithm");
      const RunResult<double> run =
          vwf ? virtual_water_filling(inst, g) : water_filling<double>(inst);
      const ExpectedDual ed = vwf ? expected_dual_vwf_worst(run.trace, g)
                                  : expected_dual_wf_worst(run.trace, g);
      const double primal = detail::primal_of_trace_steps_double(run.trace);
      const int reals = std::clamp(trials, 1, std::max(1, opt.worst_case_realizations));
      double p1 = 0.0;
      for (int r = 0; r < reals; ++r) {
        const RandomTape u =
            make_tape(RandomTape::Variable::U, inst.buyers.size(), derive_seed(seed, r));
        const DualSolution d = vwf ? build_dual_vwf_worst(run.trace, u, g)
                                   : build_dual_wf_worst(run.trace, u, g);
        p1 = std::max(p1, std::abs(d.objective() - primal));
        rep.negative_beta_realizations += d.negative_beta_count();
      }
      rep.property1_residual = p1;
      for (const auto& e : ed.edges) {
        const auto [bid_id, item_id] = edge_ids(e.item, e.k);
        rep.edges.push_back({bid_id, item_id, e.mean_slack, 0.0, e.required,
                             e.mean_slack >= e.required - 1e-9});
      }
      break;
    }

    case BuilderId::bounded_degree: {
      if (algo != AlgoId::water_filling)
        throw std::invalid_argument("bounded-degree builder requires the water-filling algorithm");
      const RunResult<Rat> run = water_filling<Rat>(inst);
      const BoundedDegreeCertificate cert = build_dual_bounded_degree(run.trace, g);
      for (const auto& [j, k] : eix.list) {
        const auto [bid_id, item_id] = edge_ids(j, k);
        const double lhs =
            cert.dual.alpha[inst.items[j].edges[k].buyer] + cert.dual.beta[j];
        rep.edges.push_back({bid_id, item_id, lhs, 0.0, 1.0, lhs >= 1.0 - 1e-12});
      }
      const int d = std::max(1, inst.max_item_degree());
      rep.band1_lhs = cert.dual.objective();
      rep.band1_rhs = cert.band1_rhs(g, d);
      rep.band1_ok = rep.band1_lhs <= rep.band1_rhs + 1e-9;
      break;
    }

    case BuilderId::random_order: {
      if (algo != AlgoId::greedy && algo != AlgoId::ranking && algo != AlgoId::water_filling)
        throw std::invalid_argument(
            "random-order builder requires greedy, ranking, or water-filling");
      if (trials < 1)
        throw std::invalid_argument("Monte-Carlo-only builder requires trials >= 1");
      const std::size_t ne = eix.list.size();
      auto partial = run_trials<detail::McPartial>(trials, [&](int t, detail::McPartial& acc) {
        acc.ensure(ne);
        const RandomTape z =
            make_tape(RandomTape::Variable::Z, inst.items.size(), derive_seed(seed, t));
        const std::vector<int> order = order_from_tape(inst, z);
        const RunResult<double> run = run_fractional(order);
        const DualSolution d = build_dual_random_order(run.trace, z, g);
        const double primal = detail::primal_of_trace_steps_double(run.trace);
        acc.p1max = std::max(acc.p1max, std::abs(d.objective() - primal));
        acc.negbeta += d.negative_beta_count();
        for (std::size_t e = 0; e < ne; ++e) {
          const auto [j, k] = eix.list[e];
          const Edge& edge = inst.items[j].edges[k];
          const double lhs =
              to_double(inst.spend_coeff(edge)) * d.alpha[edge.buyer] + d.beta[j];
          acc.sum[e] += lhs;
          acc.sumsq[e] += lhs * lhs;
        }
      });
      rep.property1_residual = partial.p1max;
      rep.negative_beta_realizations = partial.negbeta;
      for (std::size_t e = 0; e < ne; ++e) {
        const auto [j, k] = eix.list[e];
        const auto [bid_id, item_id] = edge_ids(j, k);
        const double mean = partial.sum[e] / trials;
        double se = 0.0;
        if (trials > 1) {
          const double var =
              std::max(0.0, (partial.sumsq[e] - trials * mean * mean) / (trials - 1));
          se = std::sqrt(var / trials);
        }
        const double required = g.F * to_double(inst.items[j].edges[k].bid);
        rep.edges.push_back({bid_id, item_id, mean, se, required, mean >= required - 3.0 * se});
      }
      break;
    }

    case BuilderId::igreedy: {
      if (algo != AlgoId::i_greedy)
        throw std::invalid_argument("igreedy builder requires the i-greedy algorithm");
      if (trials < 1)
        throw std::invalid_argument("Monte-Carlo-only builder requires trials >= 1");
      const std::size_t ne = eix.list.size();
      auto partial = run_trials<detail::McPartial>(trials, [&](int t, detail::McPartial& acc) {
        acc.ensure(ne);
        const RandomTape z =
            make_tape(RandomTape::Variable::Z, inst.items.size(), derive_seed(seed, t));
        const IGreedyCertificate cert = build_dual_igreedy(inst, z, g);
        acc.p1max = std::max(acc.p1max, std::abs(cert.kept_dual - cert.primal));
        acc.negbeta += cert.dual.negative_beta_count();
        const double dual_obj = cert.dual.objective();
        acc.dual_sum += dual_obj;
        acc.primal_sum += cert.primal;
        if (dual_obj > cert.factor * cert.primal + 1e-12) ++acc.factor_viol;
        for (std::size_t e = 0; e < ne; ++e) {
          const auto [j, k] = eix.list[e];
          const Edge& edge = inst.items[j].edges[k];
          const double lhs =
              to_double(inst.spend_coeff(edge)) * cert.dual.alpha[edge.buyer] + cert.dual.beta[j];
          acc.sum[e] += lhs;
          acc.sumsq[e] += lhs * lhs;
        }
      });
      rep.property1_residual = partial.p1max;
      rep.negative_beta_realizations = partial.negbeta;
      rep.mean_dual = partial.dual_sum / trials;
      rep.mean_primal = partial.primal_sum / trials;
      rep.factor_violations = partial.factor_viol;
      {
        const RandomTape z0 =
            make_tape(RandomTape::Variable::Z, inst.items.size(), derive_seed(seed, 0));
        rep.factor = build_dual_igreedy(inst, z0, g).factor;
      }
      rep.factor_holds_in_mean = rep.mean_dual <= rep.factor * rep.mean_primal + 1e-9;
      for (std::size_t e = 0; e < ne; ++e) {
        const auto [j, k] = eix.list[e];
        const auto [bid_id, item_id] = edge_ids(j, k);
        const double mean = partial.sum[e] / trials;
        double se = 0.0;
        if (trials > 1) {
          const double var =
              std::max(0.0, (partial.sumsq[e] - trials * mean * mean) / (trials - 1));
          se = std::sqrt(var / trials);
        }
        const double required = g.F * to_double(inst.items[j].edges[k].bid);
        rep.edges.push_back({bid_id, item_id, mean, se, required, mean >= required - 3.0 * se});
      }
      break;
    }
  }
  return rep;
}

}  // namespace onalloc
