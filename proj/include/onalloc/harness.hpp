#pragma once

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "onalloc/algorithms.hpp"
#include "onalloc/allocation.hpp"
#include "onalloc/dualfit.hpp"
#include "onalloc/gfunction.hpp"
#include "onalloc/instance.hpp"
#include "onalloc/lp.hpp"
#include "onalloc/ongap.hpp"
#include "onalloc/parallel.hpp"
#include "onalloc/tape.hpp"

namespace onalloc {

struct PermutationOverflow : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shortest round-tripping decimal form; keeps report files byte-stable.
inline std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, static_cast<std::size_t>(res.ptr - buf));
}

/// Everything needed to run one of the online algorithms as a black box.
struct AlgoSpec {
  AlgoId id = AlgoId::greedy;
  TieSpec tie;                      // greedy only
  std::uint64_t ranking_seed = 1;   // ranking only: fixed priority draw
  GFunction g = g_exponential();    // virtual-wf only
};

/// Exact objective of one run (virtual water-filling's floating-point output
/// is converted exactly, so the comparison against rational OPT stays sound).
inline Rat algo_value(const Instance& inst, const AlgoSpec& spec,
                      std::span<const int> order = {}) {
  switch (spec.id) {
    case AlgoId::water_filling:
      return primal_value(inst, water_filling<Rat>(inst, order).alloc);
    case AlgoId::virtual_wf:
      return primal_value(inst, to_exact(inst, virtual_water_filling(inst, spec.g, order).alloc));
    case AlgoId::greedy:
      if (spec.tie.kind == TieSpec::Kind::per_item)
        return primal_value(inst,
                            greedy_fractional<Rat>(inst, PerItemOrderTie{spec.tie.seed}, order).alloc);
      return primal_value(inst, greedy_fractional<Rat>(inst, GlobalOrderTie{}, order).alloc);
    case AlgoId::i_greedy:
      return primal_value(inst, i_greedy<Rat>(inst, {}, order).alloc);
    case AlgoId::ranking: {
      const auto pri = random_priorities(inst.buyers.size(), spec.ranking_seed);
      return primal_value(inst, ranking<Rat>(inst, pri, order).alloc);
    }
  }
  throw std::invalid_argument("unknown algorithm");
}

/// Double-precision objective for Monte Carlo volume.
inline double algo_value_fast(const Instance& inst, const AlgoSpec& spec,
                              std::span<const int> order = {}) {
  switch (spec.id) {
    case AlgoId::water_filling: {
      const auto run = water_filling<double>(inst, order);
      double v = 0.0;
      for (const auto& st : run.trace.steps) v += st.gain;
      return v;
    }
    case AlgoId::virtual_wf: {
      const auto run = virtual_water_filling(inst, spec.g, order);
      double v = 0.0;
      for (const auto& st : run.trace.steps) v += st.gain;
      return v;
    }
    case AlgoId::greedy: {
      const auto run = spec.tie.kind == TieSpec::Kind::per_item
                           ? greedy_fractional<double>(inst, PerItemOrderTie{spec.tie.seed}, order)
                           : greedy_fractional<double>(inst, GlobalOrderTie{}, order);
      double v = 0.0;
      for (const auto& st : run.trace.steps) v += st.gain;
      return v;
    }
    case AlgoId::i_greedy: {
      const auto run = i_greedy<double>(inst, {}, order);
      double v = 0.0;
      for (const auto& st : run.trace.steps) v += st.gain;
      return v;
    }
    case AlgoId::ranking: {
      const auto pri = random_priorities(inst.buyers.size(), spec.ranking_seed);
      const auto run = ranking<double>(inst, pri, order);
      double v = 0.0;
      for (const auto& st : run.trace.steps) v += st.gain;
      return v;
    }
  }
  throw std::invalid_argument("unknown algorithm");
}

/// Exact allocation of one run, for inspection and serialization.
inline Allocation<Rat> run_allocation(const Instance& inst, const AlgoSpec& spec,
                                      std::span<const int> order = {}) {
  switch (spec.id) {
    case AlgoId::water_filling: return water_filling<Rat>(inst, order).alloc;
    case AlgoId::virtual_wf:
      return to_exact(inst, virtual_water_filling(inst, spec.g, order).alloc);
    case AlgoId::greedy:
      if (spec.tie.kind == TieSpec::Kind::per_item)
        return greedy_fractional<Rat>(inst, PerItemOrderTie{spec.tie.seed}, order).alloc;
      return greedy_fractional<Rat>(inst, GlobalOrderTie{}, order).alloc;
    case AlgoId::i_greedy: return i_greedy<Rat>(inst, {}, order).alloc;
    case AlgoId::ranking: {
      const auto pri = random_priorities(inst.buyers.size(), spec.ranking_seed);
      return ranking<Rat>(inst, pri, order).alloc;
    }
  }
  throw std::invalid_argument("unknown algorithm");
}

// ---------------------------------------------------------------------------
// Random-order evaluation
// ---------------------------------------------------------------------------

enum class OrderMode { fixed, all_perms, sampled };

inline std::string order_mode_name(OrderMode m) {
  switch (m) {
    case OrderMode::fixed: return "fixed";
    case OrderMode::all_perms: return "all";
    case OrderMode::sampled: return "sample";
  }
  return "?";
}

struct RatioReport {
  std::string instance_name;
  std::string algo;
  std::string order_mode;
  long long trials = 0;  // orders evaluated: 1, n!, or the sample count
  Rat opt{0};
  double mean_ratio = 0.0;
  double min_ratio = 0.0;
  double std_err = 0.0;
  std::uint64_t seed = 0;

  bool exact = false;   // fixed and all modes evaluate in exact arithmetic
  Rat exact_mean{0};    // meaningful when exact
  Rat exact_min{0};

  std::string csv_row() const {
    std::string name = instance_name;  // the delimiter cannot appear in a field
    std::replace(name.begin(), name.end(), ',', ';');
    return name + "," + algo + "," + order_mode + "," + std::to_string(trials) + "," +
           rat_to_string(opt) + "," + fmt_double(mean_ratio) + "," + fmt_double(min_ratio) +
           "," + fmt_double(std_err) + "," + std::to_string(seed);
  }

  nlohmann::json to_json() const {
    return {{"instance", instance_name}, {"algo", algo},           {"order_mode", order_mode},
            {"trials", trials},          {"opt", rat_to_string(opt)}, {"mean_ratio", mean_ratio},
            {"min_ratio", min_ratio},    {"std_err", std_err},      {"seed", seed}};
  }
};

inline const char* ratio_csv_header() {
  return "instance,algo,order_mode,trials,opt,mean_ratio,min_ratio,std_err,seed";
}

namespace detail {

struct RatioPartial {
  double sum = 0.0, sumsq = 0.0;
  double mn = std::numeric_limits<double>::infinity();
  void merge(const RatioPartial& o) {
    sum += o.sum;
    sumsq += o.sumsq;
    mn = std::min(mn, o.mn);
  }
};

}  // namespace detail

/// Evaluates ALG/OPT over arrival orders: the given order, all n! orders
/// exactly (n <= 9), or seeded Z-tape samples. OPT is the exact LP optimum;
/// an all-zero instance (OPT = 0) scores ratio 1 by convention.
inline RatioReport run_random_order(const Instance& inst, const AlgoSpec& spec, OrderMode mode,
                                    int trials, std::uint64_t seed) {
  RatioReport rep;
  rep.instance_name = inst.name.empty() ? "unnamed" : inst.name;
  rep.algo = algo_name(spec.id);
  rep.order_mode = order_mode_name(mode);
  rep.seed = seed;
  rep.opt = offline_opt(inst).value;

  const auto exact_ratio = [&](const Rat& v) { return rep.opt == 0 ? Rat(1) : Rat(v / rep.opt); };

  switch (mode) {
    case OrderMode::fixed: {
      const Rat r = exact_ratio(algo_value(inst, spec));
      rep.trials = 1;
      rep.exact = true;
      rep.exact_mean = rep.exact_min = r;
      rep.mean_ratio = rep.min_ratio = to_double(r);
      rep.std_err = 0.0;
      break;
    }
    case OrderMode::all_perms: {
      const std::size_t n = inst.items.size();
      if (n > 9)
        throw PermutationOverflow("all-permutations mode supports at most 9 items (" +
                                  std::to_string(n) + " given)");
      std::vector<int> perm(n);
      std::iota(perm.begin(), perm.end(), 0);
      long long count = 0;
      Rat sum(0), mn(0);
      bool first = true;
      do {
        const Rat r = exact_ratio(algo_value(inst, spec, perm));
        sum += r;
        if (first || r < mn) mn = r;
        first = false;
        ++count;
      } while (std::next_permutation(perm.begin(), perm.end()));
      rep.trials = count;
      rep.exact = true;
      rep.exact_mean = count > 0 ? Rat(sum / count) : Rat(1);
      rep.exact_min = first ? Rat(1) : mn;
      rep.mean_ratio = to_double(rep.exact_mean);
      rep.min_ratio = to_double(rep.exact_min);
      rep.std_err = 0.0;
      break;
    }
    case OrderMode::sampled: {
      if (trials < 1) throw std::invalid_argument("sampled mode requires trials >= 1");
      const double opt_d = to_double(rep.opt);
      const auto partial =
          run_trials<detail::RatioPartial>(trials, [&](int t, detail::RatioPartial& acc) {
            const RandomTape z =
                make_tape(RandomTape::Variable::Z, inst.items.size(), derive_seed(seed, t));
            const std::vector<int> order = order_from_tape(inst, z);
            const double v = algo_value_fast(inst, spec, order);
            const double r = opt_d == 0.0 ? 1.0 : v / opt_d;
            acc.sum += r;
            acc.sumsq += r * r;
            acc.mn = std::min(acc.mn, r);
          });
      rep.trials = trials;
      rep.mean_ratio = partial.sum / trials;
      rep.min_ratio = partial.mn;
      if (trials > 1) {
        const double var = std::max(
            0.0, (partial.sumsq - trials * rep.mean_ratio * rep.mean_ratio) / (trials - 1));
        rep.std_err = std::sqrt(var / trials);
      }
      break;
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Instance generators
// ---------------------------------------------------------------------------

namespace detail {

inline std::string gen_buyer_id(int i) { return "b" + std::to_string(i + 1); }
inline std::string gen_item_id(int j) { return "q" + std::to_string(j + 1); }

inline void finish_generated(Instance& inst, std::string name) {
  inst.arrival.resize(inst.items.size());
  std::iota(inst.arrival.begin(), inst.arrival.end(), 0);
  inst.name = std::move(name);
  inst.validate();
}

/// Uniform draw from the quarter-integer grid within [lo, hi].
inline Rat quarter_grid(Rng& rng, const Rat& lo, const Rat& hi) {
  const Rat span4 = (hi - lo) * 4;
  const BigInt steps = boost::multiprecision::numerator(span4) /
                       boost::multiprecision::denominator(span4);
  const auto count = steps.convert_to<std::size_t>() + 1;
  return lo + Rat(static_cast<long>(rng.below(count)), 4L);
}

}  // namespace detail

/// The tight family for water-filling: item j may go to buyers j..n, so early
/// items hedge across everyone and the ratio tends to 1 - 1/e from above.
inline Instance gen_triangular(int n) {
  if (n < 1) throw std::invalid_argument("triangular family requires n >= 1");
  Instance inst;
  inst.kind = Kind::matching;
  for (int i = 0; i < n; ++i) inst.buyers.push_back({detail::gen_buyer_id(i), Rat(1)});
  for (int j = 0; j < n; ++j) {
    Item item;
    item.id = detail::gen_item_id(j);
    for (int i = j; i < n; ++i) item.edges.push_back({i, Rat(1), Rat(1)});
    inst.items.push_back(std::move(item));
  }
  detail::finish_generated(inst, "triangular(" + std::to_string(n) + ")");
  return inst;
}

inline Instance gen_complete(int n, int m) {
  if (n < 1 || m < 1) throw std::invalid_argument("complete family requires n, m >= 1");
  Instance inst;
  inst.kind = Kind::matching;
  for (int i = 0; i < n; ++i) inst.buyers.push_back({detail::gen_buyer_id(i), Rat(1)});
  for (int j = 0; j < m; ++j) {
    Item item;
    item.id = detail::gen_item_id(j);
    for (int i = 0; i < n; ++i) item.edges.push_back({i, Rat(1), Rat(1)});
    inst.items.push_back(std::move(item));
  }
  detail::finish_generated(inst, "complete(" + std::to_string(n) + "x" + std::to_string(m) + ")");
  return inst;
}

/// Erdos-Renyi bipartite matching instance; max_degree > 0 caps each item's
/// neighborhood by a seeded subsample.
inline Instance gen_random_matching(int n, int m, double p, std::uint64_t seed,
                                    int max_degree = 0) {
  if (n < 1 || m < 1) throw std::invalid_argument("random_matching requires n, m >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("random_matching requires p in [0,1]");
  Instance inst;
  inst.kind = Kind::matching;
  for (int i = 0; i < n; ++i) inst.buyers.push_back({detail::gen_buyer_id(i), Rat(1)});
  for (int j = 0; j < m; ++j) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j)));
    std::vector<int> nbrs;
    for (int i = 0; i < n; ++i)
      if (rng.uniform01() < p) nbrs.push_back(i);
    if (max_degree > 0 && static_cast<int>(nbrs.size()) > max_degree) {
      rng.shuffle(nbrs);
      nbrs.resize(static_cast<std::size_t>(max_degree));
      std::sort(nbrs.begin(), nbrs.end());
    }
    Item item;
    item.id = detail::gen_item_id(j);
    for (int i : nbrs) item.edges.push_back({i, Rat(1), Rat(1)});
    inst.items.push_back(std::move(item));
  }
  detail::finish_generated(inst, "random_matching(" + std::to_string(n) + "x" +
                                     std::to_string(m) + ")");
  return inst;
}

/// Random budgeted-allocation instance; bids and budgets drawn from the
/// quarter-integer grids within the given ranges (weight = bid).
inline Instance gen_random_onbap(int n, int m, double p, std::uint64_t seed, const Rat& bid_lo,
                                 const Rat& bid_hi, const Rat& budget_lo, const Rat& budget_hi) {
  if (n < 1 || m < 1) throw std::invalid_argument("random_onbap requires n, m >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("random_onbap requires p in [0,1]");
  if (bid_lo <= 0 || bid_hi < bid_lo || budget_lo <= 0 || budget_hi < budget_lo)
    throw std::invalid_argument("random_onbap requires 0 < lo <= hi ranges");
  Instance inst;
  inst.kind = Kind::onbap;
  Rng brng(derive_seed(seed, 0x6275646765ULL));
  for (int i = 0; i < n; ++i)
    inst.buyers.push_back({detail::gen_buyer_id(i), detail::quarter_grid(brng, budget_lo, budget_hi)});
  for (int j = 0; j < m; ++j) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j) + 1));
    Item item;
    item.id = detail::gen_item_id(j);
    for (int i = 0; i < n; ++i) {
      if (rng.uniform01() >= p) continue;
      const Rat bid = detail::quarter_grid(rng, bid_lo, bid_hi);
      item.edges.push_back({i, bid, bid});
    }
    inst.items.push_back(std::move(item));
  }
  detail::finish_generated(inst,
                           "random_onbap(" + std::to_string(n) + "x" + std::to_string(m) + ")");
  return inst;
}

/// Random generalized-assignment instance: weights divide bids by a ratio
/// from {1, 3/2, 2, 3, 4}, so eta <= 4 and buckets stay small.
inline Instance gen_random_ongap(int n, int m, double p, std::uint64_t seed) {
  if (n < 1 || m < 1) throw std::invalid_argument("random_ongap requires n, m >= 1");
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("random_ongap requires p in [0,1]");
  static const Rat ratios[] = {Rat(1), Rat(3, 2), Rat(2), Rat(3), Rat(4)};
  Instance inst;
  inst.kind = Kind::ongap;
  Rng brng(derive_seed(seed, 0x6275646765ULL));
  for (int i = 0; i < n; ++i)
    inst.buyers.push_back({detail::gen_buyer_id(i), detail::quarter_grid(brng, Rat(1), Rat(3))});
  for (int j = 0; j < m; ++j) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(j) + 1));
    Item item;
    item.id = detail::gen_item_id(j);
    for (int i = 0; i < n; ++i) {
      if (rng.uniform01() >= p) continue;
      const Rat bid = detail::quarter_grid(rng, Rat(1, 2), Rat(2));
      const Rat& ratio = ratios[rng.below(std::size(ratios))];
      item.edges.push_back({i, bid, Rat(bid / ratio)});
    }
    inst.items.push_back(std::move(item));
  }
  detail::finish_generated(inst,
                           "random_ongap(" + std::to_string(n) + "x" + std::to_string(m) + ")");
  return inst;
}

inline Instance gen_ongap_hard(int k) { return gen_hard_instance(k); }

}  // namespace onalloc
