#pragma once

#include <cstdint>
#include <functional>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "onalloc/algorithms.hpp"
#include "onalloc/allocation.hpp"
#include "onalloc/gfunction.hpp"
#include "onalloc/instance.hpp"
#include "onalloc/rational.hpp"
#include "onalloc/tape.hpp"

namespace onalloc {

/// Edges split by exact bid-to-weight ratio: bucket s holds edges with
/// 2^s <= b/w < 2^{s+1}. Surrogate bids round b down to 2^s * w, losing at
/// most half the value. Zero-bid edges belong to no bucket.
struct BucketPartition {
  Rat eta{1};
  int num_buckets = 1;                        // 1 + floor(log2 eta)
  std::vector<std::vector<int>> bucket;       // per item, per edge; -1 for zero bid
  std::vector<std::vector<Rat>> rounded_bid;  // btilde = 2^s * w; 0 for zero bid
};

inline BucketPartition bucketize(const Instance& inst) {
  if (inst.kind != Kind::ongap)
    throw std::invalid_argument("bucketize requires an ongap instance");
  BucketPartition part;
  part.eta = inst.eta();  // throws when a positive bid has weight 0
  part.num_buckets = 1 + floor_log2_ratio(part.eta, Rat(1));
  part.bucket.resize(inst.items.size());
  part.rounded_bid.resize(inst.items.size());
  for (std::size_t j = 0; j < inst.items.size(); ++j) {
    const auto& edges = inst.items[j].edges;
    part.bucket[j].assign(edges.size(), -1);
    part.rounded_bid[j].assign(edges.size(), Rat(0));
    for (std::size_t k = 0; k < edges.size(); ++k) {
      if (edges[k].bid <= 0) continue;
      const int s = floor_log2_ratio(edges[k].bid, edges[k].weight);
      part.bucket[j][k] = s;
      part.rounded_bid[j][k] = pow2_rat(s) * edges[k].weight;
    }
  }
  return part;
}

/// Inner algorithm contract for the wrapper: runs on an onbap instance and
/// returns an exact feasible allocation.
using InnerAlgo = std::function<Allocation<Rat>(const Instance&)>;

inline InnerAlgo inner_virtual_wf(const GFunction& g) {
  return [g](const Instance& bi) { return to_exact(bi, virtual_water_filling(bi, g).alloc); };
}

inline InnerAlgo inner_greedy() {
  return [](const Instance& bi) { return greedy_fractional<Rat>(bi).alloc; };
}

inline InnerAlgo inner_igreedy() {
  return [](const Instance& bi) { return i_greedy<Rat>(bi).alloc; };
}

namespace detail {

struct BucketRestriction {
  Instance inst;                       // onbap: bids = weights = w on bucket-s edges
  std::vector<std::vector<int>> orig;  // per item, restricted edge -> original edge index
};

/// Keeps only bucket-s edges and presents them as an onbap instance in weight
/// space. Edges outside the bucket (zero-bid ones included) are dropped: they
/// are dominated choices and would only soak up budget.
inline BucketRestriction bucket_restricted(const Instance& inst, const BucketPartition& part,
                                           int s) {
  BucketRestriction r;
  r.inst.kind = Kind::onbap;
  r.inst.buyers = inst.buyers;
  r.inst.arrival = inst.arrival;
  r.inst.name = inst.name.empty() ? "" : inst.name + "#bucket" + std::to_string(s);
  r.inst.items.resize(inst.items.size());
  r.orig.resize(inst.items.size());
  for (std::size_t j = 0; j < inst.items.size(); ++j) {
    r.inst.items[j].id = inst.items[j].id;
    for (std::size_t k = 0; k < inst.items[j].edges.size(); ++k) {
      if (part.bucket[j][k] != s) continue;
      Edge e = inst.items[j].edges[k];
      e.bid = e.weight;  // weight-space onbap
      r.inst.items[j].edges.push_back(std::move(e));
      r.orig[j].push_back(static_cast<int>(k));
    }
  }
  r.inst.validate();
  return r;
}

/// Maps a bucket-restricted run back onto the original edge indexing.
inline Allocation<Rat> lift_bucket_allocation(const Instance& inst, const BucketRestriction& r,
                                              const Allocation<Rat>& a) {
  Allocation<Rat> out = Allocation<Rat>::zero(inst);
  for (std::size_t j = 0; j < r.orig.size(); ++j)
    for (std::size_t k = 0; k < r.orig[j].size(); ++k) out.x[j][r.orig[j][k]] = a.x[j][k];
  out.recompute_levels(inst);
  return out;
}

}  // namespace detail

struct RandomizedOngapResult {
  Allocation<Rat> alloc;  // on the original instance
  int chosen_bucket = 0;
  int num_buckets = 1;
  Rat eta{1};
};

/// Samples a bucket uniformly, runs the inner onbap algorithm on that bucket
/// in weight space, and lifts the result. Guarantee: expected value at least
/// c/(2(1+floor(log2 eta))) of OPT when the inner algorithm is c-competitive.
inline RandomizedOngapResult ongap_randomized(const Instance& inst, const InnerAlgo& inner,
                                              std::uint64_t seed) {
  const BucketPartition part = bucketize(inst);
  RandomizedOngapResult res;
  res.num_buckets = part.num_buckets;
  res.eta = part.eta;
  Rng rng(seed);
  res.chosen_bucket = static_cast<int>(rng.below(static_cast<std::size_t>(part.num_buckets)));
  const auto restriction = detail::bucket_restricted(inst, part, res.chosen_bucket);
  res.alloc = detail::lift_bucket_allocation(inst, restriction, inner(restriction.inst));
  return res;
}

struct DerandomizedOngapResult {
  Allocation<Rat> alloc;           // average of the per-bucket runs
  std::vector<Rat> bucket_values;  // original-bid value of each bucket run
  int num_buckets = 1;
  Rat eta{1};
};

/// Runs every bucket and averages the allocations exactly. The average is
/// feasible (a convex combination of feasible allocations) and its value is
/// the mean of the per-bucket values, so it meets the randomized wrapper's
/// expectation deterministically.
inline DerandomizedOngapResult ongap_derandomized(const Instance& inst, const InnerAlgo& inner) {
  const BucketPartition part = bucketize(inst);
  DerandomizedOngapResult res;
  res.num_buckets = part.num_buckets;
  res.eta = part.eta;
  res.alloc = Allocation<Rat>::zero(inst);
  const Rat share(1, part.num_buckets);
  for (int s = 0; s < part.num_buckets; ++s) {
    const auto restriction = detail::bucket_restricted(inst, part, s);
    const Allocation<Rat> lifted =
        detail::lift_bucket_allocation(inst, restriction, inner(restriction.inst));
    res.bucket_values.push_back(primal_value(inst, lifted));
    for (std::size_t j = 0; j < lifted.x.size(); ++j)
      for (std::size_t k = 0; k < lifted.x[j].size(); ++k)
        res.alloc.x[j][k] += share * lifted.x[j][k];
  }
  res.alloc.recompute_levels(inst);
  return res;
}

// ---------------------------------------------------------------------------
// The logarithmic-gap hard family
// ---------------------------------------------------------------------------

/// One buyer with budget 1; bundles t = 0..k-1 arrive in order, bundle t
/// holding 2^t items of bid 1 and weight 2^{-t}. Any single bundle fills the
/// budget exactly; later bundles are worth more, so an online algorithm must
/// hedge across all k of them.
inline Instance gen_hard_instance(int k) {
  if (k < 1) throw std::invalid_argument("gen_hard_instance requires k >= 1");
  Instance inst;
  inst.kind = Kind::ongap;
  inst.buyers.push_back({"b0", Rat(1)});
  int idx = 0;
  for (int t = 0; t < k; ++t) {
    const Rat w = pow2_rat(-t);
    for (int c = 0; c < (1 << t); ++c) {
      Item item;
      item.id = "q" + std::to_string(idx++);
      item.edges.push_back({0, Rat(1), w});
      inst.items.push_back(std::move(item));
    }
  }
  inst.arrival.resize(inst.items.size());
  std::iota(inst.arrival.begin(), inst.arrival.end(), 0);
  inst.name = "ongap_hard(" + std::to_string(k) + ")";
  inst.validate();
  return inst;
}

namespace detail {

/// Shape check for (possibly truncated) hard instances: one unit-budget buyer
/// and bundle t holding 2^t single-edge items of weight 2^-t, bid 1 or 0.
/// Returns k, or -1 when the shape does not match.
inline int hard_instance_k(const Instance& inst) {
  int k = 0;
  while ((1 << (k + 1)) - 1 <= static_cast<int>(inst.items.size())) ++k;
  if ((1 << k) - 1 != static_cast<int>(inst.items.size())) return -1;
  if (inst.kind != Kind::ongap || inst.buyers.size() != 1 || inst.buyers[0].budget != 1)
    return -1;
  int idx = 0;
  for (int t = 0; t < k; ++t) {
    const Rat w = pow2_rat(-t);
    for (int m = 0; m < (1 << t); ++m, ++idx) {
      const auto& edges = inst.items[static_cast<std::size_t>(idx)].edges;
      if (edges.size() != 1 || edges[0].buyer != 0 || edges[0].weight != w ||
          (edges[0].bid != 1 && edges[0].bid != 0))
        return -1;
    }
  }
  return k;
}

}  // namespace detail

/// The adversary's move: zero the bids of bundles s+1..k-1 (weights stay).
/// Items of bundles 0..s arrive before any zeroed item, so an online run is
/// unaffected on the prefix; OPT of the truncation is 2^s.
inline Instance truncate_hard_instance(const Instance& inst, int s) {
  const int k = detail::hard_instance_k(inst);
  if (k < 0)
    throw std::invalid_argument("truncate_hard_instance requires a gen_hard_instance input");
  if (s < 0 || s >= k)
    throw std::invalid_argument("truncate_hard_instance: bundle index out of range");
  Instance out = inst;
  const int keep = (1 << (s + 1)) - 1;  // items of bundles 0..s
  for (std::size_t j = static_cast<std::size_t>(keep); j < out.items.size(); ++j)
    for (auto& e : out.items[j].edges) e.bid = 0;
  out.name = inst.name + "#trunc" + std::to_string(s);
  out.validate();
  return out;
}

/// Per-bundle spent weight c_t of an allocation on a hard instance; feeds the
/// factor-revealing LP: any run with sum c_t <= 1 has
/// min_s sum_{t<=s} c_t 2^{t-s} <= alpha*(k) <= 2/k.
inline std::vector<Rat> hard_instance_bundle_spend(const Instance& inst,
                                                   const Allocation<Rat>& a) {
  const int k = detail::hard_instance_k(inst);
  if (k < 0)
    throw std::invalid_argument("hard_instance_bundle_spend requires a gen_hard_instance input");
  std::vector<Rat> c(static_cast<std::size_t>(k), Rat(0));
  int idx = 0;
  for (int t = 0; t < k; ++t)
    for (int m = 0; m < (1 << t); ++m, ++idx)
      for (std::size_t e = 0; e < a.x[idx].size(); ++e)
        c[static_cast<std::size_t>(t)] += inst.items[idx].edges[e].weight * a.x[idx][e];
  return c;
}

}  // namespace onalloc
