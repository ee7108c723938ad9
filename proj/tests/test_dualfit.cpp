#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "onalloc/dualfit.hpp"
#include "onalloc/harness.hpp"

using namespace onalloc;

namespace {

const GFunction& gexp() {
  static const GFunction g = g_exponential();
  return g;
}

Instance single_edge() {
  Instance inst;
  inst.kind = Kind::matching;
  inst.buyers = {{"b1", Rat(1)}};
  inst.items = {{"q1", {{0, Rat(1), Rat(1)}}}};
  inst.arrival = {0};
  inst.validate();
  return inst;
}

Instance onbap_single(Rat budget, Rat bid) {
  Instance inst;
  inst.kind = Kind::onbap;
  inst.buyers = {{"b1", budget}};
  inst.items = {{"q1", {{0, bid, bid}}}};
  inst.arrival = {0};
  inst.validate();
  return inst;
}

RandomTape u_tape(std::vector<double> values) {
  RandomTape t;
  t.variable = RandomTape::Variable::U;
  t.values = std::move(values);
  return t;
}

RandomTape z_tape(std::vector<double> values) {
  RandomTape t;
  t.variable = RandomTape::Variable::Z;
  t.values = std::move(values);
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Worst-case water-filling duals (exact over the U realization)
// ---------------------------------------------------------------------------

TEST_CASE("wf-worst dual on a single edge") {
  const Instance inst = single_edge();
  const auto run = water_filling<double>(inst);
  const DualSolution d = build_dual_wf_worst(run.trace, u_tape({0.3}), gexp());
  CHECK(d.alpha[0] == Catch::Approx(std::exp(-0.7)).margin(1e-12));
  CHECK(d.beta[0] == Catch::Approx(1.0 - std::exp(-0.7)).margin(1e-12));
  CHECK(d.objective() == Catch::Approx(1.0).margin(1e-12));
  CHECK(d.slack(0, 0) == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("wf-worst dual matches the primal for every threshold") {
  const Instance inst = single_edge();
  const auto run = water_filling<double>(inst);
  for (double u = 0.05; u < 1.0; u += 0.05) {
    const DualSolution d = build_dual_wf_worst(run.trace, u_tape({u}), gexp());
    CHECK(d.objective() == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("wf-worst dual leaves an uncrossed buyer at zero") {
  const Instance tri2 = gen_triangular(2);
  const auto run = water_filling<double>(tri2);
  const DualSolution d = build_dual_wf_worst(run.trace, u_tape({0.8, 0.3}), gexp());
  CHECK(d.alpha[0] == 0.0);  // final level 1/2 never reaches 0.8
  CHECK(d.alpha[1] == Catch::Approx(std::exp(-0.7)).margin(1e-12));
  CHECK(d.objective() == Catch::Approx(1.5).margin(1e-12));
}

TEST_CASE("wf-worst dual can go negative on beta without breaking value equality") {
  const Instance tri2 = gen_triangular(2);
  const auto run = water_filling<double>(tri2);
  // Both buyers cross 0.45 inside the first step; its beta dips negative.
  const DualSolution d = build_dual_wf_worst(run.trace, u_tape({0.45, 0.45}), gexp());
  CHECK(d.beta[0] < 0.0);
  CHECK(d.negative_beta_count() == 1);
  CHECK(d.objective() == Catch::Approx(1.5).margin(1e-12));
}

// ---------------------------------------------------------------------------
// Expected worst-case duals (closed form over U)
// ---------------------------------------------------------------------------

TEST_CASE("expected wf-worst dual on a single edge") {
  const double F = gexp().F;
  const Instance inst = single_edge();
  const auto run = water_filling<double>(inst);
  const ExpectedDual ed = expected_dual_wf_worst(run.trace, gexp());
  CHECK(ed.alpha[0] == Catch::Approx(F).margin(1e-12));
  CHECK(ed.beta[0] == Catch::Approx(std::exp(-1.0)).margin(1e-12));
  REQUIRE(ed.edges.size() == 1);
  CHECK(ed.edges[0].mean_slack == Catch::Approx(1.0).margin(1e-12));
  CHECK(ed.edges[0].required == Catch::Approx(F).margin(1e-12));
}

TEST_CASE("expected wf-worst dual on the triangular instance") {
  const auto& g = gexp();
  const Instance inst = gen_triangular(2);
  const auto run = water_filling<double>(inst);
  const ExpectedDual ed = expected_dual_wf_worst(run.trace, g);
  CHECK(ed.alpha[0] == Catch::Approx(g.G(0.5)).margin(1e-12));
  CHECK(ed.alpha[0] == Catch::Approx(0.2386512185).margin(1e-9));
  CHECK(ed.alpha[1] == Catch::Approx(g.F).margin(1e-12));
  CHECK(ed.beta[0] == Catch::Approx(1.0 - 2.0 * g.G(0.5)).margin(1e-12));
  CHECK(ed.beta[1] == Catch::Approx(0.5 - (g.F - g.G(0.5))).margin(1e-12));
  CHECK(ed.objective() == Catch::Approx(1.5).margin(1e-12));
  for (const auto& e : ed.edges) CHECK(e.mean_slack >= e.required - 1e-9);
}

TEST_CASE("closed-form expectation matches the empirical mean over tapes") {
  const Instance tri2 = gen_triangular(2);
  const auto run = water_filling<double>(tri2);
  const ExpectedDual ed = expected_dual_wf_worst(run.trace, gexp());

  const int trials = 100000;
  std::vector<double> asum(2, 0.0), asumsq(2, 0.0), bsum(2, 0.0), bsumsq(2, 0.0);
  for (int t = 0; t < trials; ++t) {
    const RandomTape u = make_tape(RandomTape::Variable::U, 2, derive_seed(77, t));
    const DualSolution d = build_dual_wf_worst(run.trace, u, gexp());
    for (int i = 0; i < 2; ++i) {
      asum[i] += d.alpha[i];
      asumsq[i] += d.alpha[i] * d.alpha[i];
      bsum[i] += d.beta[i];
      bsumsq[i] += d.beta[i] * d.beta[i];
    }
  }
  const auto within = [&](double closed, double sum, double sumsq) {
    const double mean = sum / trials;
    const double var = std::max(0.0, (sumsq - trials * mean * mean) / (trials - 1));
    const double se = std::sqrt(var / trials);
    CHECK(std::abs(closed - mean) <= 4.0 * se + 1e-12);
  };
  for (int i = 0; i < 2; ++i) {
    within(ed.alpha[i], asum[i], asumsq[i]);
    within(ed.beta[i], bsum[i], bsumsq[i]);
  }
}

// ---------------------------------------------------------------------------
// Random-order duals
// ---------------------------------------------------------------------------

TEST_CASE("random-order dual on a single edge") {
  const Instance inst = single_edge();
  const auto run = water_filling<double>(inst);
  const DualSolution d = build_dual_random_order(run.trace, z_tape({0.5}), gexp());
  CHECK(d.alpha[0] == Catch::Approx(1.0 - std::exp(-0.5)).margin(1e-12));
  CHECK(d.beta[0] == Catch::Approx(std::exp(-0.5)).margin(1e-12));
  CHECK(d.objective() == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("random-order dual rejects a mismatched tape") {
  const Instance inst = gen_triangular(2);
  const auto run = water_filling<double>(inst);  // identity order
  CHECK_THROWS_WITH(build_dual_random_order(run.trace, z_tape({0.9, 0.1}), gexp()),
                    Catch::Matchers::ContainsSubstring("did not induce"));
}

TEST_CASE("order_from_tape breaks ties by item id") {
  Instance inst;
  inst.kind = Kind::matching;
  inst.buyers = {{"b1", Rat(1)}};
  inst.items = {{"q2", {{0, Rat(1), Rat(1)}}}, {"q10", {}}};
  inst.arrival = {0, 1};
  inst.validate();
  // Equal Z values: "q10" sorts before "q2" as a string.
  CHECK(order_from_tape(inst, z_tape({0.5, 0.5})) == std::vector<int>{1, 0});
  CHECK(order_from_tape(inst, z_tape({0.1, 0.5})) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(order_from_tape(inst, u_tape({0.1, 0.5})), std::invalid_argument);
  CHECK_THROWS_AS(order_from_tape(inst, z_tape({0.1})), std::invalid_argument);
}

TEST_CASE("random-order property 1 holds exactly across algorithms") {
  const auto& g = gexp();
  for (AlgoId algo : {AlgoId::water_filling, AlgoId::greedy, AlgoId::ranking}) {
    const FeasibilityReport rep =
        check_certificate(gen_triangular(3), algo, BuilderId::random_order, 50, 5, g);
    INFO(rep.algo);
    CHECK(rep.property1_residual <= 1e-9);
  }
  const Instance ob = gen_random_onbap(3, 6, 0.7, 9, Rat(1, 2), Rat(2), Rat(1), Rat(3));
  const FeasibilityReport rep =
      check_certificate(ob, AlgoId::greedy, BuilderId::random_order, 50, 5, g);
  CHECK(rep.property1_residual <= 1e-9);
}

TEST_CASE("random-order expectation is feasible on the single edge") {
  const FeasibilityReport rep = check_certificate(
      single_edge(), AlgoId::water_filling, BuilderId::random_order, 5000, 11, gexp());
  REQUIRE(rep.edges.size() == 1);
  // E[alpha + beta] = 1 exactly; the sample mean must sit within 3 SE.
  CHECK(std::abs(rep.edges[0].mean_slack - 1.0) <= 3.0 * rep.edges[0].se + 1e-12);
  CHECK(rep.edges[0].pass);
}

TEST_CASE("greedy random-order certificate passes on the triangular instance") {
  const FeasibilityReport rep = check_certificate(
      gen_triangular(2), AlgoId::greedy, BuilderId::random_order, 20000, 3, gexp());
  CHECK(rep.all_edges_pass());
  CHECK(rep.property1_residual <= 1e-9);
  const FeasibilityReport per_item =
      check_certificate(gen_triangular(2), AlgoId::greedy, BuilderId::random_order, 500, 3,
                        gexp(), {{TieSpec::Kind::per_item, 3}});
  CHECK(per_item.all_edges_pass());
}

// ---------------------------------------------------------------------------
// Worst-case virtual water-filling duals
// ---------------------------------------------------------------------------

TEST_CASE("vwf-worst coincides with wf-worst on a unit instance") {
  const auto& g = gexp();
  const Instance inst = single_edge();
  const ExpectedDual wf = expected_dual_wf_worst(water_filling<double>(inst).trace, g);
  const ExpectedDual vwf =
      expected_dual_vwf_worst(virtual_water_filling(inst, g).trace, g);
  CHECK(vwf.alpha[0] == Catch::Approx(wf.alpha[0]).margin(1e-9));
  CHECK(vwf.beta[0] == Catch::Approx(wf.beta[0]).margin(1e-9));
}

TEST_CASE("vwf-worst dual on one saturating buyer") {
  const auto& g = gexp();
  const Instance inst = onbap_single(Rat(2), Rat(2));
  const auto run = virtual_water_filling(inst, g);
  const ExpectedDual ed = expected_dual_vwf_worst(run.trace, g);
  CHECK(ed.alpha[0] == Catch::Approx(g.F).margin(1e-9));
  CHECK(ed.beta[0] == Catch::Approx(2.0 * std::exp(-1.0)).margin(1e-9));
  REQUIRE(ed.edges.size() == 1);
  CHECK(ed.edges[0].mean_slack == Catch::Approx(2.0).margin(1e-9));
  CHECK(ed.edges[0].required == Catch::Approx(2.0 * g.F).margin(1e-12));

  // Per-realization value equality with the budget-scaled alpha.
  const DualSolution d = build_dual_vwf_worst(run.trace, u_tape({0.3}), g);
  CHECK(d.objective() == Catch::Approx(2.0).margin(1e-9));
  CHECK(d.alpha[0] == Catch::Approx(std::exp(-0.7)).margin(1e-9));
}

TEST_CASE("vwf-worst expectation is feasible on random onbap instances") {
  const auto& g = gexp();
  for (std::uint64_t s : {201ull, 202ull, 203ull, 204ull}) {
    const Instance inst = gen_random_onbap(3, 7, 0.7, s, Rat(1, 4), Rat(2), Rat(2), Rat(4));
    const FeasibilityReport rep =
        check_certificate(inst, AlgoId::virtual_wf, BuilderId::vwf_worst, 4, s, g);
    INFO(save_instance(inst));
    CHECK(rep.all_edges_pass());
    CHECK(rep.property1_residual <= 1e-9);
  }
}

// ---------------------------------------------------------------------------
// Bounded-degree duals
// ---------------------------------------------------------------------------

TEST_CASE("bounded-degree dual on a single edge") {
  const auto& g = gexp();
  const Instance inst = single_edge();
  const auto run = water_filling<Rat>(inst);
  const BoundedDegreeCertificate cert = build_dual_bounded_degree(run.trace, g);
  CHECK(cert.dual.alpha[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(cert.dual.beta[0] == Catch::Approx(0.0).margin(1e-12));
  CHECK(cert.dual.objective() == Catch::Approx(1.0).margin(1e-12));
  CHECK(cert.primal == Catch::Approx(1.0).margin(1e-12));
  CHECK(cert.sum_gain_sq == Catch::Approx(1.0).margin(1e-12));
  CHECK(cert.band1_rhs(g, 1) == Catch::Approx(1.2910).margin(1e-3));
  CHECK(cert.dual.objective() <= cert.band1_rhs(g, 1) + 1e-9);
}

TEST_CASE("bounded-degree certificate is feasible outright on low-degree instances") {
  const auto& g = gexp();
  std::vector<Instance> corpus{gen_triangular(2), single_edge()};
  for (std::uint64_t s : {211ull, 212ull, 213ull, 214ull})
    corpus.push_back(gen_random_matching(5, 7, 0.5, s, 3));
  for (const Instance& inst : corpus) {
    const FeasibilityReport rep =
        check_certificate(inst, AlgoId::water_filling, BuilderId::bounded_degree, 1, 0, g);
    INFO(inst.name);
    for (const auto& e : rep.edges) CHECK(e.mean_slack >= 1.0 - 1e-12);
    CHECK(rep.band1_ok);
    CHECK(std::isnan(rep.property1_residual));

    const auto run = water_filling<Rat>(inst);
    const BoundedDegreeCertificate cert = build_dual_bounded_degree(run.trace, g);
    if (cert.primal > 0.0) {
      CHECK(cert.sum_gain_sq >= cert.primal / 4.0 - 1e-9);
      CHECK(cert.primal / cert.dual.objective() > g.F);
    }
  }
}

// ---------------------------------------------------------------------------
// I-greedy certificates
// ---------------------------------------------------------------------------

TEST_CASE("i-greedy certificate accounts for a skipped item") {
  const auto& g = gexp();
  Instance inst;
  inst.kind = Kind::onbap;
  inst.buyers = {{"b1", Rat(1)}};
  inst.items = {{"q1", {{0, Rat(3, 5), Rat(3, 5)}}}, {"q2", {{0, Rat(3, 5), Rat(3, 5)}}}};
  inst.arrival = {0, 1};
  inst.validate();

  const IGreedyCertificate cert = build_dual_igreedy(inst, z_tape({0.2, 0.7}), g);
  CHECK(cert.skipped == 1);
  CHECK(cert.factor == Catch::Approx(1.6).margin(1e-12));
  CHECK(cert.primal == Catch::Approx(0.6).margin(1e-12));
  CHECK(std::abs(cert.kept_dual - cert.primal) <= 1e-9);
  // Skipped item carries beta = F * max bid; the total deliberately exceeds
  // factor * primal on this instance, which the checker reports honestly.
  CHECK(cert.dual.objective() == Catch::Approx(0.6 * (1.0 + g.F)).margin(1e-9));

  const FeasibilityReport rep =
      check_certificate(inst, AlgoId::i_greedy, BuilderId::igreedy, 200, 17, g);
  CHECK_FALSE(rep.factor_holds_in_mean);
  CHECK(rep.factor_violations == 200);
  CHECK(rep.mean_dual == Catch::Approx(0.6 * (1.0 + g.F)).margin(1e-9));
  CHECK(rep.mean_primal == Catch::Approx(0.6).margin(1e-12));
  CHECK(rep.property1_residual <= 1e-9);
}

TEST_CASE("i-greedy certificate with no skips reduces to the kept dual") {
  const auto& g = gexp();
  const IGreedyCertificate cert = build_dual_igreedy(single_edge(), z_tape({0.4}), g);
  CHECK(cert.skipped == 0);
  CHECK(cert.dual.objective() == Catch::Approx(cert.primal).margin(1e-12));
  CHECK(cert.factor == Catch::Approx(2.0).margin(1e-12));  // bid 1, budget 1

  const FeasibilityReport rep =
      check_certificate(single_edge(), AlgoId::i_greedy, BuilderId::igreedy, 2000, 19, g);
  CHECK(rep.factor_holds_in_mean);
  CHECK(rep.factor_violations == 0);
  CHECK(rep.all_edges_pass());
}

TEST_CASE("i-greedy certificate holds in the mean on a benign corpus") {
  const auto& g = gexp();
  for (std::uint64_t s : {221ull, 222ull, 223ull}) {
    const Instance inst = gen_random_onbap(3, 8, 0.6, s, Rat(1, 4), Rat(1, 2), Rat(2), Rat(4));
    const FeasibilityReport rep =
        check_certificate(inst, AlgoId::i_greedy, BuilderId::igreedy, 2000, s, g);
    INFO(save_instance(inst));
    CHECK(rep.factor_holds_in_mean);
    CHECK(rep.property1_residual <= 1e-9);
    CHECK(rep.all_edges_pass());
  }
}

TEST_CASE("i-greedy transfer feasibility degrades beyond the small-bid regime") {
  // The transferred certificate is a small-bid statement.  When several buyers
  // tie for an item's max bid, a tie-losing buyer can stay roomy (collecting no
  // alpha mass) while the item is still skipped once the winner fills; skips
  // concentrate at late positions where g(z) > F, and that deficit scales with
  // the skip probability, not with bid/budget.  At bid = budget/4 the checker
  // must flag it: edge (b3, q1) below has exact expected slack 0.29383 over
  // all 720 arrival orders against the required F * 1/2 = 0.31606.
  const auto& g = gexp();
  const Instance inst =
      gen_random_onbap(4, 6, 0.6, 10001, Rat(1, 4), Rat(1, 2), Rat(2), Rat(4));
  const FeasibilityReport rep =
      check_certificate(inst, AlgoId::i_greedy, BuilderId::igreedy, 20000, 42, g);
  CHECK(rep.property1_residual <= 1e-9);
  bool found = false;
  for (const auto& e : rep.edges) {
    if (e.buyer != "b3" || e.item != "q1") continue;
    found = true;
    CHECK_FALSE(e.pass);
    CHECK(e.mean_slack < 0.30);
    CHECK(e.required > 0.31);
  }
  CHECK(found);
  CHECK_FALSE(rep.all_edges_pass());
}

// ---------------------------------------------------------------------------
// check_certificate plumbing
// ---------------------------------------------------------------------------

TEST_CASE("check_certificate rejects incompatible pairings") {
  const auto& g = gexp();
  const Instance tri2 = gen_triangular(2);
  CHECK_THROWS_WITH(check_certificate(tri2, AlgoId::greedy, BuilderId::wf_worst, 1, 0, g),
                    Catch::Matchers::ContainsSubstring("water-filling"));
  CHECK_THROWS_WITH(
      check_certificate(tri2, AlgoId::water_filling, BuilderId::vwf_worst, 1, 0, g),
      Catch::Matchers::ContainsSubstring("virtual-wf"));
  CHECK_THROWS_WITH(
      check_certificate(tri2, AlgoId::i_greedy, BuilderId::random_order, 10, 0, g),
      Catch::Matchers::ContainsSubstring("random-order builder requires"));
  CHECK_THROWS_WITH(check_certificate(tri2, AlgoId::greedy, BuilderId::igreedy, 10, 0, g),
                    Catch::Matchers::ContainsSubstring("i-greedy"));
  CHECK_THROWS_WITH(
      check_certificate(tri2, AlgoId::greedy, BuilderId::bounded_degree, 1, 0, g),
      Catch::Matchers::ContainsSubstring("water-filling"));
}

TEST_CASE("Monte-Carlo builders require at least one trial") {
  const auto& g = gexp();
  const Instance tri2 = gen_triangular(2);
  CHECK_THROWS_WITH(
      check_certificate(tri2, AlgoId::greedy, BuilderId::random_order, 0, 0, g),
      Catch::Matchers::ContainsSubstring("requires trials >= 1"));
  CHECK_THROWS_WITH(check_certificate(tri2, AlgoId::i_greedy, BuilderId::igreedy, 0, 0, g),
                    Catch::Matchers::ContainsSubstring("requires trials >= 1"));
  // Worst-case builders still work with trials = 0 (clamped to one realization).
  CHECK_NOTHROW(check_certificate(tri2, AlgoId::water_filling, BuilderId::wf_worst, 0, 0, g));
}

TEST_CASE("feasibility reports serialize with the pinned schema") {
  const auto& g = gexp();
  const FeasibilityReport rep =
      check_certificate(gen_triangular(2), AlgoId::water_filling, BuilderId::wf_worst, 8, 1, g);
  CHECK(rep.all_edges_pass());
  CHECK(rep.property1_residual <= 1e-9);
  const nlohmann::json doc = rep.to_json();
  CHECK(doc["builder"] == "wf-worst");
  CHECK(doc["F"].get<double>() == Catch::Approx(g.F));
  CHECK(doc["property1_residual"].is_number());
  REQUIRE(doc["edges"].is_array());
  REQUIRE(doc["edges"].size() == 3);
  for (const auto& e : doc["edges"]) {
    CHECK(e.contains("buyer"));
    CHECK(e.contains("item"));
    CHECK(e.contains("mean_slack"));
    CHECK(e.contains("se"));
    CHECK(e.contains("required"));
    CHECK(e.contains("pass"));
  }

  const nlohmann::json bd =
      check_certificate(gen_triangular(2), AlgoId::water_filling, BuilderId::bounded_degree,
                        1, 0, g)
          .to_json();
  CHECK(bd["property1_residual"].is_null());
}
