#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "onalloc/allocation.hpp"
#include "onalloc/gfunction.hpp"
#include "onalloc/instance.hpp"
#include "onalloc/rational.hpp"
#include "onalloc/tape.hpp"

using namespace onalloc;

// ---------------------------------------------------------------------------
// Rationals
// ---------------------------------------------------------------------------

TEST_CASE("parse_rational handles fractions, decimals, exponents") {
  CHECK(parse_rational("3/4") == Rat(3, 4));
  CHECK(parse_rational("-2/8") == Rat(-1, 4));
  CHECK(parse_rational("+5/5") == Rat(1));
  CHECK(parse_rational("0.25") == Rat(1, 4));
  CHECK(parse_rational("-0.1") == Rat(-1, 10));
  CHECK(parse_rational("1e-3") == Rat(1, 1000));
  CHECK(parse_rational("2.5e2") == Rat(250));
  CHECK(parse_rational("  7 ") == Rat(7));
  CHECK(parse_rational(".5") == Rat(1, 2));
  CHECK(parse_rational("5.") == Rat(5));
}

TEST_CASE("parse_rational rejects malformed input") {
  CHECK_THROWS_AS(parse_rational(""), ParseError);
  CHECK_THROWS_AS(parse_rational("abc"), ParseError);
  CHECK_THROWS_AS(parse_rational("1/0"), ParseError);
  CHECK_THROWS_AS(parse_rational("1/2/3"), ParseError);
  CHECK_THROWS_AS(parse_rational("1e99999"), ParseError);
  CHECK_THROWS_AS(parse_rational("."), ParseError);
  CHECK_THROWS_AS(parse_rational("--1"), ParseError);
}

TEST_CASE("rat_to_string is canonical and round-trips") {
  CHECK(rat_to_string(Rat(7, 3)) == "7/3");
  CHECK(rat_to_string(Rat(5)) == "5");
  CHECK(rat_to_string(Rat(-1, 2)) == "-1/2");
  CHECK(rat_to_string(Rat(0)) == "0");
  for (const Rat& v : {Rat(22, 7), Rat(-3, 8), Rat(1000000007), Rat(0)})
    CHECK(parse_rational(rat_to_string(v)) == v);
}

TEST_CASE("rat_from_double is exact on dyadics") {
  CHECK(rat_from_double(0.5) == Rat(1, 2));
  CHECK(rat_from_double(-0.375) == Rat(-3, 8));
  CHECK(rat_from_double(3.0) == Rat(3));
  CHECK(rat_from_double(0.0) == Rat(0));
  // A non-dyadic double maps to its exact binary value, not the decimal.
  CHECK(rat_from_double(0.1) != Rat(1, 10));
  CHECK(to_double(rat_from_double(0.1)) == 0.1);
}

TEST_CASE("rat_from_double_shortest recovers decimal literals") {
  CHECK(rat_from_double_shortest(0.1) == Rat(1, 10));
  CHECK(rat_from_double_shortest(0.6) == Rat(3, 5));
  CHECK(rat_from_double_shortest(2.0) == Rat(2));
  CHECK_THROWS_AS(rat_from_double_shortest(std::nan("")), ParseError);
}

TEST_CASE("pow2_rat and floor_log2_ratio") {
  CHECK(pow2_rat(0) == Rat(1));
  CHECK(pow2_rat(3) == Rat(8));
  CHECK(pow2_rat(-2) == Rat(1, 4));
  CHECK(floor_log2_ratio(Rat(1), Rat(1)) == 0);
  CHECK(floor_log2_ratio(Rat(3), Rat(1)) == 1);
  CHECK(floor_log2_ratio(Rat(4), Rat(1)) == 2);
  CHECK(floor_log2_ratio(Rat(7, 2), Rat(1)) == 1);
  CHECK(floor_log2_ratio(Rat(2), Rat(1, 4)) == 3);
  // Exactly at a power of two the floor steps up.
  CHECK(floor_log2_ratio(Rat(8), Rat(1)) == 3);
  CHECK_THROWS_AS(floor_log2_ratio(Rat(1, 2), Rat(1)), std::invalid_argument);
  CHECK_THROWS_AS(floor_log2_ratio(Rat(1), Rat(0)), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// g-function
// ---------------------------------------------------------------------------

TEST_CASE("exponential schedule satisfies the defining identity") {
  const GFunction f = g_exponential();
  CHECK(gfunction_max_residual(f) <= 1e-12);
  CHECK(f.F == Catch::Approx(1.0 - std::exp(-1.0)).epsilon(1e-15));
  CHECK(f.G(1.0) == Catch::Approx(0.6321205588).margin(1e-9));
  CHECK(f.G(0.0) == Catch::Approx(0.0).margin(1e-15));
  CHECK(f.g(1.0) == Catch::Approx(1.0).margin(1e-15));
  CHECK_NOTHROW(validate_gfunction(f));
}

TEST_CASE("validate_gfunction rejects malformed schedules") {
  GFunction f = g_exponential();
  SECTION("g(1) != 1") {
    f.g = [](double x) { return 0.5 * x; };
    CHECK_THROWS_AS(validate_gfunction(f), std::invalid_argument);
  }
  SECTION("non-monotone g") {
    f.g = [](double x) { return x < 0.5 ? 1.0 - x : x; };
    CHECK_THROWS_AS(validate_gfunction(f), std::invalid_argument);
  }
  SECTION("broken integral identity") {
    f.G = [](double t) { return t; };
    CHECK_THROWS_AS(validate_gfunction(f), std::invalid_argument);
  }
  SECTION("missing callables") {
    f.g = nullptr;
    CHECK_THROWS_AS(validate_gfunction(f), std::invalid_argument);
  }
}

TEST_CASE("gfunction_inverse inverts g on its range") {
  const GFunction f = g_exponential();
  for (double t : {0.4, 0.5, 0.7, 0.9, 0.99})
    CHECK(f.g(gfunction_inverse(f, t)) == Catch::Approx(t).margin(1e-12));
  CHECK(gfunction_inverse(f, 0.1) == 0.0);   // below g(0) = 1/e
  CHECK(gfunction_inverse(f, 1.5) == 1.0);   // above g(1) = 1
  CHECK(std::isnan(gfunction_inverse(f, std::nan(""))));

  GFunction bisect = f;
  bisect.exponential = false;  // force the generic path
  for (double t : {0.4, 0.62, 0.95})
    CHECK(gfunction_inverse(bisect, t) ==
          Catch::Approx(gfunction_inverse(f, t)).margin(1e-12));
}

// ---------------------------------------------------------------------------
// Rng and tapes
// ---------------------------------------------------------------------------

TEST_CASE("Rng is deterministic and in range") {
  Rng a(42), b(42), c(43);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const double x = a.uniform01(), y = b.uniform01(), z = c.uniform01();
    all_equal = all_equal && x == y;
    any_diff = any_diff || x != z;
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("Rng::below is bounded and rejects zero") {
  Rng r(7);
  for (int i = 0; i < 200; ++i) CHECK(r.below(13) < 13);
  CHECK_THROWS_AS(r.below(0), std::invalid_argument);
}

TEST_CASE("Rng::shuffle is a deterministic permutation") {
  std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7}, v2 = v1;
  Rng a(9), b(9);
  a.shuffle(v1);
  b.shuffle(v2);
  CHECK(v1 == v2);
  std::vector<int> sorted = v1;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}

TEST_CASE("derive_seed separates streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t s = 0; s < 50; ++s) seen.insert(derive_seed(123, s));
  CHECK(seen.size() == 50);
  CHECK(derive_seed(123, 0) == derive_seed(123, 0));
  CHECK(derive_seed(123, 0) != derive_seed(124, 0));
}

TEST_CASE("make_tape is deterministic with bounded values") {
  const RandomTape t1 = make_tape(RandomTape::Variable::Z, 32, 5);
  const RandomTape t2 = make_tape(RandomTape::Variable::Z, 32, 5);
  CHECK(t1.values == t2.values);
  CHECK(t1.seed == 5);
  CHECK(t1.variable == RandomTape::Variable::Z);
  CHECK(t1.values.size() == 32);
  for (double v : t1.values) {
    CHECK(v >= 0.0);
    CHECK(v < 1.0);
  }
  CHECK(make_tape(RandomTape::Variable::U, 32, 6).values !=
        make_tape(RandomTape::Variable::U, 32, 7).values);
}

// ---------------------------------------------------------------------------
// Instances
// ---------------------------------------------------------------------------

static const char* kTri2 = R"({
  "kind": "matching",
  "buyers": [{"id": "b1"}, {"id": "b2"}],
  "items": [
    {"id": "q1", "edges": [{"buyer": "b1"}, {"buyer": "b2"}]},
    {"id": "q2", "edges": [{"buyer": "b2"}]}
  ]
})";

TEST_CASE("load_instance applies defaults") {
  const Instance inst = load_instance(kTri2);
  CHECK(inst.kind == Kind::matching);
  REQUIRE(inst.buyers.size() == 2);
  CHECK(inst.buyers[0].budget == Rat(1));
  REQUIRE(inst.items.size() == 2);
  CHECK(inst.items[0].edges.size() == 2);
  CHECK(inst.items[0].edges[0].bid == Rat(1));
  CHECK(inst.items[0].edges[0].weight == Rat(1));
  CHECK(inst.arrival == std::vector<int>{0, 1});
  CHECK(inst.bids_within_budgets);
  CHECK(inst.warnings.empty());
}

TEST_CASE("load_instance parses onbap with explicit arrival") {
  const Instance inst = load_instance(R"({
    "kind": "onbap",
    "buyers": [{"id": "a", "budget": "5/2"}, {"id": "b", "budget": 3}],
    "items": [
      {"id": "x", "edges": [{"buyer": "a", "bid": 0.5}]},
      {"id": "y", "edges": [{"buyer": "b", "bid": "3/4"}]}
    ],
    "arrival": ["y", "x"]
  })");
  CHECK(inst.buyers[0].budget == Rat(5, 2));
  CHECK(inst.items[0].edges[0].bid == Rat(1, 2));   // 0.5 read exactly
  CHECK(inst.items[0].edges[0].weight == Rat(1, 2));  // defaults to the bid
  CHECK(inst.items[1].edges[0].bid == Rat(3, 4));
  CHECK(inst.arrival == std::vector<int>{1, 0});
}

TEST_CASE("save/load round trip preserves the instance") {
  Instance inst;
  inst.kind = Kind::ongap;
  inst.buyers = {{"b1", Rat(2)}, {"b2", Rat(1)}};
  Item q1{"q1", {{0, Rat(3), Rat(1)}, {1, Rat(1, 2), Rat(1, 4)}}};
  Item q2{"q2", {{1, Rat(0), Rat(7)}}};  // zero bid, free weight choice
  inst.items = {q1, q2};
  inst.arrival = {1, 0};
  inst.validate();
  const Instance back = load_instance(save_instance(inst));
  CHECK(back == inst);

  const Instance tri = load_instance(kTri2);
  CHECK(load_instance(save_instance(tri)) == tri);
}

TEST_CASE("load_instance rejects malformed documents") {
  CHECK_THROWS_AS(load_instance("not json"), ParseError);
  CHECK_THROWS_AS(load_instance("[]"), ParseError);
  CHECK_THROWS_AS(load_instance(R"({"kind": "nope", "buyers": [], "items": []})"),
                  ValidationError);
  CHECK_THROWS_AS(load_instance(R"({"buyers": [], "items": []})"), ValidationError);
  CHECK_THROWS_AS(load_instance(R"({"kind": "matching", "items": []})"), ValidationError);
  CHECK_THROWS_AS(load_instance(R"({"kind": "matching", "buyers": []})"), ValidationError);
  // Unknown buyer reference.
  CHECK_THROWS_AS(load_instance(R"({
    "kind": "matching", "buyers": [{"id": "b1"}],
    "items": [{"id": "q1", "edges": [{"buyer": "zz"}]}]
  })"),
                  ValidationError);
  // Unknown arrival id.
  CHECK_THROWS_AS(load_instance(R"({
    "kind": "matching", "buyers": [{"id": "b1"}],
    "items": [{"id": "q1", "edges": [{"buyer": "b1"}]}],
    "arrival": ["q9"]
  })"),
                  ValidationError);
  // Arrival missing an item.
  CHECK_THROWS_AS(load_instance(R"({
    "kind": "matching", "buyers": [{"id": "b1"}],
    "items": [{"id": "q1", "edges": [{"buyer": "b1"}]}, {"id": "q2"}],
    "arrival": ["q1"]
  })"),
                  ValidationError);
  // Bad rational.
  CHECK_THROWS_AS(load_instance(R"({
    "kind": "onbap", "buyers": [{"id": "b1", "budget": "x/y"}], "items": []
  })"),
                  ParseError);
}

TEST_CASE("validate enforces kind-specific shape") {
  Instance inst;
  inst.kind = Kind::matching;
  inst.buyers = {{"b1", Rat(1)}, {"b1", Rat(1)}};
  CHECK_THROWS_WITH(inst.validate(), Catch::Matchers::ContainsSubstring("duplicate buyer"));

  inst.buyers = {{"b1", Rat(2)}};
  CHECK_THROWS_WITH(inst.validate(), Catch::Matchers::ContainsSubstring("budget 1"));

  inst.buyers = {{"b1", Rat(1)}};
  inst.items = {{"q1", {{0, Rat(2), Rat(2)}}}};
  inst.arrival = {0};
  CHECK_THROWS_WITH(inst.validate(), Catch::Matchers::ContainsSubstring("bid = weight = 1"));

  inst.kind = Kind::onbap;
  inst.buyers[0].budget = Rat(3);
  inst.items[0].edges[0] = {0, Rat(2), Rat(1)};
  CHECK_THROWS_WITH(inst.validate(), Catch::Matchers::ContainsSubstring("weight = bid"));

  inst.kind = Kind::ongap;
  inst.items[0].edges[0] = {0, Rat(1), Rat(2)};  // weight > bid
  CHECK_THROWS_WITH(inst.validate(), Catch::Matchers::ContainsSubstring("weight <= bid"));

  inst.items[0].edges[0] = {0, Rat(1), Rat(-1)};
  CHECK_THROWS_WITH(inst.validate(), Catch::Matchers::ContainsSubstring("negative weight"));

  inst.items[0].edges[0] = {5, Rat(1), Rat(1)};
  CHECK_THROWS_WITH(inst.validate(), Catch::Matchers::ContainsSubstring("unknown buyer"));

  inst.items[0].edges = {{0, Rat(1), Rat(1)}, {0, Rat(1), Rat(1)}};
  CHECK_THROWS_WITH(inst.validate(), Catch::Matchers::ContainsSubstring("duplicate edge"));

  inst.items[0].edges = {{0, Rat(1), Rat(1)}};
  inst.arrival = {0, 0};
  CHECK_THROWS_WITH(inst.validate(),
                    Catch::Matchers::ContainsSubstring("every item exactly once"));
  inst.arrival = {1};
  CHECK_THROWS_WITH(inst.validate(), Catch::Matchers::ContainsSubstring("permutation"));
}

TEST_CASE("onbap bids above budgets are flagged, not rejected") {
  const Instance inst = load_instance(R"({
    "kind": "onbap",
    "buyers": [{"id": "b1", "budget": 1}],
    "items": [{"id": "q1", "edges": [{"buyer": "b1", "bid": 2}]}]
  })");
  CHECK_FALSE(inst.bids_within_budgets);
  REQUIRE_FALSE(inst.warnings.empty());
  CHECK(inst.warnings[0].find("exceeds budget") != std::string::npos);
}

TEST_CASE("spend_coeff, eta, max_item_degree") {
  Instance inst;
  inst.kind = Kind::ongap;
  inst.buyers = {{"b1", Rat(1)}};
  inst.items = {{"q1", {{0, Rat(3), Rat(1)}}}};
  inst.arrival = {0};
  CHECK(inst.spend_coeff(inst.items[0].edges[0]) == Rat(1));  // weight
  CHECK(inst.eta() == Rat(3));
  CHECK(inst.max_item_degree() == 1);

  inst.kind = Kind::onbap;
  inst.items[0].edges[0].weight = Rat(3);
  CHECK(inst.spend_coeff(inst.items[0].edges[0]) == Rat(3));  // bid

  inst.kind = Kind::ongap;
  inst.items[0].edges[0] = {0, Rat(1), Rat(0)};
  CHECK_THROWS_AS(inst.eta(), ValidationError);
}

// ---------------------------------------------------------------------------
// Allocations
// ---------------------------------------------------------------------------

TEST_CASE("allocation feasibility and primal value") {
  const Instance inst = load_instance(kTri2);
  Allocation<Rat> a = Allocation<Rat>::zero(inst);
  a.x[0][0] = Rat(1, 2);
  a.x[0][1] = Rat(1, 2);
  a.x[1][0] = Rat(1, 2);
  a.recompute_levels(inst);
  CHECK(a.level[0] == Rat(1, 2));
  CHECK(a.level[1] == Rat(1));
  CHECK(is_feasible(inst, a));
  CHECK(primal_value(inst, a) == Rat(3, 2));

  a.x[1][0] = Rat(1);  // buyer b2 now overspends
  a.recompute_levels(inst);
  CHECK_FALSE(is_feasible(inst, a));
  CHECK_THROWS_WITH(primal_value(inst, a),
                    Catch::Matchers::ContainsSubstring("infeasible allocation"));

  a.x[1][0] = Rat(1, 2);
  a.x[0][0] = Rat(2, 3);  // item q1 mass now 7/6 > 1
  a.recompute_levels(inst);
  CHECK_FALSE(is_feasible(inst, a));
}

TEST_CASE("to_exact converts dyadic doubles exactly") {
  const Instance inst = load_instance(kTri2);
  Allocation<double> a = Allocation<double>::zero(inst);
  a.x[0][0] = 0.25;
  a.x[0][1] = 0.75;
  a.recompute_levels(inst);
  const Allocation<Rat> e = to_exact(inst, a);
  CHECK(e.x[0][0] == Rat(1, 4));
  CHECK(e.x[0][1] == Rat(3, 4));
  CHECK(e.level[1] == Rat(3, 4));
}
