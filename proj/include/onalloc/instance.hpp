#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "onalloc/rational.hpp"

namespace onalloc {

enum class Kind { matching, onbap, ongap };

inline std::string kind_name(Kind k) {
  switch (k) {
    case Kind::matching: return "matching";
    case Kind::onbap: return "onbap";
    case Kind::ongap: return "ongap";
  }
  return "?";
}

inline Kind kind_from_name(std::string_view s) {
  if (s == "matching") return Kind::matching;
  if (s == "onbap") return Kind::onbap;
  if (s == "ongap") return Kind::ongap;
  throw ValidationError("unknown kind \"" + std::string(s) +
                        "\" (expected matching, onbap, or ongap)");
}

struct Buyer {
  std::string id;
  Rat budget = 1;

  friend bool operator==(const Buyer&, const Buyer&) = default;
};

struct Edge {
  int buyer = -1;  // index into Instance::buyers
  Rat bid = 1;
  Rat weight = 1;

  friend bool operator==(const Edge&, const Edge&) = default;
};

struct Item {
  std::string id;
  std::vector<Edge> edges;

  friend bool operator==(const Item&, const Item&) = default;
};

/// An online allocation instance: offline buyers, online items with
/// bid/weight edges, and the adversarial arrival order.
///
/// matching: budgets, bids, and weights are all 1.
/// onbap:    weight == bid on every edge (budgeted allocation).
/// ongap:    bids and weights independent; weight <= bid wherever bid > 0.
struct Instance {
  Kind kind = Kind::matching;
  std::vector<Buyer> buyers;
  std::vector<Item> items;
  std::vector<int> arrival;  // permutation of item indices

  // Non-semantic metadata (excluded from equality and serialization).
  std::string name;
  bool bids_within_budgets = true;
  std::vector<std::string> warnings;

  friend bool operator==(const Instance& a, const Instance& b) {
    return a.kind == b.kind && a.buyers == b.buyers && a.items == b.items &&
           a.arrival == b.arrival;
  }

  int buyer_index(std::string_view id) const {
    for (std::size_t i = 0; i < buyers.size(); ++i)
      if (buyers[i].id == id) return static_cast<int>(i);
    return -1;
  }

  int item_index(std::string_view id) const {
    for (std::size_t j = 0; j < items.size(); ++j)
      if (items[j].id == id) return static_cast<int>(j);
    return -1;
  }

  /// Budget spend per unit of allocation: weight for ongap, bid otherwise.
  const Rat& spend_coeff(const Edge& e) const {
    return kind == Kind::ongap ? e.weight : e.bid;
  }

  int max_item_degree() const {
    std::size_t d = 0;
    for (const auto& it : items) d = std::max(d, it.edges.size());
    return static_cast<int>(d);
  }

  /// ongap bid-to-weight spread: max b/w over edges with positive bid.
  Rat eta() const {
    Rat best = 1;
    for (const auto& it : items)
      for (const auto& e : it.edges) {
        if (e.bid <= 0) continue;
        if (e.weight <= 0)
          throw ValidationError("eta undefined: item \"" + it.id +
                                "\" has positive bid with weight 0");
        best = std::max(best, Rat(e.bid / e.weight));
      }
    return best;
  }

  void validate() const;
};

inline void Instance::validate() const {
  std::unordered_map<std::string_view, int> seen;
  for (const auto& b : buyers) {
    if (b.id.empty()) throw ValidationError("buyer with empty id");
    if (!seen.emplace(b.id, 1).second)
      throw ValidationError("duplicate buyer id \"" + b.id + "\"");
    if (b.budget < 0) throw ValidationError("buyer \"" + b.id + "\": negative budget");
    if (kind == Kind::matching && b.budget != 1)
      throw ValidationError("buyer \"" + b.id + "\": matching requires budget 1");
  }
  seen.clear();
  for (const auto& it : items) {
    if (it.id.empty()) throw ValidationError("item with empty id");
    if (!seen.emplace(it.id, 1).second)
      throw ValidationError("duplicate item id \"" + it.id + "\"");
    std::vector<char> used(buyers.size(), 0);
    for (const auto& e : it.edges) {
      if (e.buyer < 0 || e.buyer >= static_cast<int>(buyers.size()))
        throw ValidationError("item \"" + it.id + "\": edge references unknown buyer");
      if (used[e.buyer])
        throw ValidationError("item \"" + it.id + "\": duplicate edge to buyer \"" +
                              buyers[e.buyer].id + "\"");
      used[e.buyer] = 1;
      if (e.bid < 0) throw ValidationError("item \"" + it.id + "\": negative bid");
      if (e.weight < 0) throw ValidationError("item \"" + it.id + "\": negative weight");
      switch (kind) {
        case Kind::matching:
          if (e.bid != 1 || e.weight != 1)
            throw ValidationError("item \"" + it.id +
                                  "\": matching requires bid = weight = 1");
          break;
        case Kind::onbap:
          if (e.weight != e.bid)
            throw ValidationError("item \"" + it.id +
                                  "\": onbap requires weight = bid on every edge");
          break;
        case Kind::ongap:
          if (e.bid > 0 && e.weight > e.bid)
            throw ValidationError("item \"" + it.id +
                                  "\": ongap requires weight <= bid when bid > 0");
          break;
      }
    }
  }
  if (arrival.size() != items.size())
    throw ValidationError("arrival order must list every item exactly once");
  std::vector<char> hit(items.size(), 0);
  for (int j : arrival) {
    if (j < 0 || j >= static_cast<int>(items.size()) || hit[j])
      throw ValidationError("arrival order must be a permutation of the items");
    hit[j] = 1;
  }
}

namespace detail {

inline Rat rat_from_json(const nlohmann::json& v, const std::string& where) {
  try {
    if (v.is_string()) return parse_rational(v.get<std::string>());
    if (v.is_number_integer()) return Rat(BigInt(v.get<std::int64_t>()));
    if (v.is_number_unsigned()) return Rat(BigInt(v.get<std::uint64_t>()));
    if (v.is_number_float()) return rat_from_double_shortest(v.get<double>());
  } catch (const ParseError& e) {
    throw ParseError(where + ": " + e.what());
  }
  throw ParseError(where + ": expected a number or \"p/q\" string");
}

inline nlohmann::json rat_to_json(const Rat& v) {
  const BigInt den = boost::multiprecision::denominator(v);
  if (den == 1) {
    const BigInt num = boost::multiprecision::numerator(v);
    if (num >= std::numeric_limits<std::int64_t>::min() &&
        num <= std::numeric_limits<std::int64_t>::max())
      return num.convert_to<std::int64_t>();
  }
  return rat_to_string(v);
}

}  // namespace detail

/// Parses and validates an instance from its JSON document.
inline Instance load_instance(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("instance document must be a JSON object");

  Instance inst;
  if (!doc.contains("kind") || !doc["kind"].is_string())
    throw ValidationError("missing or non-string \"kind\"");
  inst.kind = kind_from_name(doc["kind"].get<std::string>());
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) throw ValidationError("\"name\" must be a string");
    inst.name = doc["name"].get<std::string>();
  }

  if (!doc.contains("buyers") || !doc["buyers"].is_array())
    throw ValidationError("missing \"buyers\" array");
  for (const auto& b : doc["buyers"]) {
    if (!b.is_object() || !b.contains("id") || !b["id"].is_string())
      throw ValidationError("each buyer needs a string \"id\"");
    Buyer buyer;
    buyer.id = b["id"].get<std::string>();
    if (b.contains("budget"))
      buyer.budget = detail::rat_from_json(b["budget"], "buyer \"" + buyer.id + "\" budget");
    inst.buyers.push_back(std::move(buyer));
  }

  if (!doc.contains("items") || !doc["items"].is_array())
    throw ValidationError("missing \"items\" array");
  for (const auto& itj : doc["items"]) {
    if (!itj.is_object() || !itj.contains("id") || !itj["id"].is_string())
      throw ValidationError("each item needs a string \"id\"");
    Item item;
    item.id = itj["id"].get<std::string>();
    if (itj.contains("edges")) {
      if (!itj["edges"].is_array())
        throw ValidationError("item \"" + item.id + "\": \"edges\" must be an array");
      for (const auto& ej : itj["edges"]) {
        if (!ej.is_object() || !ej.contains("buyer") || !ej["buyer"].is_string())
          throw ValidationError("item \"" + item.id + "\": each edge needs a \"buyer\" id");
        Edge e;
        const std::string bid_id = ej["buyer"].get<std::string>();
        e.buyer = inst.buyer_index(bid_id);
        if (e.buyer < 0)
          throw ValidationError("item \"" + item.id + "\": edge references unknown buyer \"" +
                                bid_id + "\"");
        const std::string where = "item \"" + item.id + "\" edge to \"" + bid_id + "\"";
        if (ej.contains("bid")) e.bid = detail::rat_from_json(ej["bid"], where + " bid");
        e.weight = ej.contains("weight")
                       ? detail::rat_from_json(ej["weight"], where + " weight")
                       : e.bid;
        item.edges.push_back(std::move(e));
      }
    }
    inst.items.push_back(std::move(item));
  }

  if (doc.contains("arrival")) {
    if (!doc["arrival"].is_array())
      throw ValidationError("\"arrival\" must be an array of item ids");
    for (const auto& a : doc["arrival"]) {
      if (!a.is_string()) throw ValidationError("\"arrival\" entries must be item ids");
      const int j = inst.item_index(a.get<std::string>());
      if (j < 0)
        throw ValidationError("arrival references unknown item \"" + a.get<std::string>() +
                              "\"");
      inst.arrival.push_back(j);
    }
  } else {
    inst.arrival.resize(inst.items.size());
    std::iota(inst.arrival.begin(), inst.arrival.end(), 0);
  }

  inst.validate();

  if (inst.kind == Kind::onbap) {
    for (const auto& it : inst.items)
      for (const auto& e : it.edges)
        if (e.bid > inst.buyers[e.buyer].budget) {
          inst.bids_within_budgets = false;
          inst.warnings.push_back("item \"" + it.id + "\": bid exceeds budget of buyer \"" +
                                  inst.buyers[e.buyer].id +
                                  "\" (random-order guarantees assume bids within budgets)");
        }
  }
  return inst;
}

inline Instance load_instance_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open instance file \"" + path + "\"");
  std::ostringstream buf;
  buf << in.rdbuf();
  Instance inst = load_instance(buf.str());
  if (inst.name.empty()) inst.name = path;
  return inst;
}

/// Canonical serialization: defaults omitted (budget 1, bid 1, weight equal
/// to bid, arrival in item order), exact values as integers or "p/q".
inline std::string save_instance(const Instance& inst) {
  nlohmann::json doc;
  doc["kind"] = kind_name(inst.kind);
  if (!inst.name.empty()) doc["name"] = inst.name;
  doc["buyers"] = nlohmann::json::array();
  for (const auto& b : inst.buyers) {
    nlohmann::json bj{{"id", b.id}};
    if (b.budget != 1) bj["budget"] = detail::rat_to_json(b.budget);
    doc["buyers"].push_back(std::move(bj));
  }
  doc["items"] = nlohmann::json::array();
  for (const auto& it : inst.items) {
    nlohmann::json ij{{"id", it.id}};
    ij["edges"] = nlohmann::json::array();
    for (const auto& e : it.edges) {
      nlohmann::json ejson{{"buyer", inst.buyers[e.buyer].id}};
      if (e.bid != 1) ejson["bid"] = detail::rat_to_json(e.bid);
      if (e.weight != e.bid) ejson["weight"] = detail::rat_to_json(e.weight);
      ij["edges"].push_back(std::move(ejson));
    }
    doc["items"].push_back(std::move(ij));
  }
  bool identity = true;
  for (std::size_t j = 0; j < inst.arrival.size(); ++j)
    identity = identity && inst.arrival[j] == static_cast<int>(j);
  if (!identity) {
    doc["arrival"] = nlohmann::json::array();
    for (int j : inst.arrival) doc["arrival"].push_back(inst.items[j].id);
  }
  return doc.dump(2) + "\n";
}

}  // namespace onalloc
