// Command-line front end: run algorithms, solve exact offline optima, build
// and check dual certificates, evaluate random-order ratios, generate
// instance families, solve the factor-revealing LP, and run the OnGAP
// wrapper. Exit codes: 0 success, 1 input/validation error, 2 a requested
// check failed.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "onalloc/dualfit.hpp"
#include "onalloc/harness.hpp"
#include "onalloc/lp.hpp"
#include "onalloc/ongap.hpp"

namespace {

using namespace onalloc;

struct CliError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

AlgoId parse_algo(const std::string& s) {
  if (s == "water-filling") return AlgoId::water_filling;
  if (s == "virtual-wf") return AlgoId::virtual_wf;
  if (s == "greedy") return AlgoId::greedy;
  if (s == "i-greedy") return AlgoId::i_greedy;
  if (s == "ranking") return AlgoId::ranking;
  throw CliError("unknown --algo \"" + s +
                 "\" (expected water-filling, virtual-wf, greedy, i-greedy, or ranking)");
}

BuilderId parse_builder(const std::string& s) {
  if (s == "wf-worst") return BuilderId::wf_worst;
  if (s == "vwf-worst") return BuilderId::vwf_worst;
  if (s == "random-order") return BuilderId::random_order;
  if (s == "bounded-degree") return BuilderId::bounded_degree;
  if (s == "igreedy") return BuilderId::igreedy;
  throw CliError("unknown --builder \"" + s +
                 "\" (expected wf-worst, vwf-worst, random-order, bounded-degree, or igreedy)");
}

TieSpec parse_tie(const std::string& s) {
  TieSpec tie;
  if (s == "global") return tie;
  if (s.rfind("per-item", 0) == 0) {
    tie.kind = TieSpec::Kind::per_item;
    if (s.size() > 8) {
      if (s[8] != ':') throw CliError("malformed --tie \"" + s + "\" (use per-item:SEED)");
      try {
        tie.seed = std::stoull(s.substr(9));
      } catch (const std::exception&) {
        throw CliError("malformed --tie seed in \"" + s + "\"");
      }
    }
    return tie;
  }
  throw CliError("unknown --tie \"" + s + "\" (expected global or per-item:SEED)");
}

AlgoId default_algo_for(BuilderId b) {
  switch (b) {
    case BuilderId::wf_worst: return AlgoId::water_filling;
    case BuilderId::vwf_worst: return AlgoId::virtual_wf;
    case BuilderId::random_order: return AlgoId::greedy;
    case BuilderId::bounded_degree: return AlgoId::water_filling;
    case BuilderId::igreedy: return AlgoId::i_greedy;
  }
  return AlgoId::greedy;
}

void write_output(const std::optional<std::string>& out, const std::string& text) {
  if (!out) {
    std::cout << text;
    if (text.empty() || text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(*out, std::ios::binary);
  if (!f) throw CliError("cannot open output file \"" + *out + "\"");
  f << text;
  if (text.empty() || text.back() != '\n') f << '\n';
}

Instance load_checked(const std::string& path) {
  if (path.empty()) throw CliError("--instance is required");
  return load_instance_file(path);
}

int cmd_run(const std::string& instance, const std::string& algo, const std::string& tie,
            std::uint64_t seed, const std::optional<std::string>& out) {
  const Instance inst = load_checked(instance);
  AlgoSpec spec;
  spec.id = parse_algo(algo);
  spec.tie = parse_tie(tie);
  spec.ranking_seed = seed;
  const Allocation<Rat> alloc = run_allocation(inst, spec);
  const Rat value = primal_value(inst, alloc);

  nlohmann::json doc;
  doc["instance"] = inst.name;
  doc["algo"] = algo_name(spec.id);
  doc["value"] = rat_to_string(value);
  doc["value_double"] = to_double(value);
  doc["levels"] = nlohmann::json::array();
  for (std::size_t i = 0; i < inst.buyers.size(); ++i)
    doc["levels"].push_back({{"buyer", inst.buyers[i].id},
                             {"level", rat_to_string(alloc.level[i])},
                             {"budget", rat_to_string(inst.buyers[i].budget)}});
  write_output(out, doc.dump(2));
  return 0;
}

int cmd_opt(const std::string& instance, const std::optional<std::string>& out) {
  const Instance inst = load_checked(instance);
  const auto sol = offline_opt(inst);
  if (out) {
    nlohmann::json doc;
    doc["instance"] = inst.name;
    doc["opt"] = rat_to_string(sol.value);
    doc["opt_double"] = to_double(sol.value);
    write_output(out, doc.dump(2));
  }
  std::cout << "opt=" << rat_to_string(sol.value) << "\n";
  return 0;
}

int cmd_dual(const std::string& instance, const std::string& builder, const std::string& algo,
             const std::string& tie, int trials, std::uint64_t seed,
             const std::optional<std::string>& out) {
  const Instance inst = load_checked(instance);
  const BuilderId b = parse_builder(builder);
  const AlgoId a = algo.empty() ? default_algo_for(b) : parse_algo(algo);
  CheckOptions opt;
  opt.tie = parse_tie(tie);
  const FeasibilityReport rep = check_certificate(inst, a, b, trials, seed, g_exponential(), opt);
  write_output(out, rep.to_json().dump(2));

  bool ok = rep.all_edges_pass();
  if (!std::isnan(rep.property1_residual) && rep.property1_residual > 1e-9) ok = false;
  if (b == BuilderId::bounded_degree && !rep.band1_ok) ok = false;
  if (b == BuilderId::igreedy && !rep.factor_holds_in_mean) ok = false;
  return ok ? 0 : 2;
}

int cmd_ratio(const std::string& instance, const std::string& algo, const std::string& order,
              const std::string& tie, int trials, std::uint64_t seed, const std::string& format,
              const std::optional<std::string>& out) {
  const Instance inst = load_checked(instance);
  AlgoSpec spec;
  spec.id = parse_algo(algo);
  spec.tie = parse_tie(tie);
  spec.ranking_seed = seed;

  OrderMode mode;
  int n = trials;
  if (order == "fixed") {
    mode = OrderMode::fixed;
  } else if (order == "all") {
    mode = OrderMode::all_perms;
  } else if (order == "sample" || order.rfind("sample:", 0) == 0) {
    mode = OrderMode::sampled;
    if (order.size() > 7) {
      try {
        n = std::stoi(order.substr(7));
      } catch (const std::exception&) {
        throw CliError("malformed --order \"" + order + "\" (use sample:N)");
      }
    }
  } else {
    throw CliError("unknown --order \"" + order + "\" (expected fixed, all, or sample:N)");
  }

  const RatioReport rep = run_random_order(inst, spec, mode, n, seed);
  if (format == "csv")
    write_output(out, std::string(ratio_csv_header()) + "\n" + rep.csv_row());
  else if (format == "json")
    write_output(out, rep.to_json().dump(2));
  else
    throw CliError("unknown --format \"" + format + "\" (expected json or csv)");
  return 0;
}

int cmd_gen(const std::string& family, int n, int m, double p, int k, int max_degree,
            std::uint64_t seed, const std::optional<std::string>& out) {
  Instance inst;
  if (family == "triangular")
    inst = gen_triangular(n);
  else if (family == "complete")
    inst = gen_complete(n, m);
  else if (family == "random_matching")
    inst = gen_random_matching(n, m, p, seed, max_degree);
  else if (family == "random_onbap")
    inst = gen_random_onbap(n, m, p, seed, Rat(1, 4), Rat(2), Rat(2), Rat(4));
  else if (family == "random_ongap")
    inst = gen_random_ongap(n, m, p, seed);
  else if (family == "ongap_hard")
    inst = gen_ongap_hard(k);
  else
    throw CliError("unknown --family \"" + family +
                   "\" (expected triangular, complete, random_matching, random_onbap, "
                   "random_ongap, or ongap_hard)");
  write_output(out, save_instance(inst));
  return 0;
}

int cmd_frlp(int k) {
  const FrlpResult res = factor_revealing_lp(k);
  std::cout << "alpha_star=" << rat_to_string(res.alpha_star) << "\n";
  return 0;
}

int cmd_ongap(const std::string& instance, const std::string& inner, const std::string& mode,
              std::uint64_t seed, const std::optional<std::string>& out) {
  const Instance inst = load_checked(instance);
  InnerAlgo algo;
  if (inner == "virtual-wf")
    algo = inner_virtual_wf(g_exponential());
  else if (inner == "greedy")
    algo = inner_greedy();
  else if (inner == "i-greedy")
    algo = inner_igreedy();
  else
    throw CliError("unknown --inner \"" + inner +
                   "\" (expected virtual-wf, greedy, or i-greedy)");

  const Rat opt = offline_opt(inst).value;
  nlohmann::json doc;
  doc["instance"] = inst.name;
  doc["inner"] = inner;
  doc["mode"] = mode;
  doc["opt"] = rat_to_string(opt);

  Rat value;
  if (mode == "derand") {
    const auto res = ongap_derandomized(inst, algo);
    value = primal_value(inst, res.alloc);
    doc["num_buckets"] = res.num_buckets;
    doc["eta"] = rat_to_string(res.eta);
    doc["bucket_values"] = nlohmann::json::array();
    for (const auto& v : res.bucket_values) doc["bucket_values"].push_back(rat_to_string(v));
  } else if (mode == "random") {
    const auto res = ongap_randomized(inst, algo, seed);
    value = primal_value(inst, res.alloc);
    doc["num_buckets"] = res.num_buckets;
    doc["eta"] = rat_to_string(res.eta);
    doc["chosen_bucket"] = res.chosen_bucket;
  } else {
    throw CliError("unknown --mode \"" + mode + "\" (expected derand or random)");
  }
  doc["value"] = rat_to_string(value);
  doc["value_double"] = to_double(value);
  doc["ratio"] = opt == 0 ? 1.0 : to_double(Rat(value / opt));
  write_output(out, doc.dump(2));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"online allocation algorithms with verifiable dual certificates"};
  app.require_subcommand(1);

  std::string instance, algo, builder, tie = "global", order = "fixed", format = "json";
  std::string family = "triangular", inner = "virtual-wf", mode = "derand";
  std::uint64_t seed = 1;
  int trials = 1000, gen_n = 2, gen_m = 2, gen_k = 2, max_degree = 0;
  double gen_p = 0.5;
  std::optional<std::string> out;

  auto add_common = [&](CLI::App* sub, bool needs_instance) {
    if (needs_instance) sub->add_option("--instance", instance, "instance JSON file");
    sub->add_option("--seed", seed, "master random seed");
    sub->add_option("--out", out, "write the report to this file");
  };

  CLI::App* run = app.add_subcommand("run", "run one algorithm on the fixed arrival order");
  add_common(run, true);
  run->add_option("--algo", algo, "algorithm")->required();
  run->add_option("--tie", tie, "greedy tie policy: global or per-item:SEED");

  CLI::App* optc = app.add_subcommand("opt", "exact offline LP optimum");
  add_common(optc, true);

  CLI::App* dual = app.add_subcommand("dual", "build and check a dual certificate");
  add_common(dual, true);
  dual->add_option("--builder", builder, "dual builder")->required();
  dual->add_option("--algo", algo, "algorithm (defaults to the builder's partner)");
  dual->add_option("--tie", tie, "greedy tie policy: global or per-item:SEED");
  dual->add_option("--trials", trials, "Monte Carlo trials / realizations");

  CLI::App* ratio = app.add_subcommand("ratio", "competitive ratio over arrival orders");
  add_common(ratio, true);
  ratio->add_option("--algo", algo, "algorithm")->required();
  ratio->add_option("--order", order, "fixed, all, or sample:N");
  ratio->add_option("--tie", tie, "greedy tie policy: global or per-item:SEED");
  ratio->add_option("--trials", trials, "sample count when --order sample");
  ratio->add_option("--format", format, "json or csv");

  CLI::App* gen = app.add_subcommand("gen", "generate an instance family member");
  add_common(gen, false);
  gen->add_option("--family", family,
                  "triangular | complete | random_matching | random_onbap | random_ongap | "
                  "ongap_hard");
  gen->add_option("--n", gen_n, "buyer count");
  gen->add_option("--m", gen_m, "item count");
  gen->add_option("--p", gen_p, "edge probability");
  gen->add_option("--k", gen_k, "hard-family parameter");
  gen->add_option("--max-degree", max_degree, "cap item degree (random_matching)");

  CLI::App* frlp = app.add_subcommand("frlp", "factor-revealing LP optimum");
  frlp->add_option("--k", gen_k, "bundle count")->required();

  CLI::App* ongap = app.add_subcommand("ongap", "bucketing wrapper for generalized assignment");
  add_common(ongap, true);
  ongap->add_option("--inner", inner, "inner onbap algorithm: virtual-wf, greedy, i-greedy");
  ongap->add_option("--mode", mode, "derand or random");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints help, exit 0
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << app.help() << "\n";
    return 1;
  }

  try {
    if (run->parsed()) return cmd_run(instance, algo, tie, seed, out);
    if (optc->parsed()) return cmd_opt(instance, out);
    if (dual->parsed()) return cmd_dual(instance, builder, algo, tie, trials, seed, out);
    if (ratio->parsed()) return cmd_ratio(instance, algo, order, tie, trials, seed, format, out);
    if (gen->parsed())
      return cmd_gen(family, gen_n, gen_m, gen_p, gen_k, max_degree, seed, out);
    if (frlp->parsed()) return cmd_frlp(gen_k);
    if (ongap->parsed()) return cmd_ongap(instance, inner, mode, seed, out);
  } catch (const CliError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const PermutationOverflow& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const BisectionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
