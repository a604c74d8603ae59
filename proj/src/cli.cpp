#include "mcdag/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <memory>
#include <optional>
#include <sstream>

#include "mcdag/baseline.hpp"
#include "mcdag/cluster_dag.hpp"
#include "mcdag/idnet.hpp"
#include "mcdag/nodes.hpp"
#include "mcdag/rewrite.hpp"
#include "mcdag/solve.hpp"

namespace mcdag {

namespace {

using json = nlohmann::ordered_json;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CheckFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

InfluenceDiagram read_diagram(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_idnet(ss.str());
}

void write_text(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot write " + path);
  f << text;
  if (!f) throw InputError("write failed for " + path);
}

Heuristic parse_heuristic(const std::string& s) {
  if (s == "min-fill") return Heuristic::MinFill;
  if (s == "min-degree") return Heuristic::MinDegree;
  return Heuristic::Exhaustive;
}

bool close(double a, double b, double tol) { return std::fabs(a - b) <= tol * std::max(1.0, std::fabs(b)); }

/// Node store, rewritten root and its MCDAG; the MCDAG points into the store.
struct Pipeline {
  std::unique_ptr<NodeStore> store;
  NodeId n0 = 0;
  MacroResult macro;
  MCDag dag;
  std::size_t final_nodes = 0;
};

Pipeline compile(const InfluenceDiagram& d, Heuristic heuristic, bool merge) {
  Pipeline p;
  p.store = std::make_unique<NodeStore>(make_store(d));
  p.n0 = build_n0(*p.store, d);
  RewriteOptions ro;
  ro.file_order = d.temporal_order();
  p.macro = macrostructure(*p.store, p.n0, ro);
  p.final_nodes = p.store->reachable(p.macro.root).size();
  p.dag = assemble(*p.store, p.macro.root, {heuristic, false});
  if (merge) p.dag = merge_clusters(p.dag);
  check_structure(p.dag);
  return p;
}

json policies_json(const InfluenceDiagram& d, const std::vector<Policy>& policies, bool with_sets) {
  json arr = json::array();
  for (const auto& p : policies) {
    json ctx = json::array();
    for (VarId v : p.context) ctx.push_back(d.var(v).name);
    json j{{"decision", d.var(p.decision).name}, {"context", ctx}, {"rule", p.rule}};
    if (with_sets) j["optimal_sets"] = p.optimal_sets;
    arr.push_back(std::move(j));
  }
  return arr;
}

void print_policies(const InfluenceDiagram& d, const std::vector<Policy>& policies, bool with_sets, std::ostream& out) {
  for (const auto& p : policies) {
    out << "policy " << d.var(p.decision).name << " |";
    for (VarId v : p.context) out << ' ' << d.var(v).name;
    out << '\n';
    const ScopedTable shape = ScopedTable::filled(p.context, p.context_dims, 0.0);
    for (std::size_t i = 0; i < p.rule.size(); ++i) {
      const Assignment a = shape.assignment_of(i);
      out << " ";
      for (VarId v : p.context) out << ' ' << d.var(v).name << '=' << a.at(v);
      if (p.context.empty()) out << " (always)";
      out << " -> " << p.rule[i];
      if (with_sets && i < p.optimal_sets.size()) {
        out << " {";
        for (std::size_t k = 0; k < p.optimal_sets[i].size(); ++k) out << (k ? "," : "") << p.optimal_sets[i][k];
        out << '}';
      }
      out << '\n';
    }
  }
}

struct SolveArgs {
  std::string file;
  std::string engine = "mcdag";
  std::string heuristic = "min-fill";
  bool json = false;
  bool merge = false;
  bool sets = false;
};

int cmd_solve(const SolveArgs& a, std::ostream& out) {
  const InfluenceDiagram d = read_diagram(a.file);
  const Heuristic h = parse_heuristic(a.heuristic);
  const auto start = std::chrono::steady_clock::now();
  Pipeline p = compile(d, h, a.merge);
  double meu = 0.0;
  std::vector<Policy> policies;
  std::optional<std::size_t> evaluated;
  std::optional<std::size_t> w_potential;
  if (d.mode == Mode::Prob) w_potential = constrained_width(d, h == Heuristic::Exhaustive ? Heuristic::MinFill : h);
  if (a.engine == "mcdag") {
    const auto e = evaluate_mcdag(p.dag, {true, a.sets ? 1e-9 : 0.0});
    if (!e.value.is_scalar()) throw SolveError("root cluster value is not a scalar");
    meu = e.value[0];
    evaluated = e.clusters_evaluated;
    policies = decode_policies(d, e.choices, a.sets);
  } else if (a.engine == "potential") {
    auto r = potential_ve(d, h, a.sets);
    meu = r.value;
    policies = std::move(r.policies);
  } else {
    auto r = brute_force(d);
    meu = r.value;
    policies = std::move(r.policies);
    if (!a.sets)
      for (auto& pol : policies) pol.optimal_sets.clear();
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (a.json) {
    json report;
    report["schema"] = 1;
    report["engine"] = a.engine;
    report["mode"] = to_string(d.mode);
    report["meu"] = meu;
    report["policies"] = policies_json(d, policies, a.sets);
    report["w_mcdag"] = p.dag.w_mcdag;
    report["w_potential"] = json{{"heuristic", w_potential ? json(*w_potential) : json(nullptr)}, {"exact", nullptr}};
    report["counts"] = json{{"variables", d.num_variables()},
                            {"nodes_stored", p.store->size()},
                            {"nodes_final", p.final_nodes},
                            {"clusters", p.dag.size()},
                            {"clusters_evaluated", evaluated ? json(*evaluated) : json(nullptr)}};
    report["trace_length"] = p.macro.trace.events.size();
    report["wall_time_s"] = seconds;
    out << report.dump(2) << '\n';
    return kExitOk;
  }
  out << "MEU " << format_double(meu) << '\n';
  out << "engine " << a.engine << '\n';
  out << "w_mcdag " << p.dag.w_mcdag << '\n';
  if (w_potential) out << "w_potential " << *w_potential << '\n';
  print_policies(d, policies, a.sets, out);
  return kExitOk;
}

int cmd_width(const std::string& file, bool exact, bool as_json, std::ostream& out) {
  const InfluenceDiagram d = read_diagram(file);
  const Pipeline p = compile(d, Heuristic::MinFill, false);
  const std::size_t h_pot = constrained_width(d, Heuristic::MinFill);
  std::optional<std::size_t> x_mcdag, x_pot;
  if (exact) {
    x_pot = constrained_width(d, Heuristic::Exhaustive);
    x_mcdag = assemble(*p.store, p.macro.root, {Heuristic::Exhaustive, false}).w_mcdag;
    if (*x_mcdag > *x_pot) throw CheckFailure("exact w_mcdag exceeds exact constrained width");
  }
  if (as_json) {
    json j;
    j["schema"] = 1;
    j["w_mcdag"] = json{{"heuristic", p.dag.w_mcdag}, {"exact", x_mcdag ? json(*x_mcdag) : json(nullptr)}};
    j["w_potential"] = json{{"heuristic", h_pot}, {"exact", x_pot ? json(*x_pot) : json(nullptr)}};
    out << j.dump(2) << '\n';
    return kExitOk;
  }
  out << "w_mcdag " << p.dag.w_mcdag;
  if (x_mcdag) out << " exact " << *x_mcdag;
  out << "\nw_potential " << h_pot;
  if (x_pot) out << " exact " << *x_pot;
  out << '\n';
  return kExitOk;
}

int cmd_compile(const std::string& file, const std::string& stage, const std::string& dot, const std::string& trace,
                bool merge, std::ostream& out) {
  const InfluenceDiagram d = read_diagram(file);
  const Pipeline p = compile(d, Heuristic::MinFill, merge);
  if (!trace.empty()) write_text(trace, p.macro.trace.to_jsonl(*p.store), out);
  write_text(dot, stage == "nodes" ? nodes_to_dot(*p.store, p.macro.root) : mcdag_to_dot(p.dag), out);
  return kExitOk;
}

int cmd_check(const std::string& file, double tol, std::ostream& out) {
  const InfluenceDiagram d = read_diagram(file);
  const auto brute = brute_force(d);
  const Pipeline p = compile(d, Heuristic::MinFill, false);
  const auto e = evaluate_mcdag(p.dag);
  const double mcdag = e.value[0];
  const double mcdag_policy = evaluate_policy(d, decode_policies(d, e.choices, false));
  bool pass = true;
  auto report = [&](const std::string& name, double v) {
    const bool ok = close(v, brute.value, tol);
    pass = pass && ok;
    out << name << ' ' << format_double(v) << " diff " << format_double(v - brute.value) << (ok ? " ok" : " MISMATCH")
        << '\n';
  };
  out << "brute " << format_double(brute.value) << '\n';
  report("mcdag", mcdag);
  report("mcdag-policy", mcdag_policy);
  if (d.mode == Mode::Prob) {
    const auto pot = potential_ve(d);
    report("potential", pot.value);
    report("potential-policy", evaluate_policy(d, pot.policies));
  }
  out << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kExitOk : kExitInternal;
}

struct GenArgs {
  std::string fixture;
  std::size_t n = 2;
  std::uint64_t seed = 1;
  std::size_t domain = 2;
  RandomSpec random;
  std::string mode = "prob";
  std::string output;
};

int cmd_gen(GenArgs a, std::ostream& out) {
  InfluenceDiagram d;
  if (!a.fixture.empty()) {
    d = fixture(a.fixture, a.n, a.seed, a.domain);
  } else {
    a.random.seed = a.seed;
    a.random.mode = a.mode == "poss" ? Mode::Poss : Mode::Prob;
    d = random_id(a.random);
  }
  write_text(a.output, serialize_idnet(d), out);
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Influence diagram solver based on multi-operator cluster DAGs", "mcdag"};
  app.require_subcommand(1);

  SolveArgs solve;
  auto* s = app.add_subcommand("solve", "Compute the MEU and optimal policies");
  s->add_option("file", solve.file, "IDNET file")->required();
  s->add_option("--engine", solve.engine, "mcdag, potential or brute")
      ->check(CLI::IsMember({"mcdag", "potential", "brute"}));
  s->add_option("--heuristic", solve.heuristic, "Elimination ordering heuristic")
      ->check(CLI::IsMember({"min-fill", "min-degree", "exhaustive"}));
  s->add_flag("--json", solve.json, "Emit a JSON report");
  s->add_flag("--merge", solve.merge, "Merge identical clusters");
  s->add_flag("--sets", solve.sets, "Report every optimal value");

  std::string width_file;
  bool width_exact = false, width_json = false;
  auto* w = app.add_subcommand("width", "Compare w_mcdag with the constrained induced width");
  w->add_option("file", width_file, "IDNET file")->required();
  w->add_flag("--exact", width_exact, "Also compute exact widths (at most 8 variables)");
  w->add_flag("--json", width_json, "Emit JSON");

  std::string comp_file, stage = "nodes", dot, trace;
  bool comp_merge = false;
  auto* c = app.add_subcommand("compile", "Emit the computation node DAG or the MCDAG as DOT");
  c->add_option("file", comp_file, "IDNET file")->required();
  c->add_option("--stage", stage, "nodes or mcdag")->check(CLI::IsMember({"nodes", "mcdag"}));
  c->add_option("--dot", dot, "Output path (standard output by default)");
  c->add_option("--trace", trace, "Write the rewrite trace as JSON lines");
  c->add_flag("--merge", comp_merge, "Merge identical clusters");

  std::string check_file;
  double tol = 1e-9;
  auto* k = app.add_subcommand("check", "Cross-check every engine against brute force");
  k->add_option("file", check_file, "IDNET file")->required();
  k->add_option("--tol", tol, "Relative tolerance")->check(CLI::NonNegativeNumber);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "Write a fixture or a random diagram");
  g->add_option("--fixture", gen.fixture, "fig2, fig3, chain or star")
      ->check(CLI::IsMember({"fig2", "fig3", "chain", "star"}));
  g->add_option("--n", gen.n, "Size of the chain and star fixtures")->check(CLI::PositiveNumber);
  g->add_option("--domain", gen.domain, "Domain size of fixture variables")->check(CLI::Range(2, 16));
  g->add_option("--seed", gen.seed, "Random seed");
  g->add_option("--vars", gen.random.vars, "Number of variables")->check(CLI::PositiveNumber);
  g->add_option("--decisions", gen.random.decisions, "Number of decisions");
  g->add_option("--max-domain", gen.random.max_domain, "Largest domain size")->check(CLI::Range(2, 16));
  g->add_option("--max-parents", gen.random.max_parents, "Largest parent count of a chance variable");
  g->add_option("--utilities", gen.random.utilities, "Number of utilities (0 picks 1 to 3)");
  g->add_option("--mode", gen.mode, "prob or poss")->check(CLI::IsMember({"prob", "poss"}));
  g->add_option("-o,--output", gen.output, "Output path (standard output by default)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*s) return cmd_solve(solve, out);
    if (*w) return cmd_width(width_file, width_exact, width_json, out);
    if (*c) return cmd_compile(comp_file, stage, dot, trace, comp_merge, out);
    if (*k) return cmd_check(check_file, tol, out);
    return cmd_gen(gen, out);
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const DiagramError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const OrderLimitError& e) {
    err << "guard: " << e.what() << '\n';
    return kExitGuard;
  } catch (const BaselineError& e) {
    if (e.kind() == BaselineError::Kind::ResourceGuard) {
      err << "guard: " << e.what() << '\n';
      return kExitGuard;
    }
    if (e.kind() == BaselineError::Kind::Unsupported) {
      err << "error: " << e.what() << '\n';
      return kExitInput;
    }
    err << "internal: " << e.what() << '\n';
    return kExitInternal;
  } catch (const FactorError& e) {
    if (e.kind() == FactorError::Kind::TooLarge) {
      err << "guard: " << e.what() << '\n';
      return kExitGuard;
    }
    err << "internal: " << e.what() << '\n';
    return kExitInternal;
  } catch (const std::exception& e) {
    err << "internal: " << e.what() << '\n';
    return kExitInternal;
  }
}

}  // namespace mcdag
