#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mcdag/baseline.hpp"
#include "mcdag/cluster_dag.hpp"
#include "mcdag/diagram.hpp"
#include "mcdag/nodes.hpp"
#include "mcdag/rewrite.hpp"
#include "mcdag/solve.hpp"

namespace mcdag::testing {

inline bool rel_close(double a, double b, double tol) {
  return std::fabs(a - b) <= tol * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
}

/// Random diagram of the end-to-end suite: at most 10 variables, domains up
/// to 3, at most 3 decisions.
inline RandomSpec suite_spec(std::uint64_t seed, Mode mode = Mode::Prob) {
  std::mt19937_64 rng(seed * 7919 + 13);
  RandomSpec s;
  s.vars = 3 + rng() % 8;
  s.decisions = std::min<std::size_t>(rng() % 4, s.vars - 1);
  s.max_domain = 2 + rng() % 2;
  s.max_parents = 1 + rng() % 3;
  s.mode = mode;
  s.seed = seed;
  return s;
}

/// Tiny diagrams for rule-level checks.
inline RandomSpec tiny_spec(std::uint64_t seed, Mode mode = Mode::Prob) {
  std::mt19937_64 rng(seed * 104729 + 7);
  RandomSpec s;
  s.vars = 2 + rng() % 5;
  s.decisions = std::min<std::size_t>(rng() % 3, s.vars - 1);
  s.max_domain = 2 + rng() % 2;
  s.max_parents = 1 + rng() % 2;
  s.utilities = 1 + rng() % 4;
  s.max_utility_scope = 2 + rng() % 2;
  s.mode = mode;
  s.seed = seed;
  return s;
}

/// Everything built from one diagram; the MCDAG points into the store.
struct Built {
  std::unique_ptr<NodeStore> store;
  NodeId n0 = 0;
  MacroResult macro;
  MCDag dag;
};

inline Built build(const InfluenceDiagram& d, Heuristic h = Heuristic::MinFill, RewriteObserver observer = {}) {
  Built b;
  b.store = std::make_unique<NodeStore>(make_store(d));
  b.n0 = build_n0(*b.store, d);
  RewriteOptions ro;
  ro.file_order = d.temporal_order();
  ro.observer = std::move(observer);
  b.macro = macrostructure(*b.store, b.n0, ro);
  b.dag = assemble(*b.store, b.macro.root, {h, false});
  return b;
}

/// Fold of the node-combination operator `op` over the values of `children`.
inline double fold_children(NodeEvaluator& ev, CombOp op, ValueMode mode, const std::vector<NodeId>& children,
                            const Assignment& env) {
  double acc = identity(op, mode);
  for (NodeId c : children) acc = apply(op, acc, ev.value(c, env));
  return acc;
}

inline std::vector<VarId> scope_union(const NodeStore& st, const std::vector<NodeId>& nodes) {
  std::vector<VarId> out;
  for (NodeId n : nodes) out.insert(out.end(), st.scope(n).begin(), st.scope(n).end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

/// Indices (over `vars`, last fastest) maximizing f within the tolerance.
template <class F>
std::vector<std::size_t> argmax_set(const NodeStore& st, const std::vector<VarId>& vars, Assignment env, F&& f,
                                    double tol) {
  const auto cells = all_assignments(st, vars);
  std::vector<double> vals;
  for (const auto& a : cells) {
    for (const auto& [v, x] : a) env[v] = x;
    vals.push_back(f(env));
  }
  const double best = *std::max_element(vals.begin(), vals.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (vals[i] >= best - tol * std::max(1.0, std::fabs(best))) out.push_back(i);
  return out;
}

/// Checks one rule application: equal node values everywhere and, for the
/// max rules, equal argmax sets at the eliminated decisions. Returns an empty
/// string on success.
inline std::string check_event(const NodeStore& st, const RewriteEvent& e, double tol, bool check_argmax) {
  NodeEvaluator ev(st);
  const auto& alg = st.algebra();
  const auto scope = scope_union(st, {e.target, e.produced});
  for (const auto& env : all_assignments(st, scope)) {
    const double a = ev.value(e.target, env);
    const double b = ev.value(e.produced, env);
    if (!rel_close(a, b, tol))
      return std::string(to_string(e.rule)) + ": value " + std::to_string(a) + " became " + std::to_string(b);
  }
  if (!check_argmax || (e.rule != Rule::DMax && e.rule != Rule::RMax) || !e.inner) return {};

  // Bodies before and after, compared as functions of the eliminated decisions.
  std::vector<VarId> elim;
  std::vector<NodeId> before, after;
  if (e.rule == Rule::DMax) {
    elim = {*e.var};
    before = st.node(e.target).children;
    after = st.node(*e.inner).children;
  } else {
    elim = st.node(*e.inner).sov.at(0).vars;
    before = st.node(*e.inner).children;
    after = st.node(e.produced).children;
  }
  auto all = scope_union(st, before);
  for (VarId v : scope_union(st, after)) all.push_back(v);
  for (VarId v : elim) all.push_back(v);
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<VarId> context;
  for (VarId v : all)
    if (std::find(elim.begin(), elim.end(), v) == elim.end()) context.push_back(v);
  for (const auto& env : all_assignments(st, context)) {
    const auto sb = argmax_set(
        st, elim, env, [&](const Assignment& a) { return fold_children(ev, alg.sum, alg.value_mode, before, a); },
        1e-9);
    const auto sa = argmax_set(
        st, elim, env, [&](const Assignment& a) { return fold_children(ev, alg.sum, alg.value_mode, after, a); },
        1e-9);
    if (sb != sa) return std::string(to_string(e.rule)) + ": argmax set changed";
  }
  return {};
}

/// Node-count bound of the final macrostructure.
inline std::size_t size_bound(const InfluenceDiagram& d) {
  const std::size_t p = d.cpts.size(), u = d.utilities.size();
  return 4 * d.num_variables() * (u + p) + p + u + 4;
}

}  // namespace mcdag::testing
