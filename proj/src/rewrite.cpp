#include "mcdag/rewrite.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <random>
#include <set>

#include <json.hpp>

namespace mcdag {

namespace {

using Ids = std::vector<NodeId>;

bool contains(const std::vector<VarId>& s, VarId v) { return std::find(s.begin(), s.end(), v) != s.end(); }

bool is_product_term(const NodeStore& st, NodeId id) {
  const auto& n = st.node(id);
  return !n.atomic && n.sov.empty() && n.comb == st.algebra().product;
}

bool is_empty_product(const NodeStore& st, NodeId id) {
  return is_product_term(st, id) && st.node(id).children.empty();
}

// (op_S, comb, N) with a single non-empty block.
bool single_block(const NodeStore& st, NodeId id, MargOp op, CombOp comb) {
  const auto& n = st.node(id);
  return !n.atomic && n.comb == comb && n.sov.size() == 1 && n.sov[0].op == op && !n.sov[0].vars.empty();
}

bool scope_meets(const NodeStore& st, const Ids& nodes, const std::vector<VarId>& vars) {
  for (NodeId n : nodes)
    for (VarId v : vars)
      if (st.scope_contains(n, v)) return true;
  return false;
}

bool disjoint_ids(const Ids& a, const Ids& b) {
  for (NodeId x : a)
    if (std::find(b.begin(), b.end(), x) != b.end()) return false;
  return true;
}

std::vector<VarId> merge_vars(std::vector<VarId> a, const std::vector<VarId>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

Ids without(const Ids& all, NodeId drop) {
  Ids out;
  for (NodeId n : all)
    if (n != drop) out.push_back(n);
  return out;
}

Ids unite(Ids a, const Ids& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

SovSequence drop_var(SovSequence sov, VarId x) {
  auto& vars = sov.back().vars;
  vars.erase(std::remove(vars.begin(), vars.end(), x), vars.end());
  if (vars.empty()) sov.pop_back();
  return sov;
}

void check_root_shape(const NodeStore& st, NodeId root, VarId x, MargOp op, const char* rule) {
  const auto& n = st.node(root);
  const auto& alg = st.algebra();
  if (n.atomic || n.comb != alg.sum || n.sov.empty() || n.sov.back().op != op || !contains(n.sov.back().vars, x))
    throw RewriteError(RewriteError::Kind::ShapeMismatch,
                       std::string(rule) + ": root " + std::to_string(root) + " does not end with " + to_string(op) +
                           " over the variable");
  for (NodeId c : n.children)
    if (!is_product_term(st, c))
      throw RewriteError(RewriteError::Kind::ShapeMismatch,
                         std::string(rule) + ": child " + std::to_string(c) + " is not an (∅, ×, N) node");
}

void check_nonnegative(const NodeStore& st, const Ids& nodes, std::uint64_t seed, const char* rule) {
  std::mt19937_64 rng(seed);
  NodeEvaluator ev(st);
  for (NodeId n : nodes) {
    const auto& scope = st.scope(n);
    for (int s = 0; s < 32; ++s) {
      Assignment env;
      for (VarId v : scope) env[v] = std::uniform_int_distribution<std::size_t>(0, st.domain_size(v) - 1)(rng);
      if (ev.value(n, env) < 0.0)
        throw RewriteError(RewriteError::Kind::Precondition,
                           std::string(rule) + ": factor " + st.label(n) + " takes a negative value");
    }
  }
}

template <class Step>
NodeId fixpoint(NodeStore& st, NodeId id, Rule rule, RewriteLog* log, Step step) {
  while (auto next = step(st, id)) {
    if (log) log->record(st, {rule, id, *next, std::nullopt, std::nullopt});
    id = *next;
  }
  return id;
}

}  // namespace

const char* to_string(Rule rule) {
  switch (rule) {
    case Rule::DSum: return "D_sum";
    case Rule::RSum: return "R_sum";
    case Rule::S1Sum: return "S1_sum";
    case Rule::S2Sum: return "S2_sum";
    case Rule::DMax: return "D_max";
    case Rule::RMax: return "R_max";
  }
  return "?";
}

std::vector<Rule> RewriteTrace::collapsed() const {
  std::vector<Rule> out;
  for (const auto& e : events)
    if (out.empty() || out.back() != e.rule) out.push_back(e.rule);
  return out;
}

std::string RewriteTrace::to_jsonl(const NodeStore& store) const {
  std::string out;
  for (const auto& e : events) {
    nlohmann::ordered_json j;
    j["rule"] = to_string(e.rule);
    j["target"] = e.target;
    j["produced"] = e.produced;
    if (e.var) j["var"] = store.variables().at(*e.var).name;
    out += j.dump() + "\n";
  }
  return out;
}

void RewriteLog::record(const NodeStore& store, RewriteEvent e) {
  trace.events.push_back(e);
  if (observer) observer(store, e);
}

// --- sum rules -----------------------------------------------------------------

SumDecomposition d_sum(NodeStore& st, NodeId root, VarId x, RewriteLog* log) {
  const auto& alg = st.algebra();
  check_root_shape(st, root, x, alg.chance_marg, "D_sum");
  const auto sov = drop_var(st.node(root).sov, x);
  const Ids children = st.node(root).children;
  SumDecomposition out{};
  Ids new_children;
  for (NodeId c : children) {
    Ids plus, minus;
    for (NodeId m : st.node(c).children) (st.scope_contains(m, x) ? plus : minus).push_back(m);
    if (plus.empty())
      throw RewriteError(RewriteError::Kind::ShapeMismatch,
                         "D_sum: a product term does not mention the summed variable");
    const NodeId g = st.intern({{alg.chance_marg, {x}}}, alg.product, plus);
    if (std::find(out.inner.begin(), out.inner.end(), g) == out.inner.end()) out.inner.push_back(g);
    minus.push_back(g);
    new_children.push_back(st.intern({}, alg.product, minus));
  }
  out.root = st.intern(sov, alg.sum, new_children);
  if (log) log->record(st, {Rule::DSum, root, out.root, x, std::nullopt});
  return out;
}

std::optional<NodeId> r_sum_step(NodeStore& st, NodeId id) {
  const auto& alg = st.algebra();
  if (!single_block(st, id, alg.chance_marg, alg.product)) return std::nullopt;
  const auto S = st.node(id).sov[0].vars;
  const Ids children = st.node(id).children;
  for (NodeId c : children) {
    if (!single_block(st, c, alg.chance_marg, alg.product)) continue;
    const auto& S2 = st.node(c).sov[0].vars;
    const Ids n1 = without(children, c);
    const Ids& n2 = st.node(c).children;
    bool ok = !scope_meets(st, n1, S2) && disjoint_ids(n1, n2);
    for (VarId v : S2) ok = ok && !contains(S, v);
    if (!ok) continue;
    return st.intern({{alg.chance_marg, merge_vars(S, S2)}}, alg.product, unite(n1, n2));
  }
  return std::nullopt;
}

std::optional<NodeId> s1_sum_step(NodeStore& st, NodeId id) {
  const auto& alg = st.algebra();
  if (!single_block(st, id, alg.chance_marg, alg.product)) return std::nullopt;
  const auto S = st.node(id).sov[0].vars;
  const Ids children = st.node(id).children;
  for (NodeId c : children) {
    if (!st.is_atomic(c)) continue;
    const auto x = st.cpt_of(st.node(c).table);
    if (!x || !contains(S, *x)) continue;
    const Ids rest = without(children, c);
    if (scope_meets(st, rest, {*x})) continue;
    std::vector<VarId> s2;
    for (VarId v : S)
      if (v != *x) s2.push_back(v);
    SovSequence sov;
    if (!s2.empty()) sov.push_back({alg.chance_marg, s2});
    return st.intern(sov, alg.product, rest);
  }
  return std::nullopt;
}

std::optional<NodeId> s2_sum_step(NodeStore& st, NodeId id) {
  if (!is_product_term(st, id)) return std::nullopt;
  const Ids children = st.node(id).children;
  Ids kept;
  for (NodeId c : children)
    if (!is_empty_product(st, c)) kept.push_back(c);
  if (kept.size() == children.size()) return std::nullopt;
  return st.intern({}, st.algebra().product, kept);
}

NodeId r_sum(NodeStore& st, NodeId id, RewriteLog* log) { return fixpoint(st, id, Rule::RSum, log, r_sum_step); }
NodeId s1_sum(NodeStore& st, NodeId id, RewriteLog* log) { return fixpoint(st, id, Rule::S1Sum, log, s1_sum_step); }
NodeId s2_sum(NodeStore& st, NodeId id, RewriteLog* log) { return fixpoint(st, id, Rule::S2Sum, log, s2_sum_step); }

// --- max rules -----------------------------------------------------------------

MaxDecomposition d_max(NodeStore& st, NodeId root, VarId x, RewriteLog* log) {
  const auto& alg = st.algebra();
  check_root_shape(st, root, x, alg.decision_marg, "D_max");
  const auto sov = drop_var(st.node(root).sov, x);
  const Ids children = st.node(root).children;
  MaxDecomposition out{};
  Ids plus;
  for (NodeId c : children) (st.scope_contains(c, x) ? plus : out.untouched).push_back(c);
  if (plus.empty()) {
    out.root = st.intern(sov, alg.sum, children);
    if (log) log->record(st, {Rule::DMax, root, out.root, x, std::nullopt});
    return out;
  }
  // N1: x-free factors shared by every x-mentioning term.
  for (NodeId m : st.node(plus[0]).children)
    if (!st.scope_contains(m, x)) out.common.push_back(m);
  for (std::size_t i = 1; i < plus.size(); ++i) {
    const auto& members = st.node(plus[i]).children;
    std::erase_if(out.common, [&](NodeId m) { return !std::binary_search(members.begin(), members.end(), m); });
  }
  Ids terms;
  for (NodeId c : plus) {
    Ids rest;
    for (NodeId m : st.node(c).children)
      if (!std::binary_search(out.common.begin(), out.common.end(), m)) rest.push_back(m);
    terms.push_back(st.intern({}, alg.product, rest));
  }
  out.inner = st.intern({{alg.decision_marg, {x}}}, alg.sum, terms);
  const NodeId joined = st.intern({}, alg.product, unite(out.common, {*out.inner}));
  out.root = st.intern(sov, alg.sum, unite(out.untouched, {joined}));
  if (log) log->record(st, {Rule::DMax, root, out.root, x, out.inner});
  return out;
}

std::optional<NodeId> r_max_step(NodeStore& st, NodeId id, NodeId* absorbed) {
  const auto& alg = st.algebra();
  if (!single_block(st, id, alg.decision_marg, alg.sum)) return std::nullopt;
  const auto S = st.node(id).sov[0].vars;
  const Ids children = st.node(id).children;
  for (NodeId c : children) {
    if (!is_product_term(st, c)) continue;
    const Ids n1 = without(children, c);
    const Ids members = st.node(c).children;
    for (NodeId m : members) {
      if (!single_block(st, m, alg.decision_marg, alg.sum)) continue;
      const auto& terms = st.node(m).children;
      if (!std::all_of(terms.begin(), terms.end(), [&](NodeId t) { return is_product_term(st, t); })) continue;
      const auto& S2 = st.node(m).sov[0].vars;
      const Ids n2 = without(members, m);
      bool ok = !scope_meets(st, n1, S2) && !scope_meets(st, n2, S2);
      for (VarId v : S2) ok = ok && !contains(S, v);
      for (NodeId t : terms) ok = ok && disjoint_ids(n2, st.node(t).children);
      if (!ok) continue;
      Ids merged;
      for (NodeId t : terms) merged.push_back(st.intern({}, alg.product, unite(n2, st.node(t).children)));
      // Merged terms stay pairwise distinct and outside N1.
      std::set<NodeId> distinct(merged.begin(), merged.end());
      if (distinct.size() != merged.size() || !disjoint_ids(merged, n1)) continue;
      if (absorbed) *absorbed = m;
      return st.intern({{alg.decision_marg, merge_vars(S, S2)}}, alg.sum, unite(n1, merged));
    }
  }
  return std::nullopt;
}

NodeId r_max(NodeStore& st, NodeId id, RewriteLog* log) {
  while (true) {
    NodeId absorbed = 0;
    const auto next = r_max_step(st, id, &absorbed);
    if (!next) return id;
    if (log) log->record(st, {Rule::RMax, id, *next, std::nullopt, absorbed});
    id = *next;
  }
}

// --- cleanup and driver --------------------------------------------------------

NodeId remove_pass_through(NodeStore& st, NodeId root) {
  std::map<NodeId, NodeId> memo;
  std::function<NodeId(NodeId)> rebuild = [&](NodeId id) -> NodeId {
    if (auto it = memo.find(id); it != memo.end()) return it->second;
    const CompNode n = st.node(id);
    NodeId out = id;
    if (!n.atomic) {
      if (n.sov.empty() && n.children.size() == 1) {
        out = rebuild(n.children[0]);
      } else {
        Ids kids;
        std::set<NodeId> seen;
        for (NodeId c : n.children) {
          NodeId r = rebuild(c);
          if (!seen.insert(r).second) {
            // Duplicate after unwrapping: keep the wrapper.
            const auto& cn = st.node(c);
            r = st.intern(cn.sov, cn.comb, {rebuild(cn.children[0])});
            seen.insert(r);
          }
          kids.push_back(r);
        }
        out = st.intern(n.sov, n.comb, kids);
      }
    }
    memo.emplace(id, out);
    return out;
  };
  return rebuild(root);
}

MacroResult macrostructure(NodeStore& st, NodeId n0, const RewriteOptions& options) {
  const auto alg = st.algebra();
  RewriteLog log;
  log.observer = options.observer;
  std::vector<std::size_t> pos(st.variables().size());
  for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = i;
  for (std::size_t i = 0; i < options.file_order.size(); ++i) pos.at(options.file_order[i]) = i;

  NodeId root = n0;
  while (!st.node(root).sov.empty()) {
    const SovBlock block = st.node(root).sov.back();
    const auto pick = [&](VarId a, VarId b) { return pos[a] < pos[b]; };
    const VarId x = options.forward_within_block ? *std::min_element(block.vars.begin(), block.vars.end(), pick)
                                                 : *std::max_element(block.vars.begin(), block.vars.end(), pick);
    if (block.op == alg.chance_marg) {
      const auto ds = d_sum(st, root, x, &log);
      std::map<NodeId, NodeId> repl;
      for (NodeId g : ds.inner) repl[g] = r_sum(st, g, &log);
      for (NodeId g : ds.inner) repl[g] = s1_sum(st, repl[g], &log);
      Ids children;
      for (NodeId c : st.node(ds.root).children) {
        Ids members;
        for (NodeId m : st.node(c).children) members.push_back(repl.count(m) ? repl[m] : m);
        children.push_back(s2_sum(st, st.intern({}, alg.product, members), &log));
      }
      root = st.intern(st.node(ds.root).sov, alg.sum, children);
    } else if (block.op == alg.decision_marg) {
      const auto dm = d_max(st, root, x, &log);
      if (dm.inner && options.check_nonnegativity) {
        Ids factors = dm.common;
        for (NodeId t : st.node(*dm.inner).children)
          for (NodeId m : st.node(t).children)
            if (!st.scope_contains(m, x)) factors.push_back(m);
        check_nonnegative(st, factors, options.check_seed, "D_max");
      }
      root = dm.root;
      if (dm.inner) {
        NodeId m = *dm.inner;
        NodeId absorbed = 0;
        while (const auto next = r_max_step(st, m, &absorbed)) {
          if (options.check_nonnegativity) {
            for (NodeId c : st.node(m).children) {
              const auto& members = st.node(c).children;
              Ids n2;
              for (NodeId k : members)
                if (!single_block(st, k, alg.decision_marg, alg.sum)) n2.push_back(k);
              check_nonnegative(st, n2, options.check_seed, "R_max");
            }
          }
          log.record(st, {Rule::RMax, m, *next, std::nullopt, absorbed});
          m = *next;
        }
        if (m != *dm.inner) {
          const NodeId joined = st.intern({}, alg.product, unite(dm.common, {m}));
          root = st.intern(st.node(dm.root).sov, alg.sum, unite(dm.untouched, {joined}));
        }
      }
    } else {
      throw RewriteError(RewriteError::Kind::ShapeMismatch, "unexpected operator in the root sequence");
    }
  }
  MacroResult out{};
  out.raw_root = root;
  out.root = remove_pass_through(st, root);
  out.trace = std::move(log.trace);
  return out;
}

bool is_mono_operator(const NodeStore& st, NodeId root) {
  const auto& alg = st.algebra();
  for (NodeId id : st.reachable(root)) {
    const auto& n = st.node(id);
    if (n.atomic) continue;
    if (n.sov.size() > 1) return false;
    if (n.sov.size() == 1) {
      const MargOp op = n.sov[0].op;
      if (op == alg.decision_marg && n.comb != alg.sum) return false;
      if (op == alg.chance_marg && n.comb != alg.product) return false;
    }
  }
  return true;
}

}  // namespace mcdag
