#include "mcdag/nodes.hpp"

#include <algorithm>
#include <functional>
#include <iterator>
#include <sstream>

namespace mcdag {

Algebra Algebra::prob() { return {MargOp::Sum, MargOp::Max, CombOp::Times, CombOp::Plus, ValueMode::Real}; }
Algebra Algebra::poss() { return {MargOp::Min, MargOp::Max, CombOp::Max, CombOp::Min, ValueMode::Unit}; }

NodeStore::NodeStore(std::vector<Variable> variables, Algebra algebra)
    : variables_(std::move(variables)), algebra_(algebra) {}

TableId NodeStore::add_table(ScopedTable table, std::string label, std::optional<VarId> cpt_of, bool utility) {
  for (std::size_t i = 0; i < table.scope().size(); ++i) {
    const VarId v = table.scope()[i];
    if (v >= variables_.size() || variables_[v].domain_size != table.dims()[i])
      throw NodeError("table " + label + " does not match the variable universe");
  }
  if (cpt_of && !table.contains(*cpt_of)) throw NodeError("CPT " + label + " does not mention its variable");
  tables_.push_back({std::move(table), std::move(label), cpt_of, utility});
  return static_cast<TableId>(tables_.size() - 1);
}

NodeId NodeStore::atomic(TableId table) {
  if (table >= tables_.size()) throw NodeError("unknown table id " + std::to_string(table));
  CompNode n;
  n.atomic = true;
  n.table = table;
  return insert(std::move(n), {0, table});
}

NodeId NodeStore::intern(SovSequence sov, CombOp comb, std::vector<NodeId> children) {
  for (NodeId c : children)
    if (c >= nodes_.size()) throw NodeError("dangling child id " + std::to_string(c));
  std::sort(children.begin(), children.end());
  children.erase(std::unique(children.begin(), children.end()), children.end());
  CompNode n;
  n.sov = canonicalize(std::move(sov));
  n.comb = comb;
  n.children = std::move(children);
  std::vector<std::uint64_t> key{1, static_cast<std::uint64_t>(comb), n.sov.size()};
  for (const auto& b : n.sov) {
    key.push_back(static_cast<std::uint64_t>(b.op));
    key.push_back(b.vars.size());
    key.insert(key.end(), b.vars.begin(), b.vars.end());
  }
  key.push_back(n.children.size());
  key.insert(key.end(), n.children.begin(), n.children.end());
  return insert(std::move(n), std::move(key));
}

NodeId NodeStore::empty_product() { return intern({}, algebra_.product, {}); }

NodeId NodeStore::insert(CompNode node, std::vector<std::uint64_t> key) {
  if (auto it = index_.find(key); it != index_.end()) return it->second;
  std::vector<VarId> scope;
  bool utility = false;
  if (node.atomic) {
    scope = tables_[node.table].table.scope();
    utility = tables_[node.table].utility;
  } else {
    for (NodeId c : node.children) {
      scope.insert(scope.end(), scopes_[c].begin(), scopes_[c].end());
      utility = utility || has_utility_[c];
    }
  }
  std::sort(scope.begin(), scope.end());
  scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
  if (!node.atomic) {
    auto eliminated = flatten(node.sov);
    std::sort(eliminated.begin(), eliminated.end());
    std::vector<VarId> kept;
    std::set_difference(scope.begin(), scope.end(), eliminated.begin(), eliminated.end(), std::back_inserter(kept));
    scope = std::move(kept);
  }
  const auto id = static_cast<NodeId>(nodes_.size());
  nodes_.push_back(std::move(node));
  scopes_.push_back(std::move(scope));
  has_utility_.push_back(utility);
  index_.emplace(std::move(key), id);
  return id;
}

bool NodeStore::scope_contains(NodeId id, VarId v) const {
  const auto& s = scopes_.at(id);
  return std::binary_search(s.begin(), s.end(), v);
}

std::vector<NodeId> NodeStore::reachable(NodeId root) const {
  std::vector<NodeId> out;
  std::vector<char> seen(nodes_.size(), 0);
  std::function<void(NodeId)> visit = [&](NodeId n) {
    if (seen[n]) return;
    seen[n] = 1;
    for (NodeId c : nodes_[n].children) visit(c);
    out.push_back(n);
  };
  visit(root);
  return out;
}

std::string NodeStore::var_list(const std::vector<VarId>& vars) const {
  std::string s = "{";
  for (std::size_t i = 0; i < vars.size(); ++i) s += (i ? "," : "") + variables_.at(vars[i]).name;
  return s + "}";
}

std::string NodeStore::label(NodeId id) const {
  const auto& n = nodes_.at(id);
  if (n.atomic) return tables_[n.table].label;
  std::string s = "(";
  if (n.sov.empty()) s += "-";
  for (std::size_t i = 0; i < n.sov.size(); ++i)
    s += std::string(i ? " " : "") + to_string(n.sov[i].op) + var_list(n.sov[i].vars);
  return s + ", " + to_string(n.comb) + ")";
}

double NodeEvaluator::value(NodeId id, const Assignment& env) {
  const auto& scope = store_.scope(id);
  std::vector<std::size_t> key;
  key.reserve(scope.size());
  for (VarId v : scope) {
    auto it = env.find(v);
    if (it == env.end()) throw NodeError("variable " + std::to_string(v) + " unassigned during evaluation");
    key.push_back(it->second);
  }
  auto mk = std::make_pair(id, std::move(key));
  if (auto it = memo_.find(mk); it != memo_.end()) return it->second;
  const auto& n = store_.node(id);
  double result;
  if (n.atomic) {
    result = store_.table(n.table).at(env);
  } else {
    std::vector<std::pair<MargOp, VarId>> steps;
    for (const auto& b : n.sov)
      for (VarId v : b.vars) steps.emplace_back(b.op, v);
    Assignment local = env;
    result = eval_sov(n, steps, 0, local);
  }
  memo_.emplace(std::move(mk), result);
  return result;
}

double NodeEvaluator::eval_sov(const CompNode& n, const std::vector<std::pair<MargOp, VarId>>& steps,
                               std::size_t i, Assignment& env) {
  const ValueMode mode = store_.algebra().value_mode;
  if (i == steps.size()) {
    double acc = identity(n.comb, mode);
    for (NodeId c : n.children) acc = apply(n.comb, acc, value(c, env));
    return acc;
  }
  const auto [op, x] = steps[i];
  const auto saved = env.find(x) == env.end() ? std::optional<std::size_t>{} : std::optional<std::size_t>{env[x]};
  double acc = identity(op, mode);
  for (std::size_t v = 0; v < store_.domain_size(x); ++v) {
    env[x] = v;
    acc = apply(fold_op(op), acc, eval_sov(n, steps, i + 1, env));
  }
  if (saved)
    env[x] = *saved;
  else
    env.erase(x);
  return acc;
}

double eval_node(const NodeStore& store, NodeId id, const Assignment& env) {
  const auto& scope = store.scope(id);
  if (env.size() != scope.size())
    throw NodeError("assignment does not match the scope " + store.var_list(scope));
  for (VarId v : scope) {
    auto it = env.find(v);
    if (it == env.end()) throw NodeError("assignment does not match the scope " + store.var_list(scope));
    if (it->second >= store.domain_size(v)) throw NodeError("value out of range");
  }
  NodeEvaluator ev(store);
  return ev.value(id, env);
}

std::vector<Assignment> all_assignments(const NodeStore& store, const std::vector<VarId>& vars) {
  std::vector<Assignment> out;
  Assignment a;
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == vars.size()) {
      out.push_back(a);
      return;
    }
    for (std::size_t v = 0; v < store.domain_size(vars[i]); ++v) {
      a[vars[i]] = v;
      rec(i + 1);
    }
    a.erase(vars[i]);
  };
  rec(0);
  return out;
}

NodeStore make_store(const InfluenceDiagram& d) { return NodeStore(d.variables, Algebra::of(d.mode)); }

NodeId build_n0(NodeStore& store, const InfluenceDiagram& d) {
  const auto& alg = store.algebra();
  std::vector<NodeId> probs;
  for (const auto& [x, t] : d.cpts) {
    std::string label = "P_" + d.var(x).name;
    for (std::size_t i = 0; i + 1 < t.scope().size(); ++i) label += (i ? "," : "|") + d.var(t.scope()[i]).name;
    if (d.mode == Mode::Prob) {
      probs.push_back(store.atomic(store.add_table(t, label, x)));
    } else {
      ScopedTable c = t;
      c.set_tag(TableTag::Generic);
      for (auto& v : c.mutable_values()) v = 1.0 - v;
      probs.push_back(store.atomic(store.add_table(std::move(c), "1-" + label, x)));
    }
  }
  std::vector<NodeId> terms;
  for (const auto& u : d.utilities) {
    auto members = probs;
    members.push_back(store.atomic(store.add_table(u.table, u.name, std::nullopt, true)));
    terms.push_back(store.intern({}, alg.product, std::move(members)));
  }
  return store.intern(sov0(d), alg.sum, std::move(terms));
}

std::string nodes_to_dot(const NodeStore& store, NodeId root) {
  std::ostringstream os;
  os << "digraph nodes {\n  node [shape=box];\n";
  for (NodeId n : store.reachable(root)) {
    std::string label = store.label(n);
    std::string escaped;
    for (char ch : label) {
      if (ch == '"' || ch == '\\') escaped += '\\';
      escaped += ch;
    }
    os << "  n" << n << " [label=\"" << n << ": " << escaped << "\"";
    if (store.is_atomic(n)) os << ", shape=ellipse";
    os << "];\n";
  }
  for (NodeId n : store.reachable(root))
    for (NodeId c : store.node(n).children) os << "  n" << n << " -> n" << c << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace mcdag
