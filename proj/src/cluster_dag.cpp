#include "mcdag/cluster_dag.hpp"

#include <algorithm>
#include <optional>
#include <sstream>
#include <tuple>

namespace mcdag {

namespace {

std::vector<VarId> sorted_union(std::vector<VarId> a, const std::vector<VarId>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

bool has(const std::vector<VarId>& s, VarId v) { return std::find(s.begin(), s.end(), v) != s.end(); }

bool subset(const std::vector<VarId>& a, const std::vector<VarId>& b) {
  return std::all_of(a.begin(), a.end(), [&](VarId v) { return has(b, v); });
}

ClusterId push(MCDag& dag, Cluster c) {
  c.id = static_cast<ClusterId>(dag.clusters.size());
  std::sort(c.vars.begin(), c.vars.end());
  std::sort(c.eliminated.begin(), c.eliminated.end());
  dag.clusters.push_back(std::move(c));
  return dag.clusters.back().id;
}

void link_parents(MCDag& dag) {
  for (auto& c : dag.clusters) c.parents.clear();
  for (const auto& c : dag.clusters)
    for (ClusterId s : c.sons) {
      auto& p = dag.clusters[s].parents;
      if (std::find(p.begin(), p.end(), c.id) == p.end()) p.push_back(c.id);
    }
}

}  // namespace

std::vector<VarId> Cluster::separator() const {
  std::vector<VarId> out;
  for (VarId v : vars)
    if (!has(eliminated, v)) out.push_back(v);
  return out;
}

Hypergraph hypergraph_of(const NodeStore& store, NodeId id) {
  const auto& n = store.node(id);
  if (n.atomic) throw ClusterError("hypergraph of an atomic node");
  Hypergraph g;
  for (NodeId c : n.children) g.add_edge(store.scope(c));
  for (VarId v : flatten(n.sov)) g.add_vertex(v);
  return g;
}

Hypergraph refined_hypergraph(const NodeStore& store, NodeId id) {
  const auto& n = store.node(id);
  const auto& alg = store.algebra();
  const bool max_node = !n.atomic && n.comb == alg.sum && n.sov.size() == 1 && n.sov[0].op == alg.decision_marg;
  if (!max_node) return hypergraph_of(store, id);
  Hypergraph g;
  for (NodeId c : n.children) {
    const auto& cn = store.node(c);
    const bool term = !cn.atomic && cn.sov.empty() && cn.comb == alg.product;
    std::vector<NodeId> members = term ? cn.children : std::vector<NodeId>{c};
    std::vector<NodeId> bearing;
    for (NodeId m : members)
      if (store.involves_utility(m)) bearing.push_back(m);
    if (bearing.size() != 1) return hypergraph_of(store, id);
    g.add_edge(store.scope(bearing[0]));
    for (VarId v : store.scope(c)) g.add_vertex(v);
  }
  for (VarId v : flatten(n.sov)) g.add_vertex(v);
  return g;
}

std::pair<MargOp, CombOp> cluster_ops(const NodeStore& store, NodeId id) {
  const auto& alg = store.algebra();
  const auto& n = store.node(id);
  if (n.atomic || n.comb == alg.product) return {alg.chance_marg, alg.product};
  if (n.comb == alg.sum) return {alg.decision_marg, alg.sum};
  throw ClusterError("node " + std::to_string(id) + " has no cluster operator pair");
}

ClusterId clusterize(const NodeStore& store, NodeId id, const EliminationOrder& order, MCDag& dag,
                     const std::map<NodeId, ClusterId>& fragments) {
  const auto& n = store.node(id);
  if (n.atomic) throw ClusterError("clusterize expects a composite node");
  const auto& alg = store.algebra();
  for (const auto& b : n.sov)
    if (n.sov.size() > 1 || (b.op == alg.chance_marg) != (n.comb == alg.product))
      throw ClusterError("node " + std::to_string(id) + " is not mono-operator");
  auto expected = flatten(n.sov);
  auto given = order.order;
  std::sort(expected.begin(), expected.end());
  std::sort(given.begin(), given.end());
  if (expected != given) throw ClusterError("order does not eliminate the sov of node " + std::to_string(id));

  struct Item {
    std::vector<VarId> scope;
    bool table;
    std::uint32_t ref;
  };
  std::vector<Item> items;
  for (NodeId c : n.children) {
    if (store.is_atomic(c)) {
      items.push_back({store.scope(c), true, store.node(c).table});
    } else {
      auto it = fragments.find(c);
      if (it == fragments.end()) throw ClusterError("child " + std::to_string(c) + " has no fragment yet");
      items.push_back({store.scope(c), false, it->second});
    }
  }
  const auto [plus, times] = cluster_ops(store, id);
  auto make = [&](const std::vector<Item>& bucket, std::vector<VarId> elim) {
    Cluster c;
    c.vars = elim;
    for (const auto& it : bucket) {
      c.vars = sorted_union(c.vars, it.scope);
      (it.table ? c.tables : c.sons).push_back(it.ref);
    }
    c.plus = plus;
    c.times = times;
    c.eliminated = std::move(elim);
    c.origin = id;
    return c;
  };

  std::optional<ClusterId> last;
  for (VarId x : order.order) {
    std::vector<Item> bucket, rest;
    for (auto& it : items) (has(it.scope, x) ? bucket : rest).push_back(std::move(it));
    Cluster c = make(bucket, {x});
    std::vector<VarId> out_scope;
    for (VarId v : c.vars)
      if (v != x) out_scope.push_back(v);
    last = push(dag, std::move(c));
    rest.push_back({out_scope, false, *last});
    items = std::move(rest);
  }
  if (last && items.size() == 1 && !items[0].table && items[0].ref == *last) return *last;
  return push(dag, make(items, {}));
}

MCDag assemble(const NodeStore& store, NodeId root, const AssembleOptions& options) {
  MCDag dag;
  dag.store = &store;
  std::map<NodeId, ClusterId> fragments;
  if (store.is_atomic(root)) {
    Cluster c;
    c.vars = store.scope(root);
    c.tables = {store.node(root).table};
    std::tie(c.plus, c.times) = cluster_ops(store, root);
    c.origin = root;
    dag.root = push(dag, std::move(c));
    return dag;
  }
  for (NodeId id : store.reachable(root)) {
    if (store.is_atomic(id)) continue;
    const auto elim = flatten(store.node(id).sov);
    const Hypergraph g = options.refined_max_hypergraph ? refined_hypergraph(store, id) : hypergraph_of(store, id);
    EliminationOrder order = find_order(g, elim, options.heuristic);
    if (!elim.empty()) {
      dag.w_mcdag = std::max(dag.w_mcdag, order.width);
      dag.widths.push_back({id, order});
    }
    fragments[id] = clusterize(store, id, order, dag, fragments);
  }
  dag.root = fragments.at(root);
  link_parents(dag);
  return dag;
}

MCDag merge_clusters(const MCDag& m) {
  MCDag out;
  out.store = m.store;
  out.widths = m.widths;
  out.w_mcdag = m.w_mcdag;
  using Key = std::tuple<std::vector<VarId>, std::vector<TableId>, std::vector<ClusterId>, int, int,
                         std::vector<VarId>>;
  std::map<Key, ClusterId> seen;
  std::vector<ClusterId> remap(m.clusters.size());
  for (const auto& c : m.clusters) {
    Cluster n = c;
    for (auto& s : n.sons) s = remap.at(s);
    auto tables = n.tables;
    auto sons = n.sons;
    std::sort(tables.begin(), tables.end());
    std::sort(sons.begin(), sons.end());
    Key key{n.vars, tables, sons, static_cast<int>(n.plus), static_cast<int>(n.times), n.eliminated};
    auto it = seen.find(key);
    if (it != seen.end()) {
      remap[c.id] = it->second;
      continue;
    }
    n.parents.clear();
    const ClusterId id = push(out, std::move(n));
    seen.emplace(std::move(key), id);
    remap[c.id] = id;
  }
  out.root = remap.at(m.root);
  link_parents(out);
  return out;
}

void check_structure(const MCDag& m) {
  if (!m.store) throw ClusterError("MCDAG without a node store");
  const auto& alg = m.store->algebra();
  for (const auto& c : m.clusters) {
    const bool ok_ops = (c.plus == alg.chance_marg && c.times == alg.product) ||
                        (c.plus == alg.decision_marg && c.times == alg.sum);
    if (!ok_ops) throw ClusterError("cluster " + std::to_string(c.id) + " has an invalid operator pair");
    if (!subset(c.eliminated, c.vars))
      throw ClusterError("cluster " + std::to_string(c.id) + " eliminates variables outside V(c)");
    for (TableId t : c.tables)
      if (!subset(m.store->table(t).scope(), c.vars))
        throw ClusterError("cluster " + std::to_string(c.id) + " holds a table outside V(c)");
    for (ClusterId s : c.sons) {
      if (s >= c.id) throw ClusterError("son " + std::to_string(s) + " is not below cluster " + std::to_string(c.id));
      if (!subset(m.cluster(s).separator(), c.vars))
        throw ClusterError("separator of son " + std::to_string(s) + " is not inside cluster " + std::to_string(c.id));
    }
  }
  if (m.root >= m.clusters.size()) throw ClusterError("root out of range");
}

std::string mcdag_to_dot(const MCDag& m) {
  std::ostringstream os;
  os << "digraph mcdag {\n  node [shape=box];\n";
  for (const auto& c : m.clusters) {
    os << "  c" << c.id << " [label=\"" << c.id << ": V=" << m.store->var_list(c.vars) << " (" << to_string(c.plus)
       << "," << to_string(c.times) << ") |Psi|=" << c.tables.size() << " elim=" << m.store->var_list(c.eliminated)
       << "\"";
    if (c.id == m.root) os << ", peripheries=2";
    os << "];\n";
  }
  for (const auto& c : m.clusters)
    for (ClusterId s : c.sons) os << "  c" << c.id << " -> c" << s << ";\n";
  os << "}\n";
  return os.str();
}

}  // namespace mcdag
