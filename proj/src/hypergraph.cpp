#include "mcdag/hypergraph.hpp"

#include <algorithm>
#include <limits>
#include <map>
#include <set>

namespace mcdag {

namespace {

using Adjacency = std::map<VarId, std::set<VarId>>;

Adjacency primal(const Hypergraph& g) {
  Adjacency adj;
  for (VarId v : g.vertices) adj[v];
  for (const auto& e : g.edges)
    for (VarId a : e)
      for (VarId b : e)
        if (a != b) adj[a].insert(b);
  return adj;
}

std::size_t fill_in(const Adjacency& adj, VarId x) {
  const auto& nb = adj.at(x);
  std::size_t missing = 0;
  for (auto i = nb.begin(); i != nb.end(); ++i)
    for (auto j = std::next(i); j != nb.end(); ++j)
      if (!adj.at(*i).count(*j)) ++missing;
  return missing;
}

std::size_t eliminate(Adjacency& adj, VarId x) {
  const auto nb = adj.at(x);
  for (VarId a : nb) {
    adj[a].erase(x);
    for (VarId b : nb)
      if (a != b) adj[a].insert(b);
  }
  adj.erase(x);
  return nb.size();
}

void check_subset(const Hypergraph& g, const std::vector<VarId>& elim) {
  for (VarId v : elim)
    if (!std::binary_search(g.vertices.begin(), g.vertices.end(), v))
      throw OrderError("variable " + std::to_string(v) + " to eliminate is not a vertex");
}

void greedy(Adjacency& adj, std::vector<VarId> pending, Heuristic h, EliminationOrder& out) {
  std::sort(pending.begin(), pending.end());
  while (!pending.empty()) {
    std::size_t best = 0;
    std::size_t best_cost = std::numeric_limits<std::size_t>::max();
    for (std::size_t i = 0; i < pending.size(); ++i) {
      const std::size_t cost = h == Heuristic::MinFill ? fill_in(adj, pending[i]) : adj.at(pending[i]).size();
      if (cost < best_cost) {
        best_cost = cost;
        best = i;
      }
    }
    const VarId x = pending[best];
    pending.erase(pending.begin() + static_cast<std::ptrdiff_t>(best));
    const std::size_t size = eliminate(adj, x);
    out.order.push_back(x);
    out.step_sizes.push_back(size);
    out.width = std::max(out.width, size);
  }
}

// Subset dynamic programme over elimination prefixes. `block_of[i]` orders
// the variables: i may go only once every variable of a higher block is gone.
EliminationOrder exhaustive(const Hypergraph& g, const std::vector<VarId>& elim, const std::vector<int>& block_of) {
  const std::size_t k = elim.size();
  if (k > kExhaustiveLimit)
    throw OrderLimitError("exhaustive ordering supports at most " + std::to_string(kExhaustiveLimit) + " variables");
  const Adjacency adj = primal(g);
  std::map<VarId, std::size_t> bit;
  for (std::size_t i = 0; i < k; ++i) bit[elim[i]] = i;

  // Vertices reachable from x through eliminated vertices only.
  auto created = [&](std::size_t xi, std::uint32_t done) {
    std::set<VarId> seen{elim[xi]};
    std::vector<VarId> stack{elim[xi]};
    std::size_t count = 0;
    while (!stack.empty()) {
      const VarId v = stack.back();
      stack.pop_back();
      for (VarId w : adj.at(v)) {
        if (!seen.insert(w).second) continue;
        auto it = bit.find(w);
        if (it != bit.end() && (done >> it->second & 1u))
          stack.push_back(w);
        else
          ++count;
      }
    }
    return count;
  };
  auto allowed = [&](std::size_t xi, std::uint32_t done) {
    for (std::size_t j = 0; j < k; ++j)
      if (block_of[j] > block_of[xi] && !(done >> j & 1u)) return false;
    return true;
  };

  const std::uint32_t full = k == 0 ? 0 : static_cast<std::uint32_t>((1u << k) - 1);
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> best(std::size_t{1} << k, kInf);
  best[0] = 0;
  for (std::uint32_t t = 1; t <= full; ++t) {
    for (std::size_t i = 0; i < k; ++i) {
      if (!(t >> i & 1u)) continue;
      const std::uint32_t before = t & ~(1u << i);
      if (best[before] == kInf || !allowed(i, before)) continue;
      best[t] = std::min(best[t], std::max(best[before], created(i, before)));
    }
  }
  // Walk back from the full set; among optimal last steps prefer the one that
  // leaves the lowest id earliest in the order.
  std::vector<VarId> reversed;
  std::uint32_t t = full;
  while (t) {
    std::size_t pick = k;
    for (std::size_t i = 0; i < k; ++i) {
      if (!(t >> i & 1u)) continue;
      const std::uint32_t before = t & ~(1u << i);
      if (best[before] == kInf || !allowed(i, before)) continue;
      if (std::max(best[before], created(i, before)) != best[t]) continue;
      if (pick == k || elim[i] > elim[pick]) pick = i;
    }
    reversed.push_back(elim[pick]);
    t &= ~(1u << pick);
  }
  std::reverse(reversed.begin(), reversed.end());
  return order_width(g, reversed);
}

}  // namespace

void Hypergraph::add_vertex(VarId v) {
  auto it = std::lower_bound(vertices.begin(), vertices.end(), v);
  if (it == vertices.end() || *it != v) vertices.insert(it, v);
}

void Hypergraph::add_edge(std::vector<VarId> edge) {
  std::sort(edge.begin(), edge.end());
  edge.erase(std::unique(edge.begin(), edge.end()), edge.end());
  for (VarId v : edge) add_vertex(v);
  edges.push_back(std::move(edge));
}

const char* to_string(Heuristic h) {
  switch (h) {
    case Heuristic::MinFill: return "min-fill";
    case Heuristic::MinDegree: return "min-degree";
    case Heuristic::Exhaustive: return "exhaustive";
  }
  return "?";
}

EliminationOrder order_width(const Hypergraph& g, const std::vector<VarId>& order) {
  check_subset(g, order);
  Adjacency adj = primal(g);
  EliminationOrder out;
  for (VarId x : order) {
    const std::size_t size = eliminate(adj, x);
    out.order.push_back(x);
    out.step_sizes.push_back(size);
    out.width = std::max(out.width, size);
  }
  return out;
}

EliminationOrder find_order(const Hypergraph& g, const std::vector<VarId>& elim, Heuristic heuristic) {
  std::vector<VarId> vars = elim;
  std::sort(vars.begin(), vars.end());
  vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
  check_subset(g, vars);
  if (heuristic == Heuristic::Exhaustive) return exhaustive(g, vars, std::vector<int>(vars.size(), 0));
  Adjacency adj = primal(g);
  EliminationOrder out;
  greedy(adj, vars, heuristic, out);
  return out;
}

EliminationOrder find_constrained_order(const Hypergraph& g, const std::vector<std::vector<VarId>>& blocks,
                                        Heuristic heuristic) {
  std::vector<VarId> vars;
  std::vector<int> block_of;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (VarId v : blocks[b]) {
      vars.push_back(v);
      block_of.push_back(static_cast<int>(b));
    }
  check_subset(g, vars);
  if (heuristic == Heuristic::Exhaustive) return exhaustive(g, vars, block_of);
  Adjacency adj = primal(g);
  EliminationOrder out;
  for (std::size_t b = blocks.size(); b-- > 0;) greedy(adj, blocks[b], heuristic, out);
  return out;
}

}  // namespace mcdag
