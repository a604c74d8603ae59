#pragma once

#include <map>
#include <string>
#include <vector>

#include "mcdag/hypergraph.hpp"
#include "mcdag/nodes.hpp"

namespace mcdag {

using ClusterId = std::uint32_t;

struct Cluster {
  ClusterId id = 0;
  std::vector<VarId> vars;        // V(c), sorted
  std::vector<TableId> tables;    // Ψ(c)
  std::vector<ClusterId> sons;
  MargOp plus = MargOp::Sum;
  CombOp times = CombOp::Times;
  std::vector<VarId> eliminated;  // V(c) minus the message scope
  std::vector<ClusterId> parents;
  NodeId origin = 0;

  /// Scope of the message sent to parents.
  std::vector<VarId> separator() const;
};

struct NodeWidth {
  NodeId node;
  EliminationOrder order;
};

/// Sons always have lower ids than their parents.
struct MCDag {
  const NodeStore* store = nullptr;
  std::vector<Cluster> clusters;
  ClusterId root = 0;
  std::vector<NodeWidth> widths;
  std::size_t w_mcdag = 0;

  const Cluster& cluster(ClusterId id) const { return clusters.at(id); }
  std::size_t size() const { return clusters.size(); }
};

class ClusterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AssembleOptions {
  Heuristic heuristic = Heuristic::MinFill;
  /// Order max nodes on the utility-focused hypergraph (values are unaffected).
  bool refined_max_hypergraph = false;
};

/// Vertices: child scopes plus eliminated variables; one hyperedge per child.
Hypergraph hypergraph_of(const NodeStore& store, NodeId id);

/// For a (max_S, +, {(∅, ×, N')}) node: one hyperedge per term, the scope of
/// its unique utility-bearing member. Falls back to hypergraph_of.
Hypergraph refined_hypergraph(const NodeStore& store, NodeId id);

/// Cluster operators of a mono-operator node.
std::pair<MargOp, CombOp> cluster_ops(const NodeStore& store, NodeId id);

/// Builds the bucket-elimination fragment of one node into `dag`. Composite
/// children are looked up in `fragments`, which must already hold them.
ClusterId clusterize(const NodeStore& store, NodeId id, const EliminationOrder& order, MCDag& dag,
                     const std::map<NodeId, ClusterId>& fragments);

MCDag assemble(const NodeStore& store, NodeId root, const AssembleOptions& options = {});

/// Unifies clusters with equal variables, tables, merged sons, operators and
/// eliminated sets.
MCDag merge_clusters(const MCDag& m);

/// Checks son ordering, containment and separator consistency; throws ClusterError.
void check_structure(const MCDag& m);

std::string mcdag_to_dot(const MCDag& m);

}  // namespace mcdag
