#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcdag/diagram.hpp"
#include "mcdag/factors.hpp"

namespace mcdag {

using NodeId = std::uint32_t;
using TableId = std::uint32_t;

/// Operators used by the rewrite rules. Probabilistic diagrams marginalize
/// chance variables with SUM and combine with TIMES / PLUS; possibilistic ones
/// use MIN and MAX / MIN.
struct Algebra {
  MargOp chance_marg = MargOp::Sum;
  MargOp decision_marg = MargOp::Max;
  CombOp product = CombOp::Times;
  CombOp sum = CombOp::Plus;
  ValueMode value_mode = ValueMode::Real;

  static Algebra prob();
  static Algebra poss();
  static Algebra of(Mode mode) { return mode == Mode::Prob ? prob() : poss(); }
};

struct CompNode {
  bool atomic = false;
  TableId table = 0;
  SovSequence sov;
  CombOp comb = CombOp::Times;
  std::vector<NodeId> children;  // sorted, unique
};

class NodeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Append-only arena of computation nodes. Structurally equal nodes share one id.
class NodeStore {
 public:
  NodeStore(std::vector<Variable> variables, Algebra algebra);

  const Algebra& algebra() const { return algebra_; }
  const std::vector<Variable>& variables() const { return variables_; }
  std::size_t domain_size(VarId v) const { return variables_.at(v).domain_size; }

  /// Registers a table. `cpt_of` marks the conditional distribution of that
  /// variable, the only tables the CPT simplification may drop.
  TableId add_table(ScopedTable table, std::string label, std::optional<VarId> cpt_of = std::nullopt,
                    bool utility = false);
  const ScopedTable& table(TableId id) const { return tables_.at(id).table; }
  const std::string& table_label(TableId id) const { return tables_.at(id).label; }
  std::optional<VarId> cpt_of(TableId id) const { return tables_.at(id).cpt_of; }
  bool is_utility(TableId id) const { return tables_.at(id).utility; }
  std::size_t num_tables() const { return tables_.size(); }

  NodeId atomic(TableId table);
  NodeId intern(SovSequence sov, CombOp comb, std::vector<NodeId> children);
  NodeId empty_product();

  const CompNode& node(NodeId id) const { return nodes_.at(id); }
  bool is_atomic(NodeId id) const { return nodes_.at(id).atomic; }
  std::size_t size() const { return nodes_.size(); }

  /// Sorted scope, memoized.
  const std::vector<VarId>& scope(NodeId id) const { return scopes_.at(id); }
  bool scope_contains(NodeId id, VarId v) const;
  /// True if the node or a descendant holds a utility table.
  bool involves_utility(NodeId id) const { return has_utility_.at(id); }

  /// Nodes reachable from `root`, children before parents.
  std::vector<NodeId> reachable(NodeId root) const;

  std::string label(NodeId id) const;
  std::string var_list(const std::vector<VarId>& vars) const;

 private:
  struct TableEntry {
    ScopedTable table;
    std::string label;
    std::optional<VarId> cpt_of;
    bool utility;
  };

  NodeId insert(CompNode node, std::vector<std::uint64_t> key);

  std::vector<Variable> variables_;
  Algebra algebra_;
  std::vector<TableEntry> tables_;
  std::vector<CompNode> nodes_;
  std::vector<std::vector<VarId>> scopes_;
  std::vector<bool> has_utility_;
  std::map<std::vector<std::uint64_t>, NodeId> index_;
};

/// Reference evaluator: enumerates every sov variable. Memoized per
/// (node, assignment of its scope).
class NodeEvaluator {
 public:
  explicit NodeEvaluator(const NodeStore& store) : store_(store) {}
  /// `env` must assign every scope variable; extra entries are ignored.
  double value(NodeId id, const Assignment& env);

 private:
  double eval_sov(const CompNode& n, const std::vector<std::pair<MargOp, VarId>>& steps, std::size_t i,
                  Assignment& env);

  const NodeStore& store_;
  std::map<std::pair<NodeId, std::vector<std::size_t>>, double> memo_;
};

/// Evaluates a node under an assignment of exactly its scope.
double eval_node(const NodeStore& store, NodeId id, const Assignment& env);

/// Every assignment of `vars` in lexicographic order (last fastest).
std::vector<Assignment> all_assignments(const NodeStore& store, const std::vector<VarId>& vars);

/// Initial computation node of a diagram. Probabilities become 1 - P tables
/// in possibilistic mode.
NodeId build_n0(NodeStore& store, const InfluenceDiagram& d);

/// Store over the variables of `d` with the algebra of its mode.
NodeStore make_store(const InfluenceDiagram& d);

std::string nodes_to_dot(const NodeStore& store, NodeId root);

}  // namespace mcdag
