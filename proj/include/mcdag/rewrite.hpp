#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mcdag/nodes.hpp"

namespace mcdag {

enum class Rule { DSum, RSum, S1Sum, S2Sum, DMax, RMax };

const char* to_string(Rule rule);

struct RewriteEvent {
  Rule rule;
  NodeId target;
  NodeId produced;
  /// Variable handled by a decomposition rule.
  std::optional<VarId> var;
  /// D_max: the created max node. R_max: the absorbed inner max node.
  std::optional<NodeId> inner;
};

struct RewriteTrace {
  std::vector<RewriteEvent> events;

  /// Rule names with consecutive repeats collapsed.
  std::vector<Rule> collapsed() const;
  /// One JSON object per line: {"rule", "target", "produced"[, "var"]}.
  std::string to_jsonl(const NodeStore& store) const;
};

using RewriteObserver = std::function<void(const NodeStore&, const RewriteEvent&)>;

/// Receives every individual rule application.
struct RewriteLog {
  RewriteTrace trace;
  RewriteObserver observer;

  void record(const NodeStore& store, RewriteEvent e);
};

class RewriteError : public std::runtime_error {
 public:
  enum class Kind { ShapeMismatch, Precondition };
  RewriteError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct RewriteOptions {
  RewriteObserver observer;
  /// Temporal order of the diagram's variables; ties inside a block are
  /// processed last-listed first. Empty means ascending id.
  std::vector<VarId> file_order;
  /// Process variables inside a block in listed order instead.
  bool forward_within_block = false;
  /// Sample the nonnegativity preconditions of the max rules.
  bool check_nonnegativity = false;
  std::uint64_t check_seed = 1;
};

struct SumDecomposition {
  NodeId root;
  /// Distinct (Σx, ×, N+x) nodes created, in child order.
  std::vector<NodeId> inner;
};

struct MaxDecomposition {
  NodeId root;
  /// The created (max x, +, N2) node; empty when no child mentions x.
  std::optional<NodeId> inner;
  /// Common factors N1.
  std::vector<NodeId> common;
  /// Root children that do not mention x.
  std::vector<NodeId> untouched;
};

SumDecomposition d_sum(NodeStore& store, NodeId root, VarId x, RewriteLog* log = nullptr);

/// Single applications; empty when the rule does not apply.
std::optional<NodeId> r_sum_step(NodeStore& store, NodeId id);
std::optional<NodeId> s1_sum_step(NodeStore& store, NodeId id);
std::optional<NodeId> s2_sum_step(NodeStore& store, NodeId id);
std::optional<NodeId> r_max_step(NodeStore& store, NodeId id, NodeId* absorbed = nullptr);

/// Fixpoint applications; return the input id when nothing applies.
NodeId r_sum(NodeStore& store, NodeId id, RewriteLog* log = nullptr);
NodeId s1_sum(NodeStore& store, NodeId id, RewriteLog* log = nullptr);
NodeId s2_sum(NodeStore& store, NodeId id, RewriteLog* log = nullptr);
NodeId r_max(NodeStore& store, NodeId id, RewriteLog* log = nullptr);

MaxDecomposition d_max(NodeStore& store, NodeId root, VarId x, RewriteLog* log = nullptr);

/// Replaces every (∅, op, {n}) by n, bottom-up.
NodeId remove_pass_through(NodeStore& store, NodeId root);

struct MacroResult {
  NodeId root;
  /// Root before pass-through removal.
  NodeId raw_root;
  RewriteTrace trace;
};

MacroResult macrostructure(NodeStore& store, NodeId n0, const RewriteOptions& options = {});

/// True when every composite node reachable from `root` uses one
/// marginalization operator and its children do not mix in another one.
bool is_mono_operator(const NodeStore& store, NodeId root);

}  // namespace mcdag
