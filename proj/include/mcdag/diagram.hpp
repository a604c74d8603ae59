#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mcdag/factors.hpp"

namespace mcdag {

enum class Mode { Prob, Poss };

const char* to_string(Mode mode);

struct UtilityFn {
  std::string name;
  ScopedTable table;

  bool operator==(const UtilityFn&) const = default;
};

/// One (operator, variables) pair of an elimination sequence.
struct SovBlock {
  MargOp op = MargOp::Sum;
  std::vector<VarId> vars;

  bool operator==(const SovBlock&) const = default;
  auto operator<=>(const SovBlock&) const = default;
};

using SovSequence = std::vector<SovBlock>;

/// Drops empty blocks, merges adjacent blocks with the same operator and
/// sorts the variables of each block.
SovSequence canonicalize(SovSequence sov);

/// All variables of a sequence, left to right.
std::vector<VarId> flatten(const SovSequence& sov);

class DiagramError : public std::runtime_error {
 public:
  enum class Kind {
    Syntax,
    UnknownVariable,
    ValueCount,
    Normalization,
    Cycle,
    UtilityNotLeaf,
    NoForgetting,
    BlockPartition,
    InvalidArgument,
  };
  DiagramError(Kind kind, const std::string& what, int line = 0);
  Kind kind() const { return kind_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  int line_;
};

/// Source line numbers of diagram items, used to annotate validation errors.
struct SourceLines {
  std::map<VarId, int> variables;
  std::map<VarId, int> cpts;
  std::vector<int> utilities;
  int order = 0;
};

struct InfluenceDiagram {
  Mode mode = Mode::Prob;
  std::vector<Variable> variables;
  /// Chance variables: CPT scope minus the child, in CPT order.
  /// Decisions: every variable preceding it in the temporal order.
  std::vector<std::vector<VarId>> parents;
  std::map<VarId, ScopedTable> cpts;
  std::vector<UtilityFn> utilities;
  /// I0, D1, I1, ..., Dq, Iq. Decision blocks are singletons.
  std::vector<std::vector<VarId>> blocks;

  std::size_t num_variables() const { return variables.size(); }
  const Variable& var(VarId id) const { return variables.at(id); }
  std::optional<VarId> find(const std::string& name) const;
  bool is_decision(VarId id) const { return variables.at(id).kind == VarKind::Decision; }
  std::vector<VarId> decisions() const;
  std::vector<VarId> chance_variables() const;
  std::vector<std::size_t> dims_of(const std::vector<VarId>& scope) const;
  std::vector<std::size_t> domain_sizes() const;
  /// Variables in temporal order (block by block, file order inside a block).
  std::vector<VarId> temporal_order() const;

  bool operator==(const InfluenceDiagram&) const = default;
};

/// Checks every structural and numeric invariant. Sets the observed sets of
/// decisions from the block sequence and injects a constant utility when
/// none is present. Throws DiagramError.
void validate(InfluenceDiagram& d, const SourceLines* lines = nullptr);

/// Checks a diagram whose decision parents were set by hand, including the
/// no-forgetting condition. Does not modify the diagram.
void check_structure(const InfluenceDiagram& d, const SourceLines* lines = nullptr);

/// Name of the utility injected by validate() when the diagram has none.
inline constexpr const char* kConstantUtilityName = "U_const";

SovSequence sov0(const InfluenceDiagram& d);

/// Generation parameters for random diagrams.
struct RandomSpec {
  std::size_t vars = 5;
  std::size_t decisions = 1;
  std::size_t max_domain = 3;
  std::size_t max_parents = 2;
  Mode mode = Mode::Prob;
  std::uint64_t seed = 1;
  /// 0 picks a count in [1, 3].
  std::size_t utilities = 0;
  std::size_t max_utility_scope = 3;
};

InfluenceDiagram random_id(const RandomSpec& spec);

/// Named fixtures: "fig2", "fig3", "chain", "star". `n` is used by
/// the parameterized families; numbers are drawn from `seed`.
InfluenceDiagram fixture(const std::string& name, std::size_t n = 2, std::uint64_t seed = 1,
                         std::size_t domain = 2);

}  // namespace mcdag
