#pragma once

#include <cstddef>
#include <vector>

#include "mcdag/diagram.hpp"
#include "mcdag/hypergraph.hpp"
#include "mcdag/solve.hpp"

namespace mcdag {

/// A pair (p, u) over sc(p) ∪ sc(u).
struct Potential {
  ScopedTable p;
  ScopedTable u;

  std::vector<VarId> scope() const;
};

class BaselineError : public std::runtime_error {
 public:
  enum class Kind { InvalidElimination, NumericAnomaly, ResourceGuard, Unsupported };
  BaselineError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

Potential pot_combine(const Potential& a, const Potential& b);

/// (Σ p, Σ p·u / Σ p) with 0/0 = 0.
Potential pot_marg_chance(const Potential& pi, const std::vector<VarId>& vars);

struct DecisionMarginal {
  Potential potential;
  ChoiceTable choices;
};

/// (p, max u). A p that mentions the decision must be constant in it.
DecisionMarginal pot_marg_decision(const Potential& pi, VarId decision, std::size_t domain_size);

/// The untyped hypergraph (C ∪ D, {sc(φ) | φ ∈ P ∪ U}).
Hypergraph diagram_hypergraph(const InfluenceDiagram& d);

/// The blocks of the elimination partial order, earliest first.
std::vector<std::vector<VarId>> order_blocks(const InfluenceDiagram& d);

struct PotentialResult {
  double value = 0.0;
  std::vector<Policy> policies;
  std::size_t width = 0;
  EliminationOrder order;
};

PotentialResult potential_ve(const InfluenceDiagram& d, Heuristic heuristic = Heuristic::MinFill,
                             bool with_sets = false);

/// Largest number of eliminable variables accepted by the exhaustive mode.
inline constexpr std::size_t kExactWidthLimit = 8;

std::size_t constrained_width(const InfluenceDiagram& d, Heuristic heuristic);

struct BruteForceResult {
  double value = 0.0;
  /// Per decision: optimal value sets indexed like the policy context.
  std::vector<Policy> policies;
};

struct BruteForceOptions {
  /// Limit on the sum of log2 domain sizes.
  double max_log2_states = 16.0;
  double tie_tolerance = 1e-9;
};

BruteForceResult brute_force(const InfluenceDiagram& d, const BruteForceOptions& options = {});

}  // namespace mcdag
