#pragma once

#include <cstddef>
#include <vector>

#include "mcdag/factors.hpp"

namespace mcdag {

struct Hypergraph {
  std::vector<VarId> vertices;  // sorted
  std::vector<std::vector<VarId>> edges;

  void add_edge(std::vector<VarId> edge);
  void add_vertex(VarId v);
};

enum class Heuristic { MinFill, MinDegree, Exhaustive };

const char* to_string(Heuristic h);

struct EliminationOrder {
  std::vector<VarId> order;
  /// Size of the hyperedge created at each step.
  std::vector<std::size_t> step_sizes;
  std::size_t width = 0;
};

class OrderError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The exhaustive search was asked for more than kExhaustiveLimit variables.
class OrderLimitError : public OrderError {
 public:
  using OrderError::OrderError;
};

/// Largest elimination set accepted by the exhaustive search.
inline constexpr std::size_t kExhaustiveLimit = 12;

/// Orders `elim` (a subset of the vertices). Heuristic orders break ties by
/// lowest id; the exhaustive search returns a width-minimal order.
EliminationOrder find_order(const Hypergraph& g, const std::vector<VarId>& elim, Heuristic heuristic);

/// Orders the union of `blocks` so that the last block is eliminated first,
/// then the one before it, and so on.
EliminationOrder find_constrained_order(const Hypergraph& g, const std::vector<std::vector<VarId>>& blocks,
                                        Heuristic heuristic);

/// Step sizes and width of a given order.
EliminationOrder order_width(const Hypergraph& g, const std::vector<VarId>& order);

}  // namespace mcdag
