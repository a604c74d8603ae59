#pragma once

#include <map>
#include <optional>
#include <vector>

#include "mcdag/cluster_dag.hpp"
#include "mcdag/diagram.hpp"

namespace mcdag {

struct Policy {
  VarId decision = 0;
  /// pa(decision), sorted by id.
  std::vector<VarId> context;
  std::vector<std::size_t> context_dims;
  /// Chosen value per context assignment (last context variable fastest).
  std::vector<std::size_t> rule;
  /// All optimal values per context assignment, when requested.
  std::vector<std::vector<std::size_t>> optimal_sets;

  std::size_t choose(const Assignment& env) const;
};

class SolveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Evaluation {
  ScopedTable value;  // root cluster value
  std::size_t clusters_evaluated = 0;
  /// Argmax records of clusters that eliminate a decision.
  std::map<VarId, ChoiceTable> choices;
};

struct EvaluateOptions {
  bool record_choices = true;
  /// Relative tolerance for joining argmax sets.
  double tie_tolerance = 0.0;
};

Evaluation evaluate_mcdag(const MCDag& m, const EvaluateOptions& options = {});

/// Scalar value of the MCDAG.
double evaluate(const MCDag& m);

/// Turns per-decision argmax records into rules over pa(decision). A record
/// may depend on later-eliminated decisions, which are resolved through
/// their own records. Decisions without a record get rule 0 and every value
/// as optimal.
std::vector<Policy> decode_policies(const InfluenceDiagram& d, const std::map<VarId, ChoiceTable>& records,
                                    bool with_sets);

std::vector<Policy> extract_policies(const MCDag& m, const InfluenceDiagram& d, bool with_sets = false,
                                     double tie_tolerance = 0.0);

/// Expected utility (prob) or pessimistic utility (poss) of a policy set, by
/// enumeration of the chance variables.
double evaluate_policy(const InfluenceDiagram& d, const std::vector<Policy>& policies);

}  // namespace mcdag
