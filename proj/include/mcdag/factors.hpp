#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace mcdag {

using VarId = std::uint32_t;

enum class VarKind { Chance, Decision };

struct Variable {
  VarId id = 0;
  std::string name;
  VarKind kind = VarKind::Chance;
  std::size_t domain_size = 1;

  bool operator==(const Variable&) const = default;
};

/// Marginalization (elimination) operators.
enum class MargOp { Sum, Max, Min };

/// Combination operators.
enum class CombOp { Plus, Times, Max, Min };

/// Selects the identity of MAX/MIN: the extended reals, or the unit interval
/// used by possibilistic diagrams.
enum class ValueMode { Real, Unit };

enum class TableTag { Probability, Utility, Generic };

const char* to_string(MargOp op);
const char* to_string(CombOp op);

double apply(CombOp op, double a, double b);
double identity(CombOp op, ValueMode mode);

/// The binary operator a marginalization folds with (SUM folds with PLUS).
CombOp fold_op(MargOp op);
double identity(MargOp op, ValueMode mode);

class FactorError : public std::runtime_error {
 public:
  enum class Kind { InconsistentUniverse, UnknownVariable, InvalidAssignment, InvalidArgument, TooLarge };
  FactorError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Partial assignment: variable id -> value index.
using Assignment = std::map<VarId, std::size_t>;

/// Dense function over a finite set of variables. Values are laid out
/// row-major with the LAST scope variable varying fastest.
class ScopedTable {
 public:
  ScopedTable();  // the scalar 0
  ScopedTable(std::vector<VarId> scope, std::vector<std::size_t> dims, std::vector<double> values,
              TableTag tag = TableTag::Generic);

  static ScopedTable scalar(double value, TableTag tag = TableTag::Generic);
  static ScopedTable filled(std::vector<VarId> scope, std::vector<std::size_t> dims, double value,
                            TableTag tag = TableTag::Generic);

  const std::vector<VarId>& scope() const { return scope_; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }
  TableTag tag() const { return tag_; }
  void set_tag(TableTag tag) { tag_ = tag; }

  std::size_t size() const { return values_.size(); }
  bool is_scalar() const { return scope_.empty(); }
  bool contains(VarId v) const;
  /// Domain size of a scope variable; throws UnknownVariable otherwise.
  std::size_t dim_of(VarId v) const;

  /// Linear index of an assignment; variables outside the scope are ignored,
  /// every scope variable must be assigned.
  std::size_t index_of(const Assignment& a) const;
  Assignment assignment_of(std::size_t index) const;
  double at(const Assignment& a) const { return values_[index_of(a)]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool operator==(const ScopedTable&) const = default;

 private:
  std::vector<VarId> scope_;
  std::vector<std::size_t> dims_;
  std::vector<double> values_;
  TableTag tag_ = TableTag::Generic;
};

/// For every assignment of the retained scope, the set of eliminated-variable
/// assignments attaining the optimum. Eliminated assignments are linear
/// indices over `eliminated` (last fastest); sets are sorted ascending so the
/// representative is the lowest index.
struct ChoiceTable {
  std::vector<VarId> retained;
  std::vector<std::size_t> retained_dims;
  std::vector<VarId> eliminated;
  std::vector<std::size_t> eliminated_dims;
  std::vector<std::vector<std::size_t>> sets;

  std::size_t representative(std::size_t retained_index) const { return sets[retained_index].front(); }
  /// Decodes an eliminated-variable linear index.
  Assignment decode(std::size_t eliminated_index) const;
};

struct ArgmaxResult {
  ScopedTable table;
  ChoiceTable choices;
};

/// Running count of binary scalar operations performed by table operations.
std::uint64_t scalar_op_count();
void reset_scalar_op_count();

ScopedTable combine(const ScopedTable& a, const ScopedTable& b, CombOp op);
ScopedTable marginalize(const ScopedTable& t, const std::vector<VarId>& vars, MargOp op,
                        ValueMode mode = ValueMode::Real);

/// Max-marginalization that also records the maximizing assignments. Entries
/// within `tie_tolerance * max(1, |max|)` of the maximum join the choice set.
ArgmaxResult argmax_marginalize(const ScopedTable& t, const std::vector<VarId>& vars,
                                double tie_tolerance = 0.0);

ScopedTable restrict(const ScopedTable& t, const Assignment& a);

/// Broadcasts `t` over a superset scope (given in output order). Not counted.
ScopedTable expand(const ScopedTable& t, const std::vector<VarId>& scope,
                   const std::vector<std::size_t>& dims);

/// Reorders the scope of `t` to ascending variable id. Not counted.
ScopedTable canonical(const ScopedTable& t);

/// Product of domain sizes; throws if it would overflow a practical table.
std::size_t table_size(const std::vector<std::size_t>& dims);

struct SemiringPair {
  MargOp plus;
  CombOp times;
};

struct SemiringReport {
  bool plus_commutative = true;
  bool plus_associative = true;
  bool times_commutative = true;
  bool times_associative = true;
  bool distributive = true;
  bool plus_identity = true;
  bool times_identity = true;
  bool annihilation = true;
  std::size_t samples = 0;

  bool all() const {
    return plus_commutative && plus_associative && times_commutative && times_associative &&
           distributive && plus_identity && times_identity && annihilation;
  }
};

/// Samples the commutative-semiring axioms. MIN/MAX pairs over [0,1] are
/// checked exactly; pairs involving PLUS or TIMES use relative tolerance 1e-12.
SemiringReport check_semiring_axioms(SemiringPair pair, std::size_t samples, std::uint64_t seed);

}  // namespace mcdag
