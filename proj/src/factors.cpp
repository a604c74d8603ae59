#include "mcdag/factors.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace mcdag {

namespace {

std::atomic<std::uint64_t> g_scalar_ops{0};

void count_ops(std::uint64_t n) { g_scalar_ops.fetch_add(n, std::memory_order_relaxed); }

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::size_t> strides_of(const std::vector<std::size_t>& dims) {
  std::vector<std::size_t> s(dims.size(), 1);
  for (std::size_t i = dims.size(); i-- > 1;) s[i - 1] = s[i] * dims[i];
  return s;
}

// Strides of `t` re-expressed over an iteration scope; 0 where `t` lacks the variable.
std::vector<std::size_t> strides_over(const ScopedTable& t, const std::vector<VarId>& scope) {
  const auto own = strides_of(t.dims());
  std::vector<std::size_t> out(scope.size(), 0);
  for (std::size_t i = 0; i < scope.size(); ++i) {
    const auto& ts = t.scope();
    auto it = std::find(ts.begin(), ts.end(), scope[i]);
    if (it != ts.end()) out[i] = own[static_cast<std::size_t>(it - ts.begin())];
  }
  return out;
}

// Odometer over an iteration scope that keeps one linear offset per operand.
class Walker {
 public:
  Walker(std::vector<std::size_t> dims, std::vector<std::vector<std::size_t>> strides)
      : dims_(std::move(dims)), strides_(std::move(strides)), counter_(dims_.size(), 0),
        offsets_(strides_.size(), 0) {}

  std::size_t offset(std::size_t operand) const { return offsets_[operand]; }
  void set_base(std::size_t operand, std::size_t base) { offsets_[operand] = base; }

  void next() {
    for (std::size_t i = dims_.size(); i-- > 0;) {
      ++counter_[i];
      for (std::size_t k = 0; k < strides_.size(); ++k) offsets_[k] += strides_[k][i];
      if (counter_[i] < dims_[i]) return;
      for (std::size_t k = 0; k < strides_.size(); ++k) offsets_[k] -= strides_[k][i] * dims_[i];
      counter_[i] = 0;
    }
  }

 private:
  std::vector<std::size_t> dims_;
  std::vector<std::vector<std::size_t>> strides_;
  std::vector<std::size_t> counter_;
  std::vector<std::size_t> offsets_;
};

std::string var_list(const std::vector<VarId>& vars) {
  std::ostringstream os;
  for (std::size_t i = 0; i < vars.size(); ++i) os << (i ? "," : "") << vars[i];
  return os.str();
}

bool close(double a, double b, double rel) {
  if (a == b) return true;
  if (std::isinf(a) || std::isinf(b)) return false;
  return std::fabs(a - b) <= rel * std::max({1.0, std::fabs(a), std::fabs(b)});
}

}  // namespace

const char* to_string(MargOp op) {
  switch (op) {
    case MargOp::Sum: return "sum";
    case MargOp::Max: return "max";
    case MargOp::Min: return "min";
  }
  return "?";
}

const char* to_string(CombOp op) {
  switch (op) {
    case CombOp::Plus: return "plus";
    case CombOp::Times: return "times";
    case CombOp::Max: return "max";
    case CombOp::Min: return "min";
  }
  return "?";
}

double apply(CombOp op, double a, double b) {
  switch (op) {
    case CombOp::Plus: return a + b;
    case CombOp::Times: return a * b;
    case CombOp::Max: return std::max(a, b);
    case CombOp::Min: return std::min(a, b);
  }
  return 0.0;
}

double identity(CombOp op, ValueMode mode) {
  switch (op) {
    case CombOp::Plus: return 0.0;
    case CombOp::Times: return 1.0;
    case CombOp::Max: return mode == ValueMode::Unit ? 0.0 : -kInf;
    case CombOp::Min: return mode == ValueMode::Unit ? 1.0 : kInf;
  }
  return 0.0;
}

CombOp fold_op(MargOp op) {
  switch (op) {
    case MargOp::Sum: return CombOp::Plus;
    case MargOp::Max: return CombOp::Max;
    case MargOp::Min: return CombOp::Min;
  }
  return CombOp::Plus;
}

double identity(MargOp op, ValueMode mode) { return identity(fold_op(op), mode); }

std::uint64_t scalar_op_count() { return g_scalar_ops.load(std::memory_order_relaxed); }
void reset_scalar_op_count() { g_scalar_ops.store(0, std::memory_order_relaxed); }

std::size_t table_size(const std::vector<std::size_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) {
    if (d == 0) throw FactorError(FactorError::Kind::InvalidArgument, "zero domain size");
    if (n > (std::size_t{1} << 40) / d)
      throw FactorError(FactorError::Kind::TooLarge, "table too large");
    n *= d;
  }
  return n;
}

// --- ScopedTable ------------------------------------------------------------

ScopedTable::ScopedTable() : values_(1, 0.0) {}

ScopedTable::ScopedTable(std::vector<VarId> scope, std::vector<std::size_t> dims,
                         std::vector<double> values, TableTag tag)
    : scope_(std::move(scope)), dims_(std::move(dims)), values_(std::move(values)), tag_(tag) {
  if (scope_.size() != dims_.size())
    throw FactorError(FactorError::Kind::InvalidArgument, "scope and dims differ in length");
  for (std::size_t i = 0; i < scope_.size(); ++i)
    for (std::size_t j = i + 1; j < scope_.size(); ++j)
      if (scope_[i] == scope_[j])
        throw FactorError(FactorError::Kind::InvalidArgument,
                          "duplicate variable " + std::to_string(scope_[i]) + " in scope");
  if (values_.size() != table_size(dims_))
    throw FactorError(FactorError::Kind::InvalidArgument,
                      "expected " + std::to_string(table_size(dims_)) + " values, got " +
                          std::to_string(values_.size()));
  if (tag_ == TableTag::Probability)
    for (double v : values_)
      if (!(v >= 0.0))
        throw FactorError(FactorError::Kind::InvalidArgument, "negative probability value");
}

ScopedTable ScopedTable::scalar(double value, TableTag tag) { return ScopedTable({}, {}, {value}, tag); }

ScopedTable ScopedTable::filled(std::vector<VarId> scope, std::vector<std::size_t> dims, double value,
                                TableTag tag) {
  std::vector<double> values(table_size(dims), value);
  return ScopedTable(std::move(scope), std::move(dims), std::move(values), tag);
}

bool ScopedTable::contains(VarId v) const {
  return std::find(scope_.begin(), scope_.end(), v) != scope_.end();
}

std::size_t ScopedTable::dim_of(VarId v) const {
  for (std::size_t i = 0; i < scope_.size(); ++i)
    if (scope_[i] == v) return dims_[i];
  throw FactorError(FactorError::Kind::UnknownVariable, "variable " + std::to_string(v) + " not in scope");
}

std::size_t ScopedTable::index_of(const Assignment& a) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < scope_.size(); ++i) {
    auto it = a.find(scope_[i]);
    if (it == a.end())
      throw FactorError(FactorError::Kind::InvalidAssignment,
                        "variable " + std::to_string(scope_[i]) + " unassigned");
    if (it->second >= dims_[i])
      throw FactorError(FactorError::Kind::InvalidAssignment,
                        "value " + std::to_string(it->second) + " out of range for variable " +
                            std::to_string(scope_[i]));
    idx = idx * dims_[i] + it->second;
  }
  return idx;
}

Assignment ScopedTable::assignment_of(std::size_t index) const {
  Assignment a;
  for (std::size_t i = scope_.size(); i-- > 0;) {
    a[scope_[i]] = index % dims_[i];
    index /= dims_[i];
  }
  return a;
}

Assignment ChoiceTable::decode(std::size_t eliminated_index) const {
  Assignment a;
  for (std::size_t i = eliminated.size(); i-- > 0;) {
    a[eliminated[i]] = eliminated_index % eliminated_dims[i];
    eliminated_index /= eliminated_dims[i];
  }
  return a;
}

// --- operations -------------------------------------------------------------

ScopedTable combine(const ScopedTable& a, const ScopedTable& b, CombOp op) {
  std::vector<VarId> scope;
  std::vector<std::size_t> dims;
  std::map<VarId, std::size_t> dim_by_var;
  for (const auto* t : {&a, &b}) {
    for (std::size_t i = 0; i < t->scope().size(); ++i) {
      auto [it, inserted] = dim_by_var.emplace(t->scope()[i], t->dims()[i]);
      if (!inserted && it->second != t->dims()[i])
        throw FactorError(FactorError::Kind::InconsistentUniverse,
                          "variable " + std::to_string(t->scope()[i]) + " has domain sizes " +
                              std::to_string(it->second) + " and " + std::to_string(t->dims()[i]));
    }
  }
  for (const auto& [v, d] : dim_by_var) {
    scope.push_back(v);
    dims.push_back(d);
  }
  const std::size_t n = table_size(dims);
  std::vector<double> values(n);
  Walker w(dims, {strides_over(a, scope), strides_over(b, scope)});
  for (std::size_t i = 0; i < n; ++i, w.next())
    values[i] = apply(op, a.values()[w.offset(0)], b.values()[w.offset(1)]);
  count_ops(n);
  return ScopedTable(std::move(scope), std::move(dims), std::move(values), TableTag::Generic);
}

namespace {

struct MarginalLayout {
  std::vector<VarId> kept;
  std::vector<std::size_t> kept_dims;
  std::vector<VarId> elim;
  std::vector<std::size_t> elim_dims;
};

MarginalLayout layout_for(const ScopedTable& t, const std::vector<VarId>& vars) {
  for (VarId v : vars)
    if (!t.contains(v))
      throw FactorError(FactorError::Kind::UnknownVariable,
                        "cannot eliminate variable " + std::to_string(v) + " absent from scope {" +
                            var_list(t.scope()) + "}");
  MarginalLayout l;
  for (std::size_t i = 0; i < t.scope().size(); ++i) {
    const bool drop = std::find(vars.begin(), vars.end(), t.scope()[i]) != vars.end();
    (drop ? l.elim : l.kept).push_back(t.scope()[i]);
    (drop ? l.elim_dims : l.kept_dims).push_back(t.dims()[i]);
  }
  return l;
}

std::vector<std::size_t> strides_for(const std::vector<VarId>& sub, const std::vector<std::size_t>& sub_dims,
                                     const std::vector<VarId>& scope) {
  ScopedTable shape = ScopedTable::filled(sub, sub_dims, 0.0);
  return strides_over(shape, scope);
}

}  // namespace

ScopedTable marginalize(const ScopedTable& t, const std::vector<VarId>& vars, MargOp op, ValueMode mode) {
  const auto l = layout_for(t, vars);
  if (l.elim.empty()) return t;
  const std::size_t out_n = table_size(l.kept_dims);
  std::vector<double> values(out_n, identity(op, mode));
  const CombOp fold = fold_op(op);
  Walker w(t.dims(), {strides_for(l.kept, l.kept_dims, t.scope())});
  for (std::size_t i = 0; i < t.size(); ++i, w.next()) {
    double& slot = values[w.offset(0)];
    slot = apply(fold, slot, t.values()[i]);
  }
  count_ops(t.size() - out_n);
  return ScopedTable(l.kept, l.kept_dims, std::move(values),
                     op == MargOp::Sum ? t.tag() : TableTag::Generic);
}

ArgmaxResult argmax_marginalize(const ScopedTable& t, const std::vector<VarId>& vars, double tie_tolerance) {
  const auto l = layout_for(t, vars);
  const std::size_t out_n = table_size(l.kept_dims);
  std::vector<double> best(out_n, -kInf);
  {
    Walker w(t.dims(), {strides_for(l.kept, l.kept_dims, t.scope())});
    for (std::size_t i = 0; i < t.size(); ++i, w.next()) best[w.offset(0)] = std::max(best[w.offset(0)], t.values()[i]);
  }
  ChoiceTable choices{l.kept, l.kept_dims, l.elim, l.elim_dims, std::vector<std::vector<std::size_t>>(out_n)};
  Walker w(t.dims(), {strides_for(l.kept, l.kept_dims, t.scope()), strides_for(l.elim, l.elim_dims, t.scope())});
  for (std::size_t i = 0; i < t.size(); ++i, w.next()) {
    const double m = best[w.offset(0)];
    const double v = t.values()[i];
    const bool hit = tie_tolerance == 0.0 ? v == m : v >= m - tie_tolerance * std::max(1.0, std::fabs(m));
    if (hit) choices.sets[w.offset(0)].push_back(w.offset(1));
  }
  for (auto& s : choices.sets) std::sort(s.begin(), s.end());
  if (!l.elim.empty()) count_ops(t.size() - out_n);
  return {ScopedTable(l.kept, l.kept_dims, std::move(best), TableTag::Generic), std::move(choices)};
}

ScopedTable restrict(const ScopedTable& t, const Assignment& a) {
  if (a.empty()) return t;
  const auto own = strides_of(t.dims());
  std::vector<VarId> scope;
  std::vector<std::size_t> dims;
  std::vector<std::size_t> strides;
  std::size_t base = 0;
  for (const auto& [v, val] : a) {
    if (!t.contains(v))
      throw FactorError(FactorError::Kind::UnknownVariable,
                        "restricted variable " + std::to_string(v) + " not in scope");
  }
  for (std::size_t i = 0; i < t.scope().size(); ++i) {
    auto it = a.find(t.scope()[i]);
    if (it == a.end()) {
      scope.push_back(t.scope()[i]);
      dims.push_back(t.dims()[i]);
      strides.push_back(own[i]);
    } else {
      if (it->second >= t.dims()[i])
        throw FactorError(FactorError::Kind::InvalidAssignment,
                          "value " + std::to_string(it->second) + " out of range for variable " +
                              std::to_string(it->first));
      base += it->second * own[i];
    }
  }
  const std::size_t n = table_size(dims);
  std::vector<double> values(n);
  Walker w(dims, {strides});
  w.set_base(0, base);
  for (std::size_t i = 0; i < n; ++i, w.next()) values[i] = t.values()[w.offset(0)];
  return ScopedTable(std::move(scope), std::move(dims), std::move(values), t.tag());
}

ScopedTable expand(const ScopedTable& t, const std::vector<VarId>& scope, const std::vector<std::size_t>& dims) {
  for (std::size_t i = 0; i < t.scope().size(); ++i) {
    auto it = std::find(scope.begin(), scope.end(), t.scope()[i]);
    if (it == scope.end())
      throw FactorError(FactorError::Kind::UnknownVariable, "expand target lacks variable " +
                                                                std::to_string(t.scope()[i]));
    if (dims[static_cast<std::size_t>(it - scope.begin())] != t.dims()[i])
      throw FactorError(FactorError::Kind::InconsistentUniverse,
                        "domain mismatch for variable " + std::to_string(t.scope()[i]));
  }
  if (scope == t.scope()) return t;
  const std::size_t n = table_size(dims);
  std::vector<double> values(n);
  Walker w(dims, {strides_over(t, scope)});
  for (std::size_t i = 0; i < n; ++i, w.next()) values[i] = t.values()[w.offset(0)];
  return ScopedTable(scope, dims, std::move(values), t.tag());
}

ScopedTable canonical(const ScopedTable& t) {
  std::vector<std::size_t> perm(t.scope().size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](auto x, auto y) { return t.scope()[x] < t.scope()[y]; });
  std::vector<VarId> scope;
  std::vector<std::size_t> dims;
  for (auto p : perm) {
    scope.push_back(t.scope()[p]);
    dims.push_back(t.dims()[p]);
  }
  return expand(t, scope, dims);
}

// --- semiring axioms --------------------------------------------------------

SemiringReport check_semiring_axioms(SemiringPair pair, std::size_t samples, std::uint64_t seed) {
  const bool lattice = pair.times == CombOp::Max || pair.times == CombOp::Min;
  const ValueMode mode = lattice ? ValueMode::Unit : ValueMode::Real;
  const double tol = lattice && pair.plus != MargOp::Sum ? 0.0 : 1e-12;
  const CombOp plus = fold_op(pair.plus);
  const CombOp times = pair.times;
  const double zero = identity(pair.plus, mode);
  const double one = identity(times, mode);

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> real(-10.0, 10.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> grid(0, 8);
  auto draw = [&]() {
    if (mode == ValueMode::Unit) return (rng() & 1) ? unit(rng) : grid(rng) / 8.0;
    return real(rng);
  };
  auto eq = [&](double x, double y) { return tol == 0.0 ? x == y : close(x, y, tol); };

  SemiringReport r;
  r.samples = samples;
  for (std::size_t s = 0; s < samples; ++s) {
    const double a = draw(), b = draw(), c = draw();
    r.plus_commutative &= eq(apply(plus, a, b), apply(plus, b, a));
    r.times_commutative &= eq(apply(times, a, b), apply(times, b, a));
    r.plus_associative &= eq(apply(plus, apply(plus, a, b), c), apply(plus, a, apply(plus, b, c)));
    r.times_associative &= eq(apply(times, apply(times, a, b), c), apply(times, a, apply(times, b, c)));
    r.distributive &= eq(apply(times, a, apply(plus, b, c)), apply(plus, apply(times, a, b), apply(times, a, c)));
    r.plus_identity &= eq(apply(plus, a, zero), a);
    r.times_identity &= eq(apply(times, a, one), a);
    r.annihilation &= apply(times, a, zero) == zero;
  }
  return r;
}

}  // namespace mcdag
