#include "mcdag/diagram.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <set>

namespace mcdag {

namespace {

constexpr double kNormTolerance = 1e-9;

std::string join_names(const InfluenceDiagram& d, const std::vector<VarId>& vars) {
  std::string s;
  for (std::size_t i = 0; i < vars.size(); ++i) s += (i ? "," : "") + d.var(vars[i]).name;
  return s;
}

int line_of(const std::map<VarId, int>* m, VarId v) {
  if (!m) return 0;
  auto it = m->find(v);
  return it == m->end() ? 0 : it->second;
}

std::string assignment_text(const InfluenceDiagram& d, const std::vector<VarId>& scope,
                            const std::vector<std::size_t>& dims, std::size_t index) {
  std::vector<std::size_t> vals(scope.size());
  for (std::size_t i = scope.size(); i-- > 0;) {
    vals[i] = index % dims[i];
    index /= dims[i];
  }
  std::string s;
  for (std::size_t i = 0; i < scope.size(); ++i)
    s += (i ? "," : "") + d.var(scope[i]).name + "=" + std::to_string(vals[i]);
  return s.empty() ? "(no parents)" : s;
}

void check_table_scope(const InfluenceDiagram& d, const ScopedTable& t, const std::string& what, int line) {
  for (std::size_t i = 0; i < t.scope().size(); ++i) {
    const VarId v = t.scope()[i];
    if (v >= d.num_variables())
      throw DiagramError(DiagramError::Kind::UnknownVariable,
                         what + " refers to unknown variable id " + std::to_string(v), line);
    if (t.dims()[i] != d.var(v).domain_size)
      throw DiagramError(DiagramError::Kind::ValueCount,
                         what + ": domain of " + d.var(v).name + " is " +
                             std::to_string(d.var(v).domain_size) + ", table uses " +
                             std::to_string(t.dims()[i]),
                         line);
  }
}

void check_cpt(const InfluenceDiagram& d, VarId x, const ScopedTable& t, int line) {
  const std::string what = "CPT of " + d.var(x).name;
  if (t.scope().empty() || t.scope().back() != x)
    throw DiagramError(DiagramError::Kind::InvalidArgument, what + " must list the child last", line);
  check_table_scope(d, t, what, line);
  const std::size_t k = d.var(x).domain_size;
  const std::size_t rows = t.size() / k;
  std::vector<VarId> parent_scope(t.scope().begin(), t.scope().end() - 1);
  std::vector<std::size_t> parent_dims(t.dims().begin(), t.dims().end() - 1);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0, top = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double v = t.values()[r * k + j];
      if (!(v >= 0.0) || (d.mode == Mode::Poss && v > 1.0))
        throw DiagramError(DiagramError::Kind::Normalization,
                           what + ": value out of range at " +
                               assignment_text(d, parent_scope, parent_dims, r),
                           line);
      total += v;
      top = std::max(top, v);
    }
    const bool ok = d.mode == Mode::Prob ? std::fabs(total - 1.0) <= kNormTolerance
                                         : std::fabs(top - 1.0) <= kNormTolerance;
    if (!ok)
      throw DiagramError(DiagramError::Kind::Normalization,
                         what + " is not normalized at " +
                             assignment_text(d, parent_scope, parent_dims, r) + " (" +
                             (d.mode == Mode::Prob ? "sum " + std::to_string(total)
                                                   : "max " + std::to_string(top)) +
                             ")",
                         line);
  }
}

}  // namespace

const char* to_string(Mode mode) { return mode == Mode::Prob ? "prob" : "poss"; }

DiagramError::DiagramError(Kind kind, const std::string& what, int line)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
      kind_(kind),
      line_(line) {}

SovSequence canonicalize(SovSequence sov) {
  SovSequence out;
  for (auto& b : sov) {
    if (b.vars.empty()) continue;
    if (!out.empty() && out.back().op == b.op)
      out.back().vars.insert(out.back().vars.end(), b.vars.begin(), b.vars.end());
    else
      out.push_back(std::move(b));
  }
  for (auto& b : out) {
    std::sort(b.vars.begin(), b.vars.end());
    b.vars.erase(std::unique(b.vars.begin(), b.vars.end()), b.vars.end());
  }
  return out;
}

std::vector<VarId> flatten(const SovSequence& sov) {
  std::vector<VarId> out;
  for (const auto& b : sov) out.insert(out.end(), b.vars.begin(), b.vars.end());
  return out;
}

std::optional<VarId> InfluenceDiagram::find(const std::string& name) const {
  for (const auto& v : variables)
    if (v.name == name) return v.id;
  return std::nullopt;
}

std::vector<VarId> InfluenceDiagram::decisions() const {
  std::vector<VarId> out;
  for (std::size_t k = 1; k < blocks.size(); k += 2) out.insert(out.end(), blocks[k].begin(), blocks[k].end());
  return out;
}

std::vector<VarId> InfluenceDiagram::chance_variables() const {
  std::vector<VarId> out;
  for (const auto& v : variables)
    if (v.kind == VarKind::Chance) out.push_back(v.id);
  return out;
}

std::vector<std::size_t> InfluenceDiagram::dims_of(const std::vector<VarId>& scope) const {
  std::vector<std::size_t> out;
  out.reserve(scope.size());
  for (VarId v : scope) out.push_back(var(v).domain_size);
  return out;
}

std::vector<std::size_t> InfluenceDiagram::domain_sizes() const {
  std::vector<std::size_t> out;
  for (const auto& v : variables) out.push_back(v.domain_size);
  return out;
}

std::vector<VarId> InfluenceDiagram::temporal_order() const {
  std::vector<VarId> out;
  for (const auto& b : blocks) out.insert(out.end(), b.begin(), b.end());
  return out;
}

void check_structure(const InfluenceDiagram& d, const SourceLines* lines) {
  const std::size_t n = d.num_variables();
  const int order_line = lines ? lines->order : 0;
  std::set<std::string> names;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& v = d.variables[i];
    const int line = line_of(lines ? &lines->variables : nullptr, static_cast<VarId>(i));
    if (v.id != i)
      throw DiagramError(DiagramError::Kind::InvalidArgument, "variable ids must be dense", line);
    if (v.domain_size < 1)
      throw DiagramError(DiagramError::Kind::InvalidArgument, "variable " + v.name + " has an empty domain",
                         line);
    if (v.name.empty() || !names.insert(v.name).second)
      throw DiagramError(DiagramError::Kind::InvalidArgument, "duplicate or empty variable name '" + v.name + "'",
                         line);
  }
  if (d.parents.size() != n)
    throw DiagramError(DiagramError::Kind::InvalidArgument, "parent lists do not match the variables");

  if (d.blocks.size() % 2 == 0)
    throw DiagramError(DiagramError::Kind::BlockPartition,
                       "the order must have an odd number of segments (I0 / D1 / ... / Iq)", order_line);
  std::vector<int> seen(n, 0);
  for (std::size_t k = 0; k < d.blocks.size(); ++k) {
    const bool decision_slot = k % 2 == 1;
    if (decision_slot && d.blocks[k].size() != 1) {
      if (d.blocks[k].size() > 1)
        throw DiagramError(DiagramError::Kind::NoForgetting,
                           "decisions " + join_names(d, d.blocks[k]) +
                               " share one slot; each decision must observe the previous one",
                           order_line);
      throw DiagramError(DiagramError::Kind::BlockPartition, "empty decision slot in the order", order_line);
    }
    for (VarId v : d.blocks[k]) {
      if (v >= n)
        throw DiagramError(DiagramError::Kind::UnknownVariable, "unknown variable id in the order", order_line);
      if (decision_slot != d.is_decision(v))
        throw DiagramError(DiagramError::Kind::BlockPartition,
                           d.var(v).name + (decision_slot ? " is not a decision but sits in a decision slot"
                                                          : " is a decision but sits in an observation slot"),
                           order_line);
      if (seen[v]++)
        throw DiagramError(DiagramError::Kind::BlockPartition, d.var(v).name + " appears twice in the order",
                           order_line);
    }
  }
  for (std::size_t v = 0; v < n; ++v)
    if (!seen[v])
      throw DiagramError(DiagramError::Kind::BlockPartition,
                         d.variables[v].name + " is missing from the order", order_line);

  // Decision k observes exactly what precedes it; consecutive decisions therefore nest.
  std::vector<VarId> prefix;
  std::vector<VarId> previous;
  std::optional<VarId> previous_decision;
  for (std::size_t k = 0; k < d.blocks.size(); ++k) {
    if (k % 2 == 1) {
      const VarId dk = d.blocks[k][0];
      std::vector<VarId> pa = d.parents[dk];
      std::sort(pa.begin(), pa.end());
      if (previous_decision) {
        std::vector<VarId> need = previous;
        need.push_back(*previous_decision);
        std::sort(need.begin(), need.end());
        if (!std::includes(pa.begin(), pa.end(), need.begin(), need.end()))
          throw DiagramError(DiagramError::Kind::NoForgetting,
                             "decision " + d.var(dk).name + " forgets information available to " +
                                 d.var(*previous_decision).name,
                             order_line);
      }
      std::vector<VarId> expected = prefix;
      std::sort(expected.begin(), expected.end());
      if (pa != expected)
        throw DiagramError(DiagramError::Kind::NoForgetting,
                           "decision " + d.var(dk).name + " must observe exactly {" + join_names(d, expected) + "}",
                           order_line);
      previous = pa;
      previous_decision = dk;
    }
    prefix.insert(prefix.end(), d.blocks[k].begin(), d.blocks[k].end());
  }

  for (std::size_t v = 0; v < n; ++v)
    for (VarId p : d.parents[v])
      if (p >= n)
        throw DiagramError(DiagramError::Kind::UnknownVariable, "unknown parent id of " + d.variables[v].name);

  // Acyclicity over parent edges.
  std::vector<int> state(n, 0);
  std::function<void(VarId)> visit = [&](VarId v) {
    state[v] = 1;
    for (VarId p : d.parents[v]) {
      if (state[p] == 1)
        throw DiagramError(DiagramError::Kind::Cycle,
                           "cycle through " + d.var(p).name + " and " + d.var(v).name,
                           line_of(lines ? &lines->cpts : nullptr, v));
      if (state[p] == 0) visit(p);
    }
    state[v] = 2;
  };
  for (std::size_t v = 0; v < n; ++v)
    if (state[v] == 0) visit(static_cast<VarId>(v));
}

void validate(InfluenceDiagram& d, const SourceLines* lines) {
  const std::size_t n = d.num_variables();
  d.parents.resize(n);
  const auto* cpt_lines = lines ? &lines->cpts : nullptr;

  for (const auto& [x, t] : d.cpts) {
    if (x >= n)
      throw DiagramError(DiagramError::Kind::UnknownVariable, "CPT for unknown variable id " + std::to_string(x));
    if (d.is_decision(x))
      throw DiagramError(DiagramError::Kind::InvalidArgument,
                         "decision " + d.var(x).name + " cannot have a CPT", line_of(cpt_lines, x));
  }
  for (const auto& v : d.variables) {
    if (v.kind != VarKind::Chance) continue;
    auto it = d.cpts.find(v.id);
    if (it == d.cpts.end())
      throw DiagramError(DiagramError::Kind::InvalidArgument, "chance variable " + v.name + " has no CPT",
                         line_of(lines ? &lines->variables : nullptr, v.id));
    check_cpt(d, v.id, it->second, line_of(cpt_lines, v.id));
    it->second.set_tag(TableTag::Probability);
    d.parents[v.id].assign(it->second.scope().begin(), it->second.scope().end() - 1);
  }

  // Observed sets of decisions come from the order.
  std::vector<VarId> prefix;
  for (std::size_t k = 0; k < d.blocks.size(); ++k) {
    if (k % 2 == 1)
      for (VarId v : d.blocks[k])
        if (v < n) d.parents[v] = prefix;
    prefix.insert(prefix.end(), d.blocks[k].begin(), d.blocks[k].end());
  }

  if (d.utilities.empty())
    d.utilities.push_back({kConstantUtilityName, ScopedTable::scalar(d.mode == Mode::Prob ? 0.0 : 1.0)});
  std::set<std::string> unames;
  for (std::size_t i = 0; i < d.utilities.size(); ++i) {
    auto& u = d.utilities[i];
    const int line = lines && i < lines->utilities.size() ? lines->utilities[i] : 0;
    if (u.name.empty() || !unames.insert(u.name).second || d.find(u.name))
      throw DiagramError(DiagramError::Kind::InvalidArgument, "duplicate utility name '" + u.name + "'", line);
    check_table_scope(d, u.table, "utility " + u.name, line);
    if (d.mode == Mode::Poss)
      for (double v : u.table.values())
        if (!(v >= 0.0 && v <= 1.0))
          throw DiagramError(DiagramError::Kind::Normalization,
                             "utility " + u.name + " has a value outside [0,1]", line);
    u.table.set_tag(TableTag::Utility);
  }
  check_structure(d, lines);
}

SovSequence sov0(const InfluenceDiagram& d) {
  const MargOp chance = d.mode == Mode::Prob ? MargOp::Sum : MargOp::Min;
  SovSequence sov;
  for (std::size_t k = 0; k < d.blocks.size(); ++k) sov.push_back({k % 2 ? MargOp::Max : chance, d.blocks[k]});
  return canonicalize(std::move(sov));
}

// --- generators ---------------------------------------------------------------

namespace {

class Builder {
 public:
  explicit Builder(Mode mode) { d_.mode = mode; }

  VarId add(const std::string& name, std::size_t domain, VarKind kind) {
    const auto id = static_cast<VarId>(d_.variables.size());
    d_.variables.push_back({id, name, kind, domain});
    return id;
  }

  void cpt(VarId child, std::vector<VarId> parents, std::mt19937_64& rng) {
    parents.push_back(child);
    const auto dims = d_.dims_of(parents);
    const std::size_t k = dims.back();
    std::vector<double> values(table_size(dims));
    if (d_.mode == Mode::Prob) {
      std::uniform_real_distribution<double> u(0.05, 1.0);
      for (std::size_t r = 0; r < values.size(); r += k) {
        double total = 0.0;
        for (std::size_t j = 0; j < k; ++j) total += values[r + j] = u(rng);
        for (std::size_t j = 0; j < k; ++j) values[r + j] /= total;
      }
    } else {
      std::uniform_int_distribution<int> grid(0, 8);
      std::uniform_int_distribution<std::size_t> pick(0, k - 1);
      for (std::size_t r = 0; r < values.size(); r += k) {
        for (std::size_t j = 0; j < k; ++j) values[r + j] = grid(rng) / 8.0;
        values[r + pick(rng)] = 1.0;
      }
    }
    d_.cpts[child] = ScopedTable(parents, dims, std::move(values), TableTag::Probability);
  }

  void utility(const std::string& name, std::vector<VarId> scope, std::mt19937_64& rng, double lo, double hi) {
    const auto dims = d_.dims_of(scope);
    std::vector<double> values(table_size(dims));
    if (d_.mode == Mode::Prob) {
      std::uniform_real_distribution<double> u(lo, hi);
      for (auto& v : values) v = u(rng);
    } else {
      std::uniform_int_distribution<int> grid(0, 8);
      for (auto& v : values) v = grid(rng) / 8.0;
    }
    d_.utilities.push_back({name, ScopedTable(std::move(scope), dims, std::move(values), TableTag::Utility)});
  }

  void order(std::vector<std::vector<VarId>> blocks) { d_.blocks = std::move(blocks); }

  InfluenceDiagram finish() {
    validate(d_);
    return std::move(d_);
  }

 private:
  InfluenceDiagram d_;
};

}  // namespace

InfluenceDiagram random_id(const RandomSpec& spec) {
  if (spec.decisions > spec.vars)
    throw DiagramError(DiagramError::Kind::InvalidArgument, "more decisions than variables");
  if (spec.max_domain < 1) throw DiagramError(DiagramError::Kind::InvalidArgument, "max_domain must be >= 1");
  std::mt19937_64 rng(spec.seed);
  auto uniform = [&](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };

  const std::size_t q = spec.decisions;
  const std::size_t c = spec.vars - q;
  std::vector<std::size_t> block_of(c);
  for (auto& b : block_of) b = uniform(0, q);

  // Temporal sequence of (kind, block) slots; ids are a random permutation.
  std::vector<VarId> ids(spec.vars);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<VarId>(i);
  std::shuffle(ids.begin(), ids.end(), rng);

  std::vector<VarKind> kinds(spec.vars, VarKind::Chance);
  std::vector<std::vector<VarId>> blocks(2 * q + 1);
  std::size_t next = 0;
  for (std::size_t k = 0; k <= q; ++k) {
    for (std::size_t i = 0; i < c; ++i)
      if (block_of[i] == k) blocks[2 * k].push_back(ids[next++]);
    if (k < q) {
      kinds[ids[next]] = VarKind::Decision;
      blocks[2 * k + 1].push_back(ids[next++]);
    }
  }

  Builder b(spec.mode);
  const std::size_t lo_dom = std::min<std::size_t>(2, spec.max_domain);
  for (std::size_t i = 0; i < spec.vars; ++i)
    b.add("v" + std::to_string(i), uniform(lo_dom, spec.max_domain), kinds[i]);

  // A topological order for chance parents: the temporal order with some chance
  // variables moved earlier.
  std::vector<VarId> pi;
  for (const auto& blk : blocks) pi.insert(pi.end(), blk.begin(), blk.end());
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (kinds[pi[i]] != VarKind::Chance || uniform(0, 1) == 0) continue;
    const VarId v = pi[i];
    const std::size_t to = uniform(0, i);
    pi.erase(pi.begin() + static_cast<std::ptrdiff_t>(i));
    pi.insert(pi.begin() + static_cast<std::ptrdiff_t>(to), v);
  }
  std::vector<std::vector<VarId>> cpt_parents(spec.vars);
  for (std::size_t i = 0; i < pi.size(); ++i) {
    if (kinds[pi[i]] != VarKind::Chance) continue;
    std::vector<VarId> pool(pi.begin(), pi.begin() + static_cast<std::ptrdiff_t>(i));
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(uniform(0, std::min(spec.max_parents, pool.size())));
    std::sort(pool.begin(), pool.end());
    cpt_parents[pi[i]] = pool;
  }
  for (std::size_t v = 0; v < spec.vars; ++v)
    if (kinds[v] == VarKind::Chance) b.cpt(static_cast<VarId>(v), cpt_parents[v], rng);

  const std::size_t nu = spec.utilities ? spec.utilities : uniform(1, 3);
  for (std::size_t u = 0; u < nu; ++u) {
    std::vector<VarId> all(spec.vars);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<VarId>(i);
    std::shuffle(all.begin(), all.end(), rng);
    const std::size_t hi = std::min(spec.max_utility_scope, spec.vars);
    all.resize(hi == 0 ? 0 : uniform(1, hi));
    std::sort(all.begin(), all.end());
    b.utility("U" + std::to_string(u), all, rng, -3.0, 10.0);
  }
  b.order(std::move(blocks));
  return b.finish();
}

InfluenceDiagram fixture(const std::string& name, std::size_t n, std::uint64_t seed, std::size_t domain) {
  if (domain < 1) throw DiagramError(DiagramError::Kind::InvalidArgument, "domain must be >= 1");
  std::mt19937_64 rng(seed);
  Builder b(Mode::Prob);
  const double lo = 0.0, hi = 10.0;

  if (name == "fig2") {
    const VarId r1 = b.add("r1", domain, VarKind::Chance);
    const VarId r2 = b.add("r2", domain, VarKind::Chance);
    const VarId d = b.add("d", domain, VarKind::Decision);
    b.cpt(r1, {}, rng);
    b.cpt(r2, {r1}, rng);
    b.utility("U_d_r1", {d, r1}, rng, lo, hi);
    b.utility("U_d_r2", {d, r2}, rng, lo, hi);
    b.utility("U_d", {d}, rng, lo, hi);
    b.order({{}, {d}, {r2, r1}});
    return b.finish();
  }
  if (name == "fig3") {
    const VarId r1 = b.add("r1", domain, VarKind::Chance);
    const VarId r2 = b.add("r2", domain, VarKind::Chance);
    const VarId d1 = b.add("d1", domain, VarKind::Decision);
    const VarId d2 = b.add("d2", domain, VarKind::Decision);
    const VarId d3 = b.add("d3", domain, VarKind::Decision);
    b.cpt(r1, {}, rng);
    b.cpt(r2, {r1}, rng);
    b.utility("U_d1", {d1}, rng, lo, hi);
    b.utility("U_d2_d3", {d2, d3}, rng, lo, hi);
    b.utility("U_r2_d1_d3", {r2, d1, d3}, rng, lo, hi);
    b.utility("U_r1_d2", {r1, d2}, rng, lo, hi);
    b.order({{}, {d1}, {r2}, {d2}, {r1}, {d3}, {}});
    return b.finish();
  }
  if (name == "chain" || name == "star") {
    if (n < 1) throw DiagramError(DiagramError::Kind::InvalidArgument, name + " needs n >= 1");
    std::vector<VarId> x;
    for (std::size_t i = 1; i <= n; ++i) x.push_back(b.add("x" + std::to_string(i), domain, VarKind::Decision));
    const VarId y = b.add("y", domain, VarKind::Chance);
    b.cpt(y, {}, rng);
    std::vector<std::vector<VarId>> blocks{{}};
    for (VarId xi : x) {
      blocks.push_back({xi});
      blocks.push_back({});
    }
    blocks.back().push_back(y);
    if (name == "chain") {
      const VarId last = b.add("x" + std::to_string(n + 1), domain, VarKind::Decision);
      b.utility("U_x1_y", {x[0], y}, rng, lo, hi);
      for (std::size_t i = 0; i < n; ++i)
        b.utility("U_x" + std::to_string(i + 1) + "_x" + std::to_string(n + 1), {x[i], last}, rng, lo, hi);
      blocks.push_back({last});
      blocks.push_back({});
    } else {
      for (std::size_t i = 0; i < n; ++i) b.utility("U_y_x" + std::to_string(i + 1), {x[i], y}, rng, lo, hi);
    }
    b.order(std::move(blocks));
    return b.finish();
  }
  throw DiagramError(DiagramError::Kind::InvalidArgument, "unknown fixture '" + name + "'");
}

}  // namespace mcdag
