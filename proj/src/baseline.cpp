#include "mcdag/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace mcdag {

namespace {

std::vector<VarId> sorted_union(std::vector<VarId> a, const std::vector<VarId>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

std::vector<std::size_t> dims_in(const ScopedTable& a, const ScopedTable& b, const std::vector<VarId>& scope) {
  std::vector<std::size_t> dims;
  for (VarId v : scope) dims.push_back(a.contains(v) ? a.dim_of(v) : b.dim_of(v));
  return dims;
}

}  // namespace

std::vector<VarId> Potential::scope() const { return sorted_union(p.scope(), u.scope()); }

Potential pot_combine(const Potential& a, const Potential& b) {
  return {combine(a.p, b.p, CombOp::Times), combine(a.u, b.u, CombOp::Plus)};
}

Potential pot_marg_chance(const Potential& pi, const std::vector<VarId>& vars) {
  const auto w = pi.scope();
  const auto p = expand(pi.p, w, dims_in(pi.p, pi.u, w));
  const ScopedTable mass = marginalize(p, vars, MargOp::Sum);
  const ScopedTable weighted = marginalize(combine(p, pi.u, CombOp::Times), vars, MargOp::Sum);
  std::vector<double> u(mass.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (mass[i] == 0.0) {
      if (weighted[i] != 0.0)
        throw BaselineError(BaselineError::Kind::NumericAnomaly, "nonzero expected utility over zero mass");
      u[i] = 0.0;
    } else {
      u[i] = weighted[i] / mass[i];
    }
  }
  return {mass, ScopedTable(mass.scope(), mass.dims(), std::move(u))};
}

DecisionMarginal pot_marg_decision(const Potential& pi, VarId decision, std::size_t domain_size) {
  ScopedTable p = pi.p;
  if (p.contains(decision)) {
    const ScopedTable base = restrict(p, {{decision, 0}});
    for (std::size_t v = 1; v < p.dim_of(decision); ++v) {
      const ScopedTable slice = restrict(p, {{decision, v}});
      for (std::size_t i = 0; i < slice.size(); ++i)
        if (std::fabs(slice[i] - base[i]) > 1e-9 * std::max(1.0, std::fabs(base[i])))
          throw BaselineError(BaselineError::Kind::InvalidElimination,
                              "the probability part depends on the decision being eliminated");
    }
    p = base;
  }
  if (pi.u.contains(decision)) {
    auto r = argmax_marginalize(pi.u, {decision});
    return {{p, std::move(r.table)}, std::move(r.choices)};
  }
  ChoiceTable all{pi.u.scope(), pi.u.dims(), {decision}, {domain_size}, {}};
  std::vector<std::size_t> every(domain_size);
  for (std::size_t v = 0; v < domain_size; ++v) every[v] = v;
  all.sets.assign(pi.u.size(), every);
  return {{p, pi.u}, std::move(all)};
}

Hypergraph diagram_hypergraph(const InfluenceDiagram& d) {
  Hypergraph g;
  for (const auto& v : d.variables) g.add_vertex(v.id);
  for (const auto& [x, t] : d.cpts) g.add_edge(t.scope());
  for (const auto& u : d.utilities)
    if (!u.table.scope().empty()) g.add_edge(u.table.scope());
  return g;
}

std::vector<std::vector<VarId>> order_blocks(const InfluenceDiagram& d) {
  std::vector<std::vector<VarId>> out;
  for (const auto& b : sov0(d)) out.push_back(b.vars);
  return out;
}

PotentialResult potential_ve(const InfluenceDiagram& d, Heuristic heuristic, bool with_sets) {
  if (d.mode != Mode::Prob)
    throw BaselineError(BaselineError::Kind::Unsupported, "the potential baseline handles probabilistic diagrams only");
  std::vector<Potential> pool;
  for (const auto& [x, t] : d.cpts) pool.push_back({t, ScopedTable::scalar(0.0)});
  for (const auto& u : d.utilities) pool.push_back({ScopedTable::scalar(1.0), u.table});

  PotentialResult out;
  out.order = find_constrained_order(diagram_hypergraph(d), order_blocks(d), heuristic);
  out.width = out.order.width;
  std::map<VarId, ChoiceTable> records;
  for (VarId x : out.order.order) {
    std::vector<Potential> bucket, rest;
    for (auto& pt : pool) {
      const auto s = pt.scope();
      (std::binary_search(s.begin(), s.end(), x) ? bucket : rest).push_back(std::move(pt));
    }
    pool = std::move(rest);
    if (bucket.empty()) continue;
    Potential acc = bucket[0];
    for (std::size_t i = 1; i < bucket.size(); ++i) acc = pot_combine(acc, bucket[i]);
    if (d.is_decision(x)) {
      auto r = pot_marg_decision(acc, x, d.var(x).domain_size);
      records.emplace(x, std::move(r.choices));
      pool.push_back(std::move(r.potential));
    } else {
      pool.push_back(pot_marg_chance(acc, {x}));
    }
  }
  Potential total{ScopedTable::scalar(1.0), ScopedTable::scalar(0.0)};
  for (const auto& pt : pool) total = pot_combine(total, pt);
  if (!total.u.is_scalar()) throw BaselineError(BaselineError::Kind::NumericAnomaly, "variables left uneliminated");
  out.value = total.u[0];
  out.policies = decode_policies(d, records, with_sets);
  return out;
}

std::size_t constrained_width(const InfluenceDiagram& d, Heuristic heuristic) {
  if (heuristic == Heuristic::Exhaustive && d.num_variables() > kExactWidthLimit)
    throw BaselineError(BaselineError::Kind::ResourceGuard,
                        "exact constrained width is limited to " + std::to_string(kExactWidthLimit) + " variables");
  return find_constrained_order(diagram_hypergraph(d), order_blocks(d), heuristic).width;
}

BruteForceResult brute_force(const InfluenceDiagram& d, const BruteForceOptions& options) {
  double bits = 0.0;
  for (const auto& v : d.variables) bits += std::log2(static_cast<double>(v.domain_size));
  if (bits > options.max_log2_states + 1e-9)
    throw BaselineError(BaselineError::Kind::ResourceGuard,
                        "brute force needs 2^" + std::to_string(bits) + " states, above the configured limit");
  const bool prob = d.mode == Mode::Prob;
  BruteForceResult out;
  std::map<VarId, std::size_t> slot;
  for (VarId x : d.decisions()) {
    Policy p;
    p.decision = x;
    p.context = d.parents.at(x);
    std::sort(p.context.begin(), p.context.end());
    p.context_dims = d.dims_of(p.context);
    const std::size_t n = table_size(p.context_dims);
    p.rule.assign(n, 0);
    p.optimal_sets.assign(n, {});
    slot[x] = out.policies.size();
    out.policies.push_back(std::move(p));
  }

  const auto order = d.temporal_order();
  Assignment env;
  std::function<double(std::size_t)> rec = [&](std::size_t i) -> double {
    if (i == order.size()) {
      if (prob) {
        double p = 1.0, u = 0.0;
        for (const auto& [x, t] : d.cpts) p *= t.at(env);
        for (const auto& ut : d.utilities) u += ut.table.at(env);
        return p * u;
      }
      double worst = 0.0, u = 1.0;
      for (const auto& [x, t] : d.cpts) worst = std::max(worst, 1.0 - t.at(env));
      for (const auto& ut : d.utilities) u = std::min(u, ut.table.at(env));
      return std::max(worst, u);
    }
    const VarId v = order[i];
    const std::size_t k = d.var(v).domain_size;
    std::vector<double> vals(k);
    for (std::size_t a = 0; a < k; ++a) {
      env[v] = a;
      vals[a] = rec(i + 1);
    }
    env.erase(v);
    if (!d.is_decision(v)) {
      double acc = prob ? 0.0 : 1.0;
      for (double x : vals) acc = prob ? acc + x : std::min(acc, x);
      return acc;
    }
    const double best = *std::max_element(vals.begin(), vals.end());
    auto& pol = out.policies[slot.at(v)];
    std::size_t idx = 0;
    for (std::size_t j = 0; j < pol.context.size(); ++j) idx = idx * pol.context_dims[j] + env.at(pol.context[j]);
    auto& set = pol.optimal_sets[idx];
    set.clear();
    for (std::size_t a = 0; a < k; ++a)
      if (vals[a] >= best - options.tie_tolerance * std::max(1.0, std::fabs(best))) set.push_back(a);
    pol.rule[idx] = set.front();
    return best;
  };
  out.value = rec(0);
  return out;
}

}  // namespace mcdag
