#include "mcdag/solve.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace mcdag {

std::size_t Policy::choose(const Assignment& env) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < context.size(); ++i) {
    auto it = env.find(context[i]);
    if (it == env.end()) throw SolveError("policy context variable unassigned");
    idx = idx * context_dims[i] + it->second;
  }
  return rule.at(idx);
}

Evaluation evaluate_mcdag(const MCDag& m, const EvaluateOptions& options) {
  if (!m.store) throw SolveError("MCDAG without a node store");
  const auto& store = *m.store;
  const auto& alg = store.algebra();
  Evaluation out;
  std::vector<std::optional<ScopedTable>> memo(m.size());

  std::function<const ScopedTable&(ClusterId)> eval = [&](ClusterId id) -> const ScopedTable& {
    if (memo[id]) return *memo[id];
    const Cluster& c = m.cluster(id);
    const bool valid = (c.plus == alg.chance_marg && c.times == alg.product) ||
                       (c.plus == alg.decision_marg && c.times == alg.sum);
    if (!valid) throw SolveError("cluster " + std::to_string(id) + " has an operator pair invalid for the mode");
    std::optional<ScopedTable> acc;
    auto absorb = [&](const ScopedTable& t) { acc = acc ? combine(*acc, t, c.times) : t; };
    for (TableId t : c.tables) absorb(store.table(t));
    for (ClusterId s : c.sons) absorb(eval(s));
    if (!acc) acc = ScopedTable::scalar(identity(c.times, alg.value_mode));
    std::vector<VarId> missing;
    for (VarId v : c.eliminated)
      if (!acc->contains(v)) missing.push_back(v);
    if (!missing.empty()) {
      std::vector<VarId> scope = acc->scope();
      scope.insert(scope.end(), missing.begin(), missing.end());
      std::vector<std::size_t> dims;
      for (VarId v : scope) dims.push_back(store.domain_size(v));
      acc = expand(*acc, scope, dims);
    }
    const bool decision_step = options.record_choices && c.plus == alg.decision_marg && c.eliminated.size() == 1 &&
                               store.variables().at(c.eliminated[0]).kind == VarKind::Decision;
    if (decision_step) {
      auto r = argmax_marginalize(*acc, c.eliminated, options.tie_tolerance);
      out.choices.emplace(c.eliminated[0], std::move(r.choices));
      memo[id] = std::move(r.table);
    } else {
      memo[id] = marginalize(*acc, c.eliminated, c.plus, alg.value_mode);
    }
    ++out.clusters_evaluated;
    return *memo[id];
  };
  out.value = eval(m.root);
  return out;
}

double evaluate(const MCDag& m) {
  const auto e = evaluate_mcdag(m, {false, 0.0});
  if (!e.value.is_scalar()) throw SolveError("root cluster value is not a scalar");
  return e.value[0];
}

std::vector<Policy> decode_policies(const InfluenceDiagram& d, const std::map<VarId, ChoiceTable>& records,
                                    bool with_sets) {
  std::vector<Policy> out;
  for (VarId x : d.decisions()) {
    Policy p;
    p.decision = x;
    p.context = d.parents.at(x);
    std::sort(p.context.begin(), p.context.end());
    p.context_dims = d.dims_of(p.context);
    const std::size_t n = table_size(p.context_dims);
    const ScopedTable shape = ScopedTable::filled(p.context, p.context_dims, 0.0);

    std::set<VarId> active;
    // Value index of decision y's record under env; resolves later decisions it depends on.
    std::function<std::size_t(VarId, Assignment&, std::vector<std::size_t>*)> resolve =
        [&](VarId y, Assignment& env, std::vector<std::size_t>* set) -> std::size_t {
      auto rec = records.find(y);
      if (rec == records.end()) {
        if (set)
          for (std::size_t v = 0; v < d.var(y).domain_size; ++v) set->push_back(v);
        return 0;
      }
      if (!active.insert(y).second) throw SolveError("cyclic dependency between decision records");
      const ChoiceTable& ct = rec->second;
      std::size_t idx = 0;
      for (std::size_t i = 0; i < ct.retained.size(); ++i) {
        const VarId k = ct.retained[i];
        if (!env.count(k)) {
          if (!d.is_decision(k))
            throw SolveError("rule for " + d.var(y).name + " depends on unobserved " + d.var(k).name);
          env[k] = resolve(k, env, nullptr);
        }
        idx = idx * ct.retained_dims[i] + env.at(k);
      }
      active.erase(y);
      if (set) *set = ct.sets.at(idx);
      return ct.decode(ct.representative(idx)).at(y);
    };

    p.rule.resize(n);
    if (with_sets) p.optimal_sets.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      Assignment env = shape.assignment_of(i);
      std::vector<std::size_t> set;
      p.rule[i] = resolve(x, env, with_sets ? &set : nullptr);
      if (with_sets) {
        // Sets are recorded as eliminated-variable indices; the eliminated set is {x}.
        p.optimal_sets[i] = std::move(set);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<Policy> extract_policies(const MCDag& m, const InfluenceDiagram& d, bool with_sets, double tie_tolerance) {
  const auto e = evaluate_mcdag(m, {true, tie_tolerance});
  return decode_policies(d, e.choices, with_sets);
}

double evaluate_policy(const InfluenceDiagram& d, const std::vector<Policy>& policies) {
  std::map<VarId, const Policy*> by_decision;
  for (const auto& p : policies) by_decision[p.decision] = &p;
  for (VarId x : d.decisions())
    if (!by_decision.count(x)) throw SolveError("no policy for decision " + d.var(x).name);
  const auto order = d.temporal_order();
  const bool prob = d.mode == Mode::Prob;
  Assignment env;

  std::function<double(std::size_t)> rec = [&](std::size_t i) -> double {
    if (i == order.size()) {
      if (prob) {
        double p = 1.0, u = 0.0;
        for (const auto& [x, t] : d.cpts) p *= t.at(env);
        if (p == 0.0) return 0.0;
        for (const auto& ut : d.utilities) u += ut.table.at(env);
        return p * u;
      }
      double worst = 0.0, u = 1.0;
      for (const auto& [x, t] : d.cpts) worst = std::max(worst, 1.0 - t.at(env));
      for (const auto& ut : d.utilities) u = std::min(u, ut.table.at(env));
      return std::max(worst, u);
    }
    const VarId v = order[i];
    if (d.is_decision(v)) {
      const std::size_t choice = by_decision.at(v)->choose(env);
      if (choice >= d.var(v).domain_size) throw SolveError("policy value out of range");
      env[v] = choice;
      const double r = rec(i + 1);
      env.erase(v);
      return r;
    }
    double acc = prob ? 0.0 : 1.0;
    for (std::size_t val = 0; val < d.var(v).domain_size; ++val) {
      env[v] = val;
      const double r = rec(i + 1);
      acc = prob ? acc + r : std::min(acc, r);
    }
    env.erase(v);
    return acc;
  };
  return rec(0);
}

}  // namespace mcdag
