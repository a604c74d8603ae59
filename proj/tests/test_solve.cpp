#include <doctest.h>

#include "mcdag/idnet.hpp"
#include "mcdag/solve.hpp"
#include "support.hpp"

using namespace mcdag;
using mcdag::testing::rel_close;

namespace {

const char* kFig2 = R"(IDNET 1
MODE prob
VAR r1 2 CHANCE
VAR r2 2 CHANCE
VAR d 2 DECISION
PROB r1 | : 0.3 0.7
PROB r2 | r1 : 0.9 0.1 0.2 0.8
UTIL U_d_r1 d r1 : 1 2 3 4
UTIL U_d_r2 d r2 : 5 6 7 8
UTIL U_d d : 0.5 1.5
ORDER / d / r2 r1
)";

std::string single_decision(const std::string& values, std::size_t domain) {
  return "IDNET 1\nMODE prob\nVAR d " + std::to_string(domain) + " DECISION\nUTIL U d : " + values +
         "\nORDER / d /\n";
}

struct Solved {
  mcdag::testing::Built built;
  double value;
  std::vector<Policy> policies;
};

Solved solve(const InfluenceDiagram& d, bool with_sets = false, double tol = 0.0) {
  Solved s{mcdag::testing::build(d), 0.0, {}};
  s.value = evaluate(s.built.dag);
  s.policies = extract_policies(s.built.dag, d, with_sets, tol);
  return s;
}

bool small_enough(const InfluenceDiagram& d) {
  double bits = 0.0;
  for (const auto& v : d.variables) bits += std::log2(static_cast<double>(v.domain_size));
  return bits <= 12.0;
}

/// True when every earlier decision in `env` took the value its own rule picks.
bool follows_policy(const std::vector<Policy>& policies, VarId decision, const Assignment& env) {
  for (const auto& p : policies)
    if (p.decision != decision && env.count(p.decision) && p.choose(env) != env.at(p.decision)) return false;
  return true;
}

}  // namespace

TEST_CASE("all-zero utilities give zero") {
  const auto d = parse_idnet("IDNET 1\nMODE prob\nVAR r 2 CHANCE\nVAR d 2 DECISION\nPROB r | : 0.5 0.5\n"
                             "UTIL U d r : 0 0 0 0\nORDER / d / r\n");
  const auto s = solve(d);
  CHECK(s.value == 0.0);
  CHECK(evaluate_policy(d, s.policies) == 0.0);
}

TEST_CASE("a single decision picks its best value") {
  const auto d = parse_idnet(single_decision("1 5 3", 3));
  const auto s = solve(d, true);
  CHECK(s.value == 5.0);
  REQUIRE(s.policies.size() == 1);
  CHECK(s.policies[0].context.empty());
  CHECK(s.policies[0].rule == std::vector<std::size_t>{1});
  CHECK(s.policies[0].optimal_sets == std::vector<std::vector<std::size_t>>{{1}});
}

TEST_CASE("ties keep every optimal value and choose the first") {
  const auto s = solve(parse_idnet(single_decision("4 4", 2)), true);
  CHECK(s.value == 4.0);
  CHECK(s.policies[0].rule == std::vector<std::size_t>{0});
  CHECK(s.policies[0].optimal_sets == std::vector<std::vector<std::size_t>>{{0, 1}});
}

TEST_CASE("fig2 value and policy") {
  const auto d = parse_idnet(kFig2);
  const auto s = solve(d);
  CHECK(s.value == doctest::Approx(12.79).epsilon(1e-12));
  REQUIRE(s.policies.size() == 1);
  CHECK(s.policies[0].rule == std::vector<std::size_t>{1});
  CHECK(evaluate_policy(d, s.policies) == doctest::Approx(12.79).epsilon(1e-12));
  const auto bf = brute_force(d);
  CHECK(bf.value == doctest::Approx(s.value).epsilon(1e-12));
  CHECK(bf.policies[0].optimal_sets == std::vector<std::vector<std::size_t>>{{1}});
}

TEST_CASE("policy evaluation of a fixed rule") {
  const auto d = parse_idnet(kFig2);
  Policy p;
  p.decision = *d.find("d");
  p.rule = {0};
  CHECK(evaluate_policy(d, {p}) == doctest::Approx(7.79).epsilon(1e-12));
  p.rule = {2};
  CHECK_THROWS_AS(evaluate_policy(d, {p}), SolveError);
  CHECK_THROWS_AS(evaluate_policy(d, {}), SolveError);
}

TEST_CASE("policy lookup follows the context layout") {
  Policy p;
  p.context = {3, 7};
  p.context_dims = {2, 3};
  p.rule = {0, 1, 2, 3, 4, 5};
  CHECK(p.choose({{3, 1}, {7, 2}}) == 5);
  CHECK(p.choose({{3, 0}, {7, 1}, {9, 0}}) == 1);
  CHECK_THROWS_AS(p.choose({{3, 0}}), SolveError);
}

TEST_CASE("decisions without a record get a default rule") {
  const auto d = parse_idnet(single_decision("1 2 3", 3));
  const auto policies = decode_policies(d, {}, true);
  REQUIRE(policies.size() == 1);
  CHECK(policies[0].rule == std::vector<std::size_t>{0});
  CHECK(policies[0].optimal_sets == std::vector<std::vector<std::size_t>>{{0, 1, 2}});
}

TEST_CASE("each cluster is evaluated once") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto b = mcdag::testing::build(random_id(mcdag::testing::suite_spec(seed)));
    CHECK(evaluate_mcdag(b.dag).clusters_evaluated == b.dag.size());
    CHECK(evaluate_mcdag(merge_clusters(b.dag)).clusters_evaluated == merge_clusters(b.dag).size());
  }
}

TEST_CASE("scaling utilities scales the value and keeps the policies") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    const auto d = random_id(mcdag::testing::suite_spec(seed));
    auto scaled = d;
    for (auto& u : scaled.utilities)
      for (auto& v : u.table.mutable_values()) v *= 4.0;
    const auto a = solve(d);
    const auto b = solve(scaled);
    CHECK(rel_close(b.value, 4.0 * a.value, 1e-9));
    REQUIRE(a.policies.size() == b.policies.size());
    for (std::size_t i = 0; i < a.policies.size(); ++i) CHECK(a.policies[i].rule == b.policies[i].rule);
  }
}

TEST_CASE("values and reachable policy choices agree with brute force") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const Mode mode = seed % 4 == 0 ? Mode::Poss : Mode::Prob;
    const auto d = random_id(mcdag::testing::suite_spec(seed, mode));
    if (!small_enough(d)) continue;
    const auto s = solve(d, true, mode == Mode::Prob ? 1e-9 : 0.0);
    const auto bf = brute_force(d);
    const double pv = evaluate_policy(d, s.policies);
    INFO("seed " << seed);
    if (mode == Mode::Poss) {
      CHECK(s.value == bf.value);
      CHECK(pv == s.value);
    } else {
      CHECK(rel_close(s.value, bf.value, 1e-9));
      CHECK(rel_close(pv, s.value, 1e-9));
    }
    REQUIRE(s.policies.size() == bf.policies.size());
    for (std::size_t i = 0; i < s.policies.size(); ++i) {
      const auto& mine = s.policies[i];
      const auto& ref = bf.policies[i];
      CHECK(mine.decision == ref.decision);
      CHECK(mine.context == ref.context);
      const ScopedTable shape = ScopedTable::filled(mine.context, mine.context_dims, 0.0);
      for (std::size_t k = 0; k < mine.rule.size(); ++k) {
        if (mode == Mode::Poss || !follows_policy(s.policies, mine.decision, shape.assignment_of(k))) continue;
        const auto& set = ref.optimal_sets.at(k);
        CHECK(std::find(set.begin(), set.end(), mine.rule[k]) != set.end());
      }
    }
  }
}

TEST_CASE("optimal sets of a lone decision match brute force") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto d = random_id(mcdag::testing::suite_spec(seed));
    if (!small_enough(d) || d.decisions().size() != 1) continue;
    const auto s = solve(d, true, 1e-9);
    const auto bf = brute_force(d);
    INFO("seed " << seed);
    CHECK(s.policies[0].optimal_sets == bf.policies[0].optimal_sets);
  }
}

TEST_CASE("a missing store is rejected") {
  MCDag empty;
  CHECK_THROWS_AS(evaluate_mcdag(empty), SolveError);
}
