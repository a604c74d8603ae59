#include <doctest.h>

#include <algorithm>
#include <set>

#include "mcdag/idnet.hpp"
#include "mcdag/rewrite.hpp"
#include "support.hpp"

using namespace mcdag;
using mcdag::testing::rel_close;

namespace {

struct Setup {
  InfluenceDiagram d;
  NodeStore store;
  NodeId n0;

  explicit Setup(InfluenceDiagram diagram) : d(std::move(diagram)), store(make_store(d)), n0(build_n0(store, d)) {}

  VarId var(const std::string& name) const { return *d.find(name); }

  NodeId leaf(const std::string& label) const {
    for (NodeId id : store.reachable(n0))
      if (store.is_atomic(id) && store.table_label(store.node(id).table) == label) return id;
    FAIL("no leaf " << label);
    return 0;
  }
};

bool same_everywhere(const NodeStore& st, NodeId a, NodeId b, double tol) {
  NodeEvaluator ev(st);
  for (const auto& env : all_assignments(st, mcdag::testing::scope_union(st, {a, b})))
    if (!rel_close(ev.value(a, env), ev.value(b, env), tol)) return false;
  return true;
}

std::set<std::string> labels(const NodeStore& st, const std::vector<NodeId>& ids) {
  std::set<std::string> out;
  for (NodeId id : ids) out.insert(st.is_atomic(id) ? st.table_label(st.node(id).table) : st.label(id));
  return out;
}

bool small_enough(const InfluenceDiagram& d, double max_bits) {
  double bits = 0.0;
  for (const auto& v : d.variables) bits += std::log2(static_cast<double>(v.domain_size));
  return bits <= max_bits;
}

}  // namespace

TEST_CASE("sum decomposition of fig2 over r1 shares inner nodes") {
  Setup s(fixture("fig2"));
  const VarId r1 = s.var("r1"), r2 = s.var("r2"), d = s.var("d");
  const auto ds = d_sum(s.store, s.n0, r1);
  const auto& root = s.store.node(ds.root);
  CHECK(root.sov == SovSequence{{MargOp::Max, {d}}, {MargOp::Sum, {r2}}});
  REQUIRE(ds.inner.size() == 2);
  const NodeId shared = s.store.intern({{MargOp::Sum, {r1}}}, CombOp::Times, {s.leaf("P_r1"), s.leaf("P_r2|r1")});
  CHECK(std::count(ds.inner.begin(), ds.inner.end(), shared) == 1);
  std::size_t holders = 0;
  for (NodeId c : root.children) {
    const auto& members = s.store.node(c).children;
    holders += std::count(members.begin(), members.end(), shared);
  }
  CHECK(holders == 2);
  CHECK(same_everywhere(s.store, s.n0, ds.root, 1e-12));
}

TEST_CASE("sum decomposition rejects mismatched shapes") {
  Setup s(fixture("fig2"));
  CHECK_THROWS_AS(d_sum(s.store, s.n0, s.var("d")), RewriteError);
  const NodeId term = s.store.intern({}, CombOp::Times, {s.leaf("U_d")});
  const NodeId root = s.store.intern({{MargOp::Sum, {s.var("r1")}}}, CombOp::Plus, {term});
  try {
    d_sum(s.store, root, s.var("r1"));
    FAIL("expected an error");
  } catch (const RewriteError& e) {
    CHECK(e.kind() == RewriteError::Kind::ShapeMismatch);
  }
}

TEST_CASE("nested sums merge when the outer factors do not mention the inner variables") {
  Setup s(fixture("fig2"));
  const VarId r1 = s.var("r1"), r2 = s.var("r2");
  const NodeId p1 = s.leaf("P_r1"), p21 = s.leaf("P_r2|r1"), u = s.leaf("U_d_r2");
  const NodeId inner = s.store.intern({{MargOp::Sum, {r1}}}, CombOp::Times, {p1, p21});
  const NodeId outer = s.store.intern({{MargOp::Sum, {r2}}}, CombOp::Times, {inner, u});
  const auto merged = r_sum_step(s.store, outer);
  REQUIRE(merged);
  CHECK(*merged == s.store.intern({{MargOp::Sum, {r1, r2}}}, CombOp::Times, {p1, p21, u}));
  CHECK(same_everywhere(s.store, outer, *merged, 1e-12));

  const NodeId blocked = s.store.intern({{MargOp::Sum, {r2}}}, CombOp::Times, {inner, s.leaf("U_d_r1")});
  CHECK_FALSE(r_sum_step(s.store, blocked));
  const NodeId overlap = s.store.intern({{MargOp::Sum, {r1}}}, CombOp::Times, {inner});
  CHECK_FALSE(r_sum_step(s.store, overlap));
}

TEST_CASE("normalized factors are simplified away") {
  Setup s(fixture("fig2"));
  const VarId r1 = s.var("r1"), r2 = s.var("r2");
  const NodeId p1 = s.leaf("P_r1"), p21 = s.leaf("P_r2|r1");
  const NodeId both = s.store.intern({{MargOp::Sum, {r1, r2}}}, CombOp::Times, {p1, p21});
  const NodeId once = *s1_sum_step(s.store, both);
  CHECK(once == s.store.intern({{MargOp::Sum, {r1}}}, CombOp::Times, {p1}));
  CHECK(s1_sum(s.store, both) == s.store.empty_product());

  const NodeId prior_only = s.store.intern({{MargOp::Sum, {r1}}}, CombOp::Times, {p1, p21});
  CHECK_FALSE(s1_sum_step(s.store, prior_only));

  const NodeId keeps = s.store.intern({{MargOp::Sum, {r2}}}, CombOp::Times, {p21, s.leaf("U_d_r1")});
  const NodeId kept = s1_sum(s.store, keeps);
  CHECK(kept == s.store.intern({}, CombOp::Times, {s.leaf("U_d_r1")}));
  CHECK(same_everywhere(s.store, keeps, kept, 1e-12));
}

TEST_CASE("the normalization simplification is unsound for an unnormalized table") {
  Setup s(fixture("fig2"));
  const VarId r1 = s.var("r1");
  const NodeId bad = s.store.atomic(s.store.add_table(ScopedTable({r1}, {2}, {0.2, 0.7}), "P_bad", r1));
  const NodeId n = s.store.intern({{MargOp::Sum, {r1}}}, CombOp::Times, {bad});
  const auto simplified = s1_sum_step(s.store, n);
  REQUIRE(simplified);
  CHECK(eval_node(s.store, n, {}) == doctest::Approx(0.9));
  CHECK(eval_node(s.store, *simplified, {}) == 1.0);
}

TEST_CASE("empty products are dropped from products") {
  Setup s(fixture("fig2"));
  const NodeId u = s.leaf("U_d");
  const NodeId n = s.store.intern({}, CombOp::Times, {u, s.store.empty_product()});
  CHECK(s2_sum(s.store, n) == s.store.intern({}, CombOp::Times, {u}));
  CHECK_FALSE(s2_sum_step(s.store, s.store.intern({}, CombOp::Times, {u})));
}

TEST_CASE("max decomposition of fig3 over d3 factors out the common probabilities") {
  Setup s(fixture("fig3"));
  const VarId d3 = s.var("d3");
  const auto dm = d_max(s.store, s.n0, d3);
  REQUIRE(dm.inner);
  CHECK(labels(s.store, dm.common) == std::set<std::string>{"P_r1", "P_r2|r1"});
  CHECK(dm.untouched.size() == 2);
  const auto& inner = s.store.node(*dm.inner);
  CHECK(inner.sov == SovSequence{{MargOp::Max, {d3}}});
  CHECK(inner.comb == CombOp::Plus);
  std::set<std::set<std::string>> terms;
  for (NodeId t : inner.children) terms.insert(labels(s.store, s.store.node(t).children));
  CHECK(terms == std::set<std::set<std::string>>{{"U_d2_d3"}, {"U_r2_d1_d3"}});
  CHECK(same_everywhere(s.store, s.n0, dm.root, 1e-12));
  CHECK(mcdag::testing::check_event(s.store, {Rule::DMax, s.n0, dm.root, d3, dm.inner}, 1e-12, true).empty());
}

TEST_CASE("max decomposition drops a decision nothing depends on") {
  Setup s(parse_idnet("IDNET 1\nMODE prob\nVAR r 2 CHANCE\nVAR d 2 DECISION\nPROB r | : 0.4 0.6\n"
                      "UTIL U r : 1 3\nORDER r / d /\n"));
  const auto dm = d_max(s.store, s.n0, s.var("d"));
  CHECK_FALSE(dm.inner);
  CHECK(s.store.node(dm.root).sov == SovSequence{{MargOp::Sum, {s.var("r")}}});
  CHECK(s.store.node(dm.root).children == s.store.node(s.n0).children);
  CHECK(eval_node(s.store, dm.root, {}) == doctest::Approx(2.2));
}

TEST_CASE("fig3 absorbs max over d2 into max over d3") {
  const auto d = fixture("fig3");
  const auto b = mcdag::testing::build(d);
  const VarId d2 = *d.find("d2"), d3 = *d.find("d3");
  std::size_t joint = 0;
  for (const auto& e : b.macro.trace.events) {
    if (e.rule != Rule::RMax) continue;
    const auto& n = b.store->node(e.produced);
    if (n.sov == SovSequence{{MargOp::Max, {d2, d3}}} && n.comb == CombOp::Plus) ++joint;
    CHECK(mcdag::testing::check_event(*b.store, e, 1e-9, true).empty());
  }
  CHECK(joint == 1);
}

TEST_CASE("pass-through nodes are removed") {
  Setup s(fixture("fig2"));
  const NodeId u = s.leaf("U_d");
  const NodeId wrapped = s.store.intern({}, CombOp::Times, {s.store.intern({}, CombOp::Times, {u})});
  CHECK(remove_pass_through(s.store, wrapped) == u);
  const NodeId pair = s.store.intern({}, CombOp::Plus, {wrapped, s.leaf("U_d_r1")});
  CHECK(s.store.node(remove_pass_through(s.store, pair)).children.size() == 2);
}

TEST_CASE("the initial node mixes operators and the result does not") {
  for (const char* name : {"fig2", "fig3"}) {
    const auto b = mcdag::testing::build(fixture(name));
    CHECK_FALSE(is_mono_operator(*b.store, b.n0));
    CHECK(is_mono_operator(*b.store, b.macro.root));
  }
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const auto b = mcdag::testing::build(random_id(mcdag::testing::suite_spec(seed)));
    CHECK(is_mono_operator(*b.store, b.macro.root));
  }
}

TEST_CASE("every rule application preserves values and argmax sets") {
  std::size_t events = 0;
  for (std::uint64_t seed = 1; seed <= 120; ++seed) {
    const Mode mode = seed % 4 == 0 ? Mode::Poss : Mode::Prob;
    const auto d = random_id(mcdag::testing::tiny_spec(seed, mode));
    std::vector<std::string> failures;
    mcdag::testing::build(d, Heuristic::MinFill, [&](const NodeStore& st, const RewriteEvent& e) {
      ++events;
      auto msg = mcdag::testing::check_event(st, e, mode == Mode::Poss ? 0.0 : 1e-9, mode == Mode::Prob);
      if (!msg.empty()) failures.push_back(msg);
    });
    INFO("seed " << seed);
    CHECK(failures.empty());
  }
  CHECK(events > 500);
}

TEST_CASE("the final root evaluates to the initial value and the brute-force value") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const Mode mode = seed % 5 == 0 ? Mode::Poss : Mode::Prob;
    const auto d = random_id(mcdag::testing::suite_spec(seed, mode));
    if (!small_enough(d, 12.0)) continue;
    const auto b = mcdag::testing::build(d);
    const double v0 = eval_node(*b.store, b.n0, {});
    const double v1 = eval_node(*b.store, b.macro.root, {});
    const double bf = brute_force(d).value;
    INFO("seed " << seed);
    if (mode == Mode::Poss) {
      CHECK(v0 == bf);
      CHECK(v1 == bf);
    } else {
      CHECK(rel_close(v0, bf, 1e-9));
      CHECK(rel_close(v1, bf, 1e-9));
    }
  }
}

TEST_CASE("rewriting stays within the size bound") {
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    const auto d = random_id(mcdag::testing::suite_spec(seed));
    const auto b = mcdag::testing::build(d);
    CHECK(b.store->reachable(b.macro.root).size() <= mcdag::testing::size_bound(d));
  }
}

TEST_CASE("rewriting is deterministic") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const auto d = random_id(mcdag::testing::suite_spec(seed));
    const auto a = mcdag::testing::build(d);
    const auto b = mcdag::testing::build(d);
    CHECK(a.macro.root == b.macro.root);
    CHECK(a.store->size() == b.store->size());
    CHECK(a.macro.trace.to_jsonl(*a.store) == b.macro.trace.to_jsonl(*b.store));
  }
}

TEST_CASE("processing order inside a block does not change the value") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto d = random_id(mcdag::testing::suite_spec(seed));
    NodeStore st = make_store(d);
    const NodeId n0 = build_n0(st, d);
    RewriteOptions back, fwd;
    back.file_order = fwd.file_order = d.temporal_order();
    fwd.forward_within_block = true;
    const auto a = macrostructure(st, n0, back);
    const auto b = macrostructure(st, n0, fwd);
    CHECK(rel_close(eval_node(st, a.root, {}), eval_node(st, b.root, {}), 1e-9));
  }
}

TEST_CASE("trace output has one line per event") {
  const auto b = mcdag::testing::build(fixture("fig2"));
  const auto jsonl = b.macro.trace.to_jsonl(*b.store);
  CHECK(static_cast<std::size_t>(std::count(jsonl.begin(), jsonl.end(), '\n')) == b.macro.trace.events.size());
  CHECK(jsonl.rfind("{\"rule\":\"D_sum\"", 0) == 0);
  CHECK(b.macro.trace.collapsed().front() == Rule::DSum);
}
