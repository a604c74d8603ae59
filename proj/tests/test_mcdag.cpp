#include <doctest.h>

#include <random>
#include <set>

#include "mcdag/cluster_dag.hpp"
#include "mcdag/hypergraph.hpp"
#include "support.hpp"

using namespace mcdag;
using mcdag::testing::rel_close;

namespace {

using EdgeSet = std::set<std::vector<VarId>>;

EdgeSet edges_of(const Hypergraph& g) { return EdgeSet(g.edges.begin(), g.edges.end()); }

struct Fig2 {
  InfluenceDiagram d = fixture("fig2");
  NodeStore st = make_store(d);
  NodeId n0 = build_n0(st, d);
  VarId r1 = *d.find("r1"), r2 = *d.find("r2"), dd = *d.find("d");

  NodeId leaf(const std::string& label) const {
    for (NodeId id : st.reachable(n0))
      if (st.is_atomic(id) && st.table_label(st.node(id).table) == label) return id;
    FAIL("no leaf " << label);
    return 0;
  }
  TableId table(const std::string& label) const { return st.node(leaf(label)).table; }
};

Hypergraph random_hypergraph(std::mt19937_64& rng, std::size_t n, std::size_t m) {
  Hypergraph g;
  for (VarId v = 0; v < n; ++v) g.add_vertex(v);
  for (std::size_t e = 0; e < m; ++e) {
    std::vector<VarId> edge;
    for (VarId v = 0; v < n; ++v)
      if (rng() % 3 == 0) edge.push_back(v);
    if (!edge.empty()) g.add_edge(edge);
  }
  return g;
}

}  // namespace

TEST_CASE("hypergraph of a node") {
  Fig2 f;
  const NodeId n = f.st.intern({{MargOp::Sum, {f.r1, f.r2}}}, CombOp::Times,
                               {f.leaf("P_r1"), f.leaf("P_r2|r1"), f.leaf("U_d_r2")});
  const auto g = hypergraph_of(f.st, n);
  CHECK(g.vertices == std::vector<VarId>{f.r1, f.r2, f.dd});
  CHECK(edges_of(g) == EdgeSet{{f.r1}, {f.r1, f.r2}, {std::min(f.dd, f.r2), std::max(f.dd, f.r2)}});
  const auto order = find_order(g, {f.r1, f.r2}, Heuristic::MinFill);
  CHECK(order.width == 1);
  CHECK(find_order(g, {f.r1, f.r2}, Heuristic::Exhaustive).width == 1);
  CHECK(find_order(g, {}, Heuristic::MinFill).width == 0);
  CHECK_THROWS_AS(hypergraph_of(f.st, f.leaf("P_r1")), ClusterError);
}

TEST_CASE("constrained orders of the fixture families are as wide as the family") {
  for (std::size_t n = 2; n <= 5; ++n) {
    for (const char* name : {"chain", "star"}) {
      const auto d = fixture(name, n);
      CHECK(constrained_width(d, Heuristic::Exhaustive) == n);
      const auto b = mcdag::testing::build(d, Heuristic::Exhaustive);
      CHECK(b.dag.w_mcdag == 1);
    }
  }
}

TEST_CASE("the exhaustive search refuses large elimination sets") {
  std::mt19937_64 rng(1);
  const auto g = random_hypergraph(rng, kExhaustiveLimit + 1, 10);
  CHECK_THROWS_AS(find_order(g, g.vertices, Heuristic::Exhaustive), OrderLimitError);
}

TEST_CASE("heuristic orders are never narrower than the exhaustive order") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const auto g = random_hypergraph(rng, 3 + rng() % 6, 2 + rng() % 6);
    const auto exact = find_order(g, g.vertices, Heuristic::Exhaustive);
    CHECK(order_width(g, exact.order).width == exact.width);
    for (Heuristic h : {Heuristic::MinFill, Heuristic::MinDegree}) {
      const auto o = find_order(g, g.vertices, h);
      CHECK(o.width >= exact.width);
      CHECK(std::set<VarId>(o.order.begin(), o.order.end()) == std::set<VarId>(g.vertices.begin(), g.vertices.end()));
    }
  }
}

TEST_CASE("clusterizing a sum node creates one cluster per eliminated variable") {
  Fig2 f;
  const NodeId n = f.st.intern({{MargOp::Sum, {f.r1, f.r2}}}, CombOp::Times, {f.leaf("P_r1"), f.leaf("P_r2|r1")});
  MCDag dag;
  dag.store = &f.st;
  const auto order = order_width(hypergraph_of(f.st, n), {f.r1, f.r2});
  dag.root = clusterize(f.st, n, order, dag, {});
  REQUIRE(dag.size() == 2);
  CHECK(dag.cluster(0).vars == std::vector<VarId>{f.r1, f.r2});
  CHECK(dag.cluster(0).eliminated == std::vector<VarId>{f.r1});
  CHECK(dag.cluster(0).tables.size() == 2);
  CHECK(dag.cluster(1).vars == std::vector<VarId>{f.r2});
  CHECK(dag.cluster(1).sons == std::vector<ClusterId>{0});
  CHECK(dag.root == 1);
  CHECK(evaluate(dag) == doctest::Approx(eval_node(f.st, n, {})).epsilon(1e-12));
}

TEST_CASE("clusterizing a node without eliminations gives one cluster") {
  Fig2 f;
  const NodeId n = f.st.intern({}, CombOp::Times, {f.leaf("U_d"), f.leaf("U_d_r1")});
  MCDag dag;
  dag.store = &f.st;
  dag.root = clusterize(f.st, n, {}, dag, {});
  REQUIRE(dag.size() == 1);
  CHECK(dag.cluster(0).eliminated.empty());
  CHECK(dag.cluster(0).separator() == std::vector<VarId>{std::min(f.dd, f.r1), std::max(f.dd, f.r1)});
}

TEST_CASE("clusterize validates its input") {
  Fig2 f;
  MCDag dag;
  dag.store = &f.st;
  CHECK_THROWS_AS(clusterize(f.st, f.leaf("U_d"), {}, dag, {}), ClusterError);
  CHECK_THROWS_AS(clusterize(f.st, f.n0, {}, dag, {}), ClusterError);
  const NodeId n = f.st.intern({{MargOp::Sum, {f.r1}}}, CombOp::Times, {f.leaf("P_r1")});
  CHECK_THROWS_AS(clusterize(f.st, n, {}, dag, {}), ClusterError);
}

TEST_CASE("fixtures have MCDAG width one") {
  CHECK(mcdag::testing::build(fixture("fig2")).dag.w_mcdag == 1);
  CHECK(mcdag::testing::build(fixture("fig2"), Heuristic::Exhaustive).dag.w_mcdag == 1);
  for (std::size_t n = 2; n <= 6; ++n) CHECK(mcdag::testing::build(fixture("star", n)).dag.w_mcdag == 1);
}

TEST_CASE("every cluster computes the value of its node") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto d = random_id(mcdag::testing::suite_spec(seed));
    const auto b = mcdag::testing::build(d);
    const auto ev = evaluate_mcdag(b.dag);
    CHECK(ev.clusters_evaluated == b.dag.size());
    REQUIRE(ev.value.is_scalar());
    CHECK(rel_close(ev.value[0], eval_node(*b.store, b.macro.root, {}), 1e-9));
  }
}

TEST_CASE("identical clusters merge and keep both parents") {
  Fig2 f;
  MCDag dag;
  dag.store = &f.st;
  auto add = [&](std::vector<VarId> vars, std::vector<TableId> tables, std::vector<ClusterId> sons,
                 std::vector<VarId> elim, bool max_cluster = false) {
    Cluster c;
    c.id = static_cast<ClusterId>(dag.clusters.size());
    std::sort(vars.begin(), vars.end());
    c.vars = vars;
    c.tables = tables;
    c.sons = sons;
    c.eliminated = elim;
    if (max_cluster) {
      c.plus = MargOp::Max;
      c.times = CombOp::Plus;
    }
    dag.clusters.push_back(c);
    return c.id;
  };
  const ClusterId a = add({f.r1}, {f.table("P_r1")}, {}, {f.r1});
  const ClusterId b = add({f.r1}, {f.table("P_r1")}, {}, {f.r1});
  const ClusterId p = add({f.dd}, {f.table("U_d")}, {a}, {});
  const ClusterId q = add({f.dd, f.r1}, {f.table("U_d_r1")}, {b}, {f.r1});
  dag.root = add({f.dd}, {}, {p, q}, {f.dd}, true);
  check_structure(dag);

  const auto merged = merge_clusters(dag);
  check_structure(merged);
  CHECK(merged.size() == dag.size() - 1);
  CHECK(merged.cluster(0).parents.size() == 2);
  CHECK(evaluate(merged) == doctest::Approx(evaluate(dag)).epsilon(1e-12));
}

TEST_CASE("merging preserves the value of assembled MCDAGs") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto d = random_id(mcdag::testing::suite_spec(seed));
    const auto b = mcdag::testing::build(d);
    const auto merged = merge_clusters(b.dag);
    check_structure(merged);
    CHECK(merged.size() <= b.dag.size());
    CHECK(rel_close(evaluate(merged), evaluate(b.dag), 1e-12));
  }
}

TEST_CASE("the refined hypergraph keeps only the utility scopes") {
  Fig2 f;
  const NodeId term = f.st.intern({}, CombOp::Times, {f.leaf("P_r1"), f.leaf("U_d")});
  const NodeId n = f.st.intern({{MargOp::Max, {f.dd}}}, CombOp::Plus, {term});
  const auto g = refined_hypergraph(f.st, n);
  CHECK(g.vertices.size() == 2);
  CHECK(edges_of(g) == EdgeSet{{f.dd}});
  CHECK(edges_of(hypergraph_of(f.st, n)) == EdgeSet{{std::min(f.dd, f.r1), std::max(f.dd, f.r1)}});
  const NodeId sum = f.st.intern({{MargOp::Sum, {f.r1}}}, CombOp::Times, {f.leaf("P_r1")});
  CHECK(edges_of(refined_hypergraph(f.st, sum)) == edges_of(hypergraph_of(f.st, sum)));
}

TEST_CASE("the refined hypergraph does not change values") {
  for (std::uint64_t seed = 1; seed <= 60; ++seed) {
    const auto d = random_id(mcdag::testing::suite_spec(seed));
    const auto b = mcdag::testing::build(d);
    const auto refined = assemble(*b.store, b.macro.root, {Heuristic::MinFill, true});
    check_structure(refined);
    CHECK(rel_close(evaluate(refined), evaluate(b.dag), 1e-9));
  }
}

TEST_CASE("assembled MCDAGs are well formed") {
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const Mode mode = seed % 3 == 0 ? Mode::Poss : Mode::Prob;
    const auto b = mcdag::testing::build(random_id(mcdag::testing::suite_spec(seed, mode)));
    CHECK_NOTHROW(check_structure(b.dag));
    CHECK(b.dag.root + 1 == b.dag.size());
    for (const auto& c : b.dag.clusters)
      for (ClusterId p : c.parents) CHECK(p > c.id);
  }
}

TEST_CASE("structure checks catch broken MCDAGs") {
  auto b = mcdag::testing::build(fixture("fig2"));
  MCDag broken = b.dag;
  REQUIRE(broken.size() >= 2);
  broken.clusters[0].sons.push_back(broken.root);
  CHECK_THROWS_AS(check_structure(broken), ClusterError);
  MCDag bad_ops = b.dag;
  bad_ops.clusters[0].plus = MargOp::Min;
  CHECK_THROWS_AS(check_structure(bad_ops), ClusterError);
  MCDag orphan = b.dag;
  orphan.store = nullptr;
  CHECK_THROWS_AS(check_structure(orphan), ClusterError);
}

TEST_CASE("DOT output marks the root") {
  const auto b = mcdag::testing::build(fixture("fig3"));
  const auto dot = mcdag_to_dot(b.dag);
  CHECK(dot == mcdag_to_dot(mcdag::testing::build(fixture("fig3")).dag));
  CHECK(dot.find("c" + std::to_string(b.dag.root) + " [label=") != std::string::npos);
  CHECK(dot.find("peripheries=2") != std::string::npos);
}
