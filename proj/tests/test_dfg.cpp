#include <doctest.h>

#include <algorithm>

#include "matforge/dfg.hpp"
#include "matforge/simulator.hpp"
#include "matforge/suite.hpp"

using namespace matforge;

namespace {

// Minimal by-hand graph builder for structural tests.
struct TestGraph {
  MatrixDfg g;

  NodeId source(TensorType t, std::optional<int> nnz = std::nullopt) {
    DfgNode n;
    n.id = NodeId(g.nodes.size());
    n.name = "s" + std::to_string(n.id);
    n.kind = OpKind::Source;
    n.out_dim = t;
    n.nnz = nnz;
    g.nodes.push_back(n);
    return n.id;
  }

  NodeId op(OpKind k, const std::vector<NodeId>& ins,
            std::optional<int> nnz = std::nullopt) {
    DfgNode n;
    n.id = NodeId(g.nodes.size());
    n.kind = k;
    for (NodeId i : ins) n.in_dims.push_back(g.nodes[size_t(i)].out_dim);
    n.out_dim = infer_out_dim(k, n.in_dims);
    n.nnz = nnz;
    n.name = "n" + std::to_string(n.id);
    g.nodes.push_back(n);
    for (int s = 0; s < int(ins.size()); ++s)
      g.edges.push_back({ins[size_t(s)], n.id, s, g.nodes[size_t(ins[size_t(s)])].out_dim});
    return n.id;
  }

  NodeId sink(NodeId v) {
    DfgNode n;
    n.id = NodeId(g.nodes.size());
    n.name = "out" + std::to_string(n.id);
    n.kind = OpKind::Sink;
    n.in_dims = {g.nodes[size_t(v)].out_dim};
    n.out_dim = g.nodes[size_t(v)].out_dim;
    g.nodes.push_back(n);
    g.edges.push_back({v, n.id, 0, g.nodes[size_t(v)].out_dim});
    return n.id;
  }
};

int edge_index(const MatrixDfg& g, NodeId p, NodeId c) {
  for (int i = 0; i < int(g.edges.size()); ++i)
    if (g.edges[size_t(i)].producer == p && g.edges[size_t(i)].consumer == c) return i;
  return -1;
}

}  // namespace

TEST_CASE("classify: linear vs non-linear time kinds") {
  CHECK(classify(OpKind::MatAdd) == NodeClass::LinearTime);
  CHECK(classify(OpKind::MatSub) == NodeClass::LinearTime);
  CHECK(classify(OpKind::ScalarMatMul) == NodeClass::LinearTime);
  CHECK(classify(OpKind::Hadamard) == NodeClass::LinearTime);
  CHECK(classify(OpKind::Exp) == NodeClass::LinearTime);
  CHECK(classify(OpKind::ReLU) == NodeClass::LinearTime);
  CHECK(classify(OpKind::Sigmoid) == NodeClass::LinearTime);
  CHECK(classify(OpKind::TanH) == NodeClass::LinearTime);
  CHECK(classify(OpKind::Select) == NodeClass::LinearTime);
  CHECK(classify(OpKind::SpMV) == NodeClass::NonLinearTime);
  CHECK(classify(OpKind::MatMul) == NodeClass::NonLinearTime);
  CHECK(classify(OpKind::DotProduct) == NodeClass::NonLinearTime);
  CHECK(classify(OpKind::OuterProduct) == NodeClass::NonLinearTime);
  CHECK(classify(OpKind::ArgMax) == NodeClass::NonLinearTime);
}

TEST_CASE("pf constraints: uniform PF=1 always satisfies") {
  auto dfg = bonsai_dfg(64, 16, 8, 128);
  CHECK(pf_constraints_ok(dfg, PfAssignment::ones(dfg)));
}

TEST_CASE("pf constraints: LT in-edge pf != epf is a violation") {
  TestGraph t;
  auto a = t.source(TensorType::vector(8));
  auto b = t.source(TensorType::vector(8));
  auto add = t.op(OpKind::MatAdd, {a, b});
  t.sink(add);
  auto pf = PfAssignment::ones(t.g);
  pf.epf[size_t(add)] = 3;
  pf.edge_pf[size_t(edge_index(t.g, a, add))] = 2;
  pf.edge_pf[size_t(edge_index(t.g, b, add))] = 3;
  pf.edge_pf[size_t(edge_index(t.g, add, add + 1))] = 3;
  auto v = pf_violations(t.g, pf);
  CHECK(v.size() == 1);
}

TEST_CASE("pf constraints: LT chain with shared pf feeding an NLT consumer") {
  TestGraph t;
  auto a = t.source(TensorType::vector(8));
  auto b = t.source(TensorType::vector(8));
  auto n1 = t.op(OpKind::MatAdd, {a, b});
  auto n2 = t.op(OpKind::ReLU, {n1});
  auto n3 = t.op(OpKind::TanH, {n2});
  auto red = t.op(OpKind::ArgMax, {n3});
  t.sink(red);
  auto pf = PfAssignment::ones(t.g);
  for (NodeId n : {n1, n2, n3}) pf.epf[size_t(n)] = 4;
  pf.epf[size_t(red)] = 7;  // NLT: free
  for (int e = 0; e < int(t.g.edges.size()); ++e) {
    const auto& edge = t.g.edges[size_t(e)];
    bool touches_lt = classify(t.g.nodes[size_t(edge.producer)].kind) ==
                          NodeClass::LinearTime ||
                      classify(t.g.nodes[size_t(edge.consumer)].kind) ==
                          NodeClass::LinearTime;
    if (touches_lt) pf.edge_pf[size_t(e)] = 4;
  }
  CHECK(pf_constraints_ok(t.g, pf));
}

TEST_CASE("pf constraints: scalar edges stay at pf 1 and are exempt") {
  TestGraph t;
  auto sc = t.source(TensorType::scalar());
  auto v = t.source(TensorType::vector(16));
  auto sm = t.op(OpKind::ScalarMatMul, {sc, v});
  t.sink(sm);
  auto pf = PfAssignment::ones(t.g);
  pf.epf[size_t(sm)] = 4;
  pf.edge_pf[size_t(edge_index(t.g, v, sm))] = 4;
  pf.edge_pf[size_t(edge_index(t.g, sm, sm + 1))] = 4;
  // scalar in-edge stays pf 1 and does not violate the LT equality
  CHECK(pf_constraints_ok(t.g, pf));
  pf.edge_pf[size_t(edge_index(t.g, sc, sm))] = 4;  // scalar edge forced wide
  CHECK_FALSE(pf_constraints_ok(t.g, pf));
}

TEST_CASE("pf constraints: epf above max_pf flagged") {
  TestGraph t;
  auto a = t.source(TensorType::vector(8));
  auto b = t.source(TensorType::vector(8));
  auto add = t.op(OpKind::MatAdd, {a, b});
  t.sink(add);
  auto pf = PfAssignment::ones(t.g);
  pf.epf[size_t(add)] = 9;  // 8 elements -> bound 8
  CHECK_FALSE(pf_constraints_ok(t.g, pf));
}

TEST_CASE("lt_clusters: singleton, chain of three, NLT break") {
  {
    TestGraph t;
    auto a = t.source(TensorType::vector(8));
    auto b = t.source(TensorType::vector(8));
    auto add = t.op(OpKind::MatAdd, {a, b});
    t.sink(add);
    auto cl = lt_clusters(t.g);
    REQUIRE(cl.size() == 1);
    CHECK(cl[0] == std::vector<NodeId>{add});
  }
  {
    TestGraph t;
    auto a = t.source(TensorType::vector(8));
    auto b = t.source(TensorType::vector(8));
    auto n1 = t.op(OpKind::MatAdd, {a, b});
    auto n2 = t.op(OpKind::TanH, {n1});
    auto n3 = t.op(OpKind::MatSub, {n2, b});
    t.sink(n3);
    auto cl = lt_clusters(t.g);
    REQUIRE(cl.size() == 1);
    CHECK(cl[0].size() == 3);
  }
  {
    TestGraph t;
    auto m = t.source(TensorType::matrix(4, 4));
    auto a = t.source(TensorType::matrix(4, 4));
    auto b = t.source(TensorType::matrix(4, 4));
    auto add = t.op(OpKind::MatAdd, {m, a});
    auto mm = t.op(OpKind::MatMul, {add, b});
    auto th = t.op(OpKind::TanH, {mm});
    t.sink(th);
    auto cl = lt_clusters(t.g);
    REQUIRE(cl.size() == 2);
    for (const auto& c : cl) CHECK(c.size() == 1);
  }
}

TEST_CASE("all_source_sink_paths: chain, diamond, stacked diamonds") {
  {
    TestGraph t;
    auto a = t.source(TensorType::vector(8));
    auto r = t.op(OpKind::ReLU, {a});
    t.sink(r);
    CHECK(all_source_sink_paths(t.g).size() == 1);
  }
  {
    TestGraph t;
    auto a = t.source(TensorType::vector(8));
    auto b1 = t.op(OpKind::ReLU, {a});
    auto b2 = t.op(OpKind::TanH, {a});
    auto j = t.op(OpKind::MatAdd, {b1, b2});
    t.sink(j);
    CHECK(all_source_sink_paths(t.g).size() == 2);
  }
  {
    TestGraph t;
    auto a = t.source(TensorType::vector(8));
    auto b1 = t.op(OpKind::ReLU, {a});
    auto b2 = t.op(OpKind::TanH, {a});
    auto j = t.op(OpKind::MatAdd, {b1, b2});
    auto c1 = t.op(OpKind::ReLU, {j});
    auto c2 = t.op(OpKind::TanH, {j});
    auto j2 = t.op(OpKind::MatAdd, {c1, c2});
    t.sink(j2);
    CHECK(all_source_sink_paths(t.g).size() == 4);
    CHECK_THROWS_AS(all_source_sink_paths(t.g, 3), PathExplosion);
  }
}

TEST_CASE("critical_path: chain sum and diamond max") {
  {
    TestGraph t;
    auto a = t.source(TensorType::vector(8));
    auto r = t.op(OpKind::ReLU, {a});
    auto s = t.sink(r);
    auto cp = critical_path(t.g, {3, 5, 2});
    CHECK(cp.total_cycles == 10);
    CHECK(cp.path == std::vector<NodeId>{a, r, s});
  }
  {
    TestGraph t;
    auto a = t.source(TensorType::vector(8));
    auto hot = t.op(OpKind::ReLU, {a});
    auto cold = t.op(OpKind::TanH, {a});
    auto j = t.op(OpKind::MatAdd, {hot, cold});
    auto s = t.sink(j);
    auto cp = critical_path(t.g, {1, 10, 7, 2, 1});
    CHECK(cp.total_cycles == 14);
    CHECK(cp.path == std::vector<NodeId>{a, hot, j, s});
  }
}

TEST_CASE("critical_path matches brute-force path enumeration on random DAGs") {
  for (uint64_t seed = 1; seed <= 25; ++seed) {
    auto dfg = random_dfg(seed, 8, 8);
    std::vector<int64_t> lat;
    for (const auto& n : dfg.nodes)
      lat.push_back(1 + int64_t((n.id * 7919 + seed * 104729) % 97));
    auto cp = critical_path(dfg, lat);
    int64_t best = 0;
    for (const auto& path : all_source_sink_paths(dfg)) {
      int64_t total = 0;
      for (NodeId n : path) total += lat[size_t(n)];
      best = std::max(best, total);
    }
    CHECK(cp.total_cycles == best);
  }
}

TEST_CASE("validate rejects malformed graphs") {
  {
    TestGraph t;  // dangling edge
    auto a = t.source(TensorType::vector(8));
    auto r = t.op(OpKind::ReLU, {a});
    t.sink(r);
    t.g.edges.push_back({r, 99, 0, TensorType::vector(8)});
    CHECK_THROWS_AS(t.g.validate(), MatforgeError);
  }
  {
    TestGraph t;  // cycle
    auto a = t.source(TensorType::vector(8));
    auto r1 = t.op(OpKind::ReLU, {a});
    auto r2 = t.op(OpKind::ReLU, {r1});
    t.sink(r2);
    t.g.edges.push_back({r2, r1, 0, TensorType::vector(8)});
    CHECK_THROWS_AS(t.g.validate(), MatforgeError);
  }
}

TEST_CASE("lt cluster members share epf whenever constraints hold") {
  auto dfg = lt_chain_dfg(64, 5);
  auto pf = PfAssignment::ones(dfg);
  // any constraint-satisfying assignment keeps clusters uniform
  for (const auto& cluster : lt_clusters(dfg)) {
    REQUIRE(pf_constraints_ok(dfg, pf));
    int first = pf.epf[size_t(cluster[0])];
    for (NodeId m : cluster) CHECK(pf.epf[size_t(m)] == first);
  }
}
