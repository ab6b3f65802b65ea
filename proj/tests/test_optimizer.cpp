#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "matforge/optimizer.hpp"
#include "matforge/simulator.hpp"
#include "matforge/suite.hpp"

using namespace matforge;

namespace {

struct Fixture {
  CostTable table = CostTable::builtin();
  CostModelParams params;
  Fixture() {
    params =
        fit(gen_training_data(default_training_specs(), default_pf_grid(), table),
            table);
  }
};

const Fixture& fixture() {
  static Fixture f;
  return f;
}

// by-hand graph builder (same shape as the one in test_dfg.cpp)
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
      g.edges.push_back(
          {ins[size_t(s)], n.id, s, g.nodes[size_t(ins[size_t(s)])].out_dim});
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

}  // namespace

TEST_CASE("usage: lut sum plus shuffle on non-linear-time edges") {
  TestGraph t;
  auto s0 = t.source(TensorType::vector(8));
  auto s1 = t.source(TensorType::vector(8));
  auto add = t.op(OpKind::MatAdd, {s0, s1});
  auto am = t.op(OpKind::ArgMax, {add});
  auto sk = t.sink(am);

  CostModelParams params;
  params.models[OpKind::Source] = {0, 0, 1, 1, 0, 0};
  params.models[OpKind::Sink] = {0, 0, 1, 1, 0, 0};
  params.models[OpKind::MatAdd] = {0, 0, 1, 1, 0, 1};
  params.models[OpKind::ArgMax] = {0, 0, 1, 1, 0, 1};
  Profile1 profile{{s0, {1, 0}}, {s1, {1, 0}}, {add, {12, 100}},
                   {am, {13, 200}}, {sk, {1, 0}}};

  auto a = PfAssignment::ones(t.g);
  auto u = usage(t.g, params, profile, a, CostTable::builtin());
  // 100 + 200 node LUTs, plus c_shuffle=8 on the ArgMax's 2 edges
  CHECK(u.lut == 316);
  CHECK(u.dsp == 2);

  a.epf[size_t(add)] = 3;
  a.epf[size_t(am)] = 4;
  u = usage(t.g, params, profile, a, CostTable::builtin());
  CHECK(u.dsp == 7);
}

TEST_CASE("est_total_latency: diamond takes the heavier branch") {
  TestGraph t;
  auto s = t.source(TensorType::vector(4));
  auto a = t.op(OpKind::ReLU, {s});
  auto hot = t.op(OpKind::ReLU, {a});
  auto cold = t.op(OpKind::TanH, {a});
  auto join = t.op(OpKind::MatAdd, {hot, cold});
  auto sk = t.sink(join);

  CostModelParams params;
  for (OpKind k : {OpKind::Source, OpKind::Sink, OpKind::ReLU, OpKind::TanH,
                   OpKind::MatAdd})
    params.models[k] = {0, 0, 1, 1, 0, 0};
  Profile1 profile{{s, {1, 1}},    {a, {10, 1}}, {hot, {7, 1}},
                   {cold, {3, 1}}, {join, {5, 1}}, {sk, {1, 1}}};
  auto pf = PfAssignment::ones(t.g);
  // 1 + 10 + 7 + 5 + 1 along source -> a -> hot -> join -> sink
  CHECK(est_total_latency(t.g, params, profile, pf) == 24);
}

TEST_CASE("est_total_latency equals brute-force path maximum") {
  const auto& f = fixture();
  for (uint64_t seed = 1; seed <= 10; ++seed) {
    auto dfg = random_dfg(seed, 8, 8);
    auto profile = profile_pf1(dfg, f.table);
    auto pf = PfAssignment::ones(dfg);
    std::vector<int64_t> lat;
    for (const auto& n : dfg.nodes)
      lat.push_back(
          est_node_latency(f.params, n, profile.at(n.id).latency1, pf.epf[n.id]));
    int64_t best = 0;
    for (const auto& path : all_source_sink_paths(dfg)) {
      int64_t total = 0;
      for (NodeId n : path) total += lat[size_t(n)];
      best = std::max(best, total);
    }
    CHECK(est_total_latency(dfg, f.params, profile, pf) == best);
  }
}

TEST_CASE("greedy: infeasible baseline is rejected") {
  const auto& f = fixture();
  auto dfg = bonsai_dfg(64, 16, 8, 128);
  auto profile = profile_pf1(dfg, f.table);
  ResourceBudget tiny{10, 0};
  CHECK_THROWS_AS(greedy_optimize(dfg, f.params, profile, tiny,
                                  BenefitMetric::LatencyPerLut, f.table),
                  InfeasibleBaseline);
}

TEST_CASE("greedy: budget exactly at PF=1 usage yields the baseline") {
  const auto& f = fixture();
  auto dfg = bonsai_dfg(64, 16, 8, 128);
  auto profile = profile_pf1(dfg, f.table);
  auto base = usage(dfg, f.params, profile, PfAssignment::ones(dfg), f.table);
  ResourceBudget exact{base.lut, base.dsp};
  auto r = greedy_optimize(dfg, f.params, profile, exact,
                           BenefitMetric::LatencyPerLut, f.table);
  CHECK(r.assignment == PfAssignment::ones(dfg));
  CHECK(r.iterations == 0);
}

TEST_CASE("greedy: trace is feasible and nonincreasing at every step") {
  const auto& f = fixture();
  for (BenefitMetric metric :
       {BenefitMetric::LatencyReduction, BenefitMetric::LatencyPerLut}) {
    auto dfg = bonsai_dfg(128, 16, 8, 256);
    auto profile = profile_pf1(dfg, f.table);
    ResourceBudget budget{20800, 90};
    auto r = greedy_optimize(dfg, f.params, profile, budget, metric, f.table);
    CHECK(pf_constraints_ok(dfg, r.assignment));
    CHECK(r.usage.fits(budget));
    int64_t base = est_total_latency(dfg, f.params, profile, PfAssignment::ones(dfg));
    CHECK(r.est_latency <= base);
    int64_t prev = base;
    for (const auto& step : r.log) {
      CHECK(step.est_latency <= prev);
      CHECK(step.usage.fits(budget));
      prev = step.est_latency;
    }
    CHECK(r.iterations == int(r.log.size()));
  }
}

TEST_CASE("greedy: never spends PF off the critical path") {
  // hot branch: big MatMul; cold branch: tiny ReLU. The DSP budget runs out
  // before the MatMul stops dominating, so the cold branch must stay at 1.
  TestGraph t;
  auto m = t.source(TensorType::matrix(16, 16));
  auto x = t.source(TensorType::vector(16));
  auto v8 = t.source(TensorType::vector(16));
  auto hot = t.op(OpKind::MatMul, {m, x});
  auto cold = t.op(OpKind::ReLU, {v8});
  auto join = t.op(OpKind::Hadamard, {hot, cold});
  t.sink(join);

  const auto& f = fixture();
  auto profile = profile_pf1(t.g, f.table);
  ResourceBudget budget{20800, 4};  // DSP-starved
  auto r = greedy_optimize(t.g, f.params, profile, budget,
                           BenefitMetric::LatencyPerLut, f.table);
  CHECK(r.assignment.epf[size_t(hot)] > 1);
  CHECK(r.assignment.epf[size_t(cold)] == 1);
  for (const auto& step : r.log) CHECK(step.node != cold);
}

TEST_CASE("blackbox: single-node closed form") {
  TestGraph t;
  auto a = t.source(TensorType::vector(256));
  auto b = t.source(TensorType::vector(256));
  auto dot = t.op(OpKind::DotProduct, {a, b});
  t.sink(dot);

  const auto& f = fixture();
  auto profile = profile_pf1(t.g, f.table);
  ResourceBudget budget{1 << 20, 1 << 20};
  auto r = blackbox_optimize(t.g, f.params, profile, budget, f.table);
  const auto& m = f.params.model(OpKind::DotProduct);
  REQUIRE(m.beta_l > 0);
  int expect = std::clamp(int(std::sqrt(m.gamma_l / m.beta_l)), 1, 256);
  CHECK(r.assignment.epf[size_t(dot)] == expect);
}

TEST_CASE("blackbox: all-LT cluster collapses to one variable") {
  const auto& f = fixture();
  auto dfg = lt_chain_dfg(64, 3);
  auto profile = profile_pf1(dfg, f.table);
  auto r = blackbox_optimize(dfg, f.params, profile, {20800, 90}, f.table);
  int shared = -1;
  for (const auto& n : dfg.nodes) {
    if (n.kind == OpKind::Source || n.kind == OpKind::Sink) continue;
    if (shared < 0) shared = r.assignment.epf[n.id];
    CHECK(r.assignment.epf[n.id] == shared);
  }
  CHECK(pf_constraints_ok(dfg, r.assignment));
}

TEST_CASE("blackbox: rounding never violates the budget") {
  const auto& f = fixture();
  ResourceBudget budget{20800, 90};
  for (uint64_t seed = 1; seed <= 8; ++seed) {
    auto dfg = random_dfg(seed, 6, 16);
    auto profile = profile_pf1(dfg, f.table);
    for (bool nearest : {false, true}) {
      BlackboxOptions opts;
      opts.round_to_nearest = nearest;
      auto r = blackbox_optimize(dfg, f.params, profile, budget, f.table, opts);
      CHECK(r.usage.fits(budget));
      CHECK(pf_constraints_ok(dfg, r.assignment));
    }
  }
}

TEST_CASE("optimizers are deterministic") {
  const auto& f = fixture();
  auto dfg = bonsai_dfg(128, 16, 8, 256);
  auto profile = profile_pf1(dfg, f.table);
  ResourceBudget budget{20800, 90};
  auto g1 = greedy_optimize(dfg, f.params, profile, budget,
                            BenefitMetric::LatencyPerLut, f.table);
  auto g2 = greedy_optimize(dfg, f.params, profile, budget,
                            BenefitMetric::LatencyPerLut, f.table);
  CHECK(g1.assignment == g2.assignment);
  CHECK(g1.iterations == g2.iterations);
  CHECK(g1.est_latency == g2.est_latency);
  auto b1 = blackbox_optimize(dfg, f.params, profile, budget, f.table);
  auto b2 = blackbox_optimize(dfg, f.params, profile, budget, f.table);
  CHECK(b1.assignment == b2.assignment);
  CHECK(b1.est_latency == b2.est_latency);
}

TEST_CASE("greedy close to brute force on small instances") {
  const auto& f = fixture();
  ResourceBudget budget{20800, 90};
  int checked = 0;
  for (uint64_t seed = 1; seed <= 12; ++seed) {
    auto dfg = random_dfg(seed, 3, 8);
    auto groups = PfGroups::build(dfg);
    int64_t space = 1;
    for (size_t gi = 0; gi < groups.groups.size(); ++gi)
      space *= std::min(groups.bound[gi], 8);
    if (space > 20000) continue;
    auto profile = profile_pf1(dfg, f.table);
    // exhaustive search over all feasible assignments, capped at PF 8
    std::vector<int> pf(groups.groups.size(), 1);
    int64_t best = -1;
    for (;;) {
      auto a = groups.assignment(dfg, pf);
      if (usage(dfg, f.params, profile, a, f.table).fits(budget))
        best = best < 0
                   ? est_total_latency(dfg, f.params, profile, a)
                   : std::min(best, est_total_latency(dfg, f.params, profile, a));
      size_t i = 0;
      while (i < pf.size()) {
        if (pf[i] < std::min(groups.bound[i], 8)) {
          ++pf[i];
          std::fill(pf.begin(), pf.begin() + long(i), 1);
          break;
        }
        ++i;
      }
      if (i == pf.size()) break;
    }
    REQUIRE(best > 0);
    auto r = greedy_optimize(dfg, f.params, profile, budget,
                             BenefitMetric::LatencyReduction, f.table);
    CHECK(double(r.est_latency) <= 1.15 * double(best) + 1e-9);
    ++checked;
  }
  CHECK(checked >= 5);
}
