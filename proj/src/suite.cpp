#include "matforge/suite.hpp"

#include <random>

#include "matforge/simulator.hpp"

namespace matforge {

namespace {

// Incremental graph builder; edge shapes and input dims follow producers.
struct Builder {
  MatrixDfg g;

  NodeId source(const std::string& name, TensorType t,
                std::optional<int> nnz = std::nullopt) {
    DfgNode n;
    n.id = NodeId(g.nodes.size());
    n.name = name;
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
    for (NodeId i : ins) n.in_dims.push_back(g.nodes[i].out_dim);
    n.out_dim = infer_out_dim(k, n.in_dims);
    n.nnz = nnz;
    n.name = "n" + std::to_string(n.id) + "_" + std::string(op_kind_name(k));
    g.nodes.push_back(n);
    for (int s = 0; s < int(ins.size()); ++s)
      g.edges.push_back({ins[size_t(s)], n.id, s, g.nodes[ins[size_t(s)]].out_dim});
    return n.id;
  }

  void sink(const std::string& name, NodeId v) {
    DfgNode n;
    n.id = NodeId(g.nodes.size());
    n.name = name;
    n.kind = OpKind::Sink;
    n.in_dims = {g.nodes[v].out_dim};
    n.out_dim = g.nodes[v].out_dim;
    g.nodes.push_back(n);
    g.edges.push_back({v, n.id, 0, g.nodes[v].out_dim});
  }

  MatrixDfg take() {
    g.validate();
    return std::move(g);
  }
};

}  // namespace

MatrixDfg bonsai_dfg(int features, int proj, int classes, int nnz) {
  Builder b;
  NodeId x = b.source("x", TensorType::vector(features));
  NodeId z = b.source("z", TensorType::matrix(proj, features), nnz);
  NodeId w = b.source("w", TensorType::matrix(classes, proj));
  NodeId v = b.source("v", TensorType::matrix(classes, proj));
  NodeId zp = b.op(OpKind::SpMV, {z, x}, nnz);
  NodeId wz = b.op(OpKind::MatMul, {w, zp});
  NodeId vz = b.op(OpKind::MatMul, {v, zp});
  NodeId t1 = b.op(OpKind::TanH, {wz});
  NodeId t2 = b.op(OpKind::TanH, {vz});
  NodeId h = b.op(OpKind::Hadamard, {t1, t2});
  NodeId am = b.op(OpKind::ArgMax, {h});
  b.sink("label", am);
  return b.take();
}

MatrixDfg protonn_dfg(int features, int proj, int prototypes) {
  Builder b;
  NodeId x = b.source("x", TensorType::vector(features));
  NodeId w = b.source("w", TensorType::matrix(proj, features));
  NodeId bias = b.source("b", TensorType::vector(proj));
  NodeId gamma = b.source("gamma", TensorType::scalar());
  NodeId m = b.source("m", TensorType::matrix(prototypes, proj));
  NodeId wx = b.op(OpKind::MatMul, {w, x});
  NodeId diff = b.op(OpKind::MatSub, {wx, bias});
  NodeId sq = b.op(OpKind::Hadamard, {diff, diff});
  NodeId scaled = b.op(OpKind::ScalarMatMul, {gamma, sq});
  NodeId e = b.op(OpKind::Exp, {scaled});
  NodeId scores = b.op(OpKind::MatMul, {m, e});
  NodeId am = b.op(OpKind::ArgMax, {scores});
  b.sink("label", am);
  return b.take();
}

MatrixDfg lt_chain_dfg(int elems, int stages) {
  Builder b;
  NodeId x = b.source("x", TensorType::vector(elems));
  NodeId y = b.source("y", TensorType::vector(elems));
  NodeId cur = b.op(OpKind::MatAdd, {x, y});
  for (int s = 1; s < stages; ++s) {
    switch (s % 4) {
      case 0: cur = b.op(OpKind::MatAdd, {cur, y}); break;
      case 1: cur = b.op(OpKind::ReLU, {cur}); break;
      case 2: cur = b.op(OpKind::Hadamard, {cur, x}); break;
      case 3: cur = b.op(OpKind::MatSub, {cur, y}); break;
    }
  }
  b.sink("out", cur);
  return b.take();
}

std::vector<SuiteCase> benchmark_suite() {
  std::vector<SuiteCase> suite;
  struct BonsaiCfg { int f, p, c, nnz; };
  const BonsaiCfg bonsai[] = {
      {64, 16, 8, 128},  {128, 16, 8, 256}, {256, 24, 8, 512},
      {256, 32, 16, 1024}, {400, 32, 16, 2000}, {512, 24, 10, 1536},
      {64, 8, 4, 64},    {128, 32, 26, 640},
  };
  int i = 0;
  for (const auto& c : bonsai) {
    suite.push_back({"bonsai" + std::to_string(i++),
                     bonsai_dfg(c.f, c.p, c.c, c.nnz)});
  }
  struct ProtoCfg { int f, d, l; };
  const ProtoCfg proto[] = {
      {64, 16, 20},  {128, 16, 40}, {256, 24, 60},  {256, 32, 80},
      {400, 32, 60}, {512, 16, 20}, {128, 24, 120}, {64, 16, 10},
  };
  i = 0;
  for (const auto& c : proto) {
    suite.push_back({"protonn" + std::to_string(i++),
                     protonn_dfg(c.f, c.d, c.l)});
  }
  suite.push_back({"ltchain0", lt_chain_dfg(64, 3)});
  suite.push_back({"ltchain1", lt_chain_dfg(128, 4)});
  suite.push_back({"ltchain2", lt_chain_dfg(256, 6)});
  suite.push_back({"ltchain3", lt_chain_dfg(512, 8)});
  return suite;
}

std::vector<SuiteCase> spmv_sweep() {
  std::vector<SuiteCase> fam;
  // same 32x128 projection, growing nonzero count: the SpMV node's share of
  // the critical path rises with nnz, and the DSP budget forces the
  // optimizer to trade SpMV parallelism against the dense tail
  for (int nnz : {64, 128, 256, 512, 1024, 2048, 4096}) {
    fam.push_back({"spmv_nnz" + std::to_string(nnz),
                   bonsai_dfg(128, 32, 128, nnz)});
  }
  return fam;
}

MatrixDfg random_dfg(uint64_t seed, int max_ops, int max_dim) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) {
    return int(std::uniform_int_distribution<>(lo, hi)(rng));
  };
  Builder b;
  struct Avail { NodeId id; TensorType t; };
  std::vector<Avail> pool;
  auto rand_shape = [&]() -> TensorType {
    switch (pick(0, 2)) {
      case 0: return TensorType::scalar();
      case 1: return TensorType::vector(pick(2, max_dim));
      default: return TensorType::matrix(pick(2, max_dim), pick(2, max_dim));
    }
  };
  int nsrc = pick(1, 3);
  for (int s = 0; s < nsrc; ++s) {
    TensorType t = rand_shape();
    pool.push_back({b.source("in" + std::to_string(s), t), t});
  }
  auto need = [&](TensorType t) -> NodeId {
    // reuse a pooled value of this shape when one exists, else add a source
    std::vector<int> cands;
    for (int p = 0; p < int(pool.size()); ++p)
      if (pool[size_t(p)].t == t) cands.push_back(p);
    if (!cands.empty() && pick(0, 3) != 0)
      return pool[size_t(cands[size_t(pick(0, int(cands.size()) - 1))])].id;
    NodeId s = b.source("aux" + std::to_string(b.g.nodes.size()), t);
    pool.push_back({s, t});
    return s;
  };
  int nops = pick(1, max_ops);
  for (int o = 0; o < nops; ++o) {
    // copy: need() may grow the pool and invalidate references into it
    const Avail base = pool[size_t(pick(0, int(pool.size()) - 1))];
    NodeId made = -1;
    switch (pick(0, 7)) {
      case 0: made = b.op(OpKind::MatAdd, {base.id, need(base.t)}); break;
      case 1: made = b.op(OpKind::MatSub, {need(base.t), base.id}); break;
      case 2: made = b.op(OpKind::Hadamard, {base.id, need(base.t)}); break;
      case 3: made = b.op(OpKind::ReLU, {base.id}); break;
      case 4: made = b.op(OpKind::TanH, {base.id}); break;
      case 5:
        made = b.op(OpKind::ScalarMatMul, {need(TensorType::scalar()), base.id});
        break;
      case 6:
        if (base.t.rank == 1) {
          made = b.op(OpKind::DotProduct, {base.id, need(base.t)});
        } else if (base.t.rank == 2) {
          NodeId v = need(TensorType::vector(base.t.cols()));
          made = b.op(OpKind::MatMul, {base.id, v});
        } else {
          made = b.op(OpKind::Sgn, {base.id});
        }
        break;
      default:
        if (base.t.rank == 1) {
          made = b.op(OpKind::ArgMax, {base.id});
        } else {
          made = b.op(OpKind::Exp, {base.id});
        }
        break;
    }
    pool.push_back({made, b.g.nodes[made].out_dim});
  }
  // drain every value nobody consumed
  std::vector<int> fanout(b.g.nodes.size(), 0);
  for (const auto& e : b.g.edges) fanout[size_t(e.producer)]++;
  std::vector<NodeId> dangling;
  for (const auto& n : b.g.nodes)
    if (fanout[size_t(n.id)] == 0) dangling.push_back(n.id);
  int outs = 0;
  for (NodeId id : dangling) b.sink("out" + std::to_string(outs++), id);
  return b.take();
}

std::vector<TrainingSpec> default_training_specs() {
  std::vector<TrainingSpec> specs;
  auto vec = TensorType::vector;
  auto mat = TensorType::matrix;
  const int lens[] = {192, 224, 256};
  for (OpKind k : {OpKind::MatAdd, OpKind::MatSub, OpKind::Hadamard}) {
    for (int n : lens) specs.push_back({k, {vec(n), vec(n)}, std::nullopt});
  }
  for (int n : lens)
    specs.push_back({OpKind::ScalarMatMul, {TensorType::scalar(), vec(n)}, std::nullopt});
  for (int n : lens)
    specs.push_back(
        {OpKind::Select, {TensorType::scalar(), vec(n), vec(n)}, std::nullopt});
  for (OpKind k : {OpKind::Exp, OpKind::ReLU, OpKind::Sigmoid, OpKind::TanH}) {
    for (int n : lens) specs.push_back({k, {vec(n)}, std::nullopt});
  }
  specs.push_back({OpKind::MatMul, {mat(16, 8), mat(8, 16)}, std::nullopt});
  specs.push_back({OpKind::MatMul, {mat(16, 16), mat(16, 16)}, std::nullopt});
  specs.push_back({OpKind::MatMul, {mat(32, 8), mat(8, 32)}, std::nullopt});
  specs.push_back({OpKind::OuterProduct, {vec(16), vec(16)}, std::nullopt});
  specs.push_back({OpKind::OuterProduct, {vec(16), vec(24)}, std::nullopt});
  specs.push_back({OpKind::OuterProduct, {vec(24), vec(24)}, std::nullopt});
  const int redlens[] = {64, 72, 80};
  for (int n : redlens) {
    specs.push_back({OpKind::DotProduct, {vec(n), vec(n)}, std::nullopt});
    specs.push_back({OpKind::ArgMax, {vec(n)}, std::nullopt});
  }
  // nonzero count tied to row count so the ratio curves line up across sets
  for (int r : {16, 24, 32})
    specs.push_back({OpKind::SpMV, {mat(r, 32), vec(32)}, 8 * r});
  return specs;
}

std::vector<int> default_pf_grid() {
  std::vector<int> g;
  for (int p = 1; p <= 32; ++p) g.push_back(p);
  return g;
}

}  // namespace matforge
