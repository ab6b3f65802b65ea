#include "matforge/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace matforge {

namespace {

int32_t wrap16(int64_t v) { return int32_t(int16_t(uint16_t(uint64_t(v)))); }

int clamp_idx(int32_t x) { return int(std::clamp<int32_t>(x, -128, 127)) + 128; }

std::array<int16_t, 256> make_table(double (*f)(double)) {
  std::array<int16_t, 256> t{};
  for (int i = 0; i < 256; ++i) t[i] = int16_t(std::lround(f(double(i - 128))));
  return t;
}

double tanh_fn(double x) { return 127.0 * std::tanh(x / 32.0); }
double sigmoid_fn(double x) { return 127.0 / (1.0 + std::exp(-x / 16.0)); }
double exp_fn(double x) { return std::min(32767.0, 256.0 * std::exp(x / 64.0)); }

}  // namespace

const std::array<int16_t, 256>& tanh_table() {
  static const auto t = make_table(tanh_fn);
  return t;
}
const std::array<int16_t, 256>& sigmoid_table() {
  static const auto t = make_table(sigmoid_fn);
  return t;
}
const std::array<int16_t, 256>& exp_table() {
  static const auto t = make_table(exp_fn);
  return t;
}

namespace {

int32_t apply_unary(OpKind k, int32_t x) {
  switch (k) {
    case OpKind::TanH: return tanh_table()[clamp_idx(x)];
    case OpKind::Sigmoid: return sigmoid_table()[clamp_idx(x)];
    case OpKind::Exp: return exp_table()[clamp_idx(x)];
    case OpKind::ReLU: return x > 0 ? x : 0;
    case OpKind::Sgn: return x > 0 ? 1 : (x < 0 ? -1 : 0);
    default: throw MatforgeError("not a unary elementwise op");
  }
}

// streaming evaluation used by run(); sparse ops walk the nonzero triplets
TensorValue eval_node(const DfgNode& n, const std::vector<const TensorValue*>& in) {
  TensorValue out = TensorValue::zeros(n.out_dim);
  switch (n.kind) {
    case OpKind::MatAdd:
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = wrap16(int64_t(in[0]->data[i]) + in[1]->data[i]);
      break;
    case OpKind::MatSub:
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = wrap16(int64_t(in[0]->data[i]) - in[1]->data[i]);
      break;
    case OpKind::Hadamard:
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = wrap16(int64_t(in[0]->data[i]) * in[1]->data[i]);
      break;
    case OpKind::ScalarMatMul:
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = wrap16(int64_t(in[0]->data[0]) * in[1]->data[i]);
      break;
    case OpKind::Geq:
      out.data[0] = in[0]->data[0] >= in[1]->data[0] ? 1 : 0;
      break;
    case OpKind::Select: {
      bool c = in[0]->data[0] != 0;
      const auto& src = c ? *in[1] : *in[2];
      out.data = src.data;
      break;
    }
    case OpKind::TanH:
    case OpKind::Sigmoid:
    case OpKind::Exp:
    case OpKind::ReLU:
    case OpKind::Sgn:
      for (size_t i = 0; i < out.data.size(); ++i)
        out.data[i] = apply_unary(n.kind, in[0]->data[i]);
      break;
    case OpKind::MatMul: {
      const auto& A = *in[0];
      const auto& B = *in[1];
      int I = A.shape.rank == 1 ? 1 : A.shape.rows();
      int J = A.shape.rank == 1 ? A.shape.rows() : A.shape.cols();
      int K = B.shape.rank == 1 ? 1 : B.shape.cols();
      for (int i = 0; i < I; ++i)
        for (int k = 0; k < K; ++k) {
          int64_t acc = 0;
          for (int j = 0; j < J; ++j)
            acc += int64_t(A.data[size_t(i) * J + j]) * B.data[size_t(j) * K + k];
          out.data[size_t(i) * K + k] = wrap16(acc);
        }
      break;
    }
    case OpKind::SpMV: {
      // gather triplets from the (dense-stored) sparse operand
      const auto& M = *in[0];
      const auto& v = *in[1];
      int rows = M.shape.rows(), cols = M.shape.cols();
      for (int r = 0; r < rows; ++r) {
        int64_t acc = 0;
        for (int c = 0; c < cols; ++c) {
          int32_t m = M.at(r, c);
          if (m != 0) acc += int64_t(m) * v.data[size_t(c)];
        }
        out.data[size_t(r)] = wrap16(acc);
      }
      break;
    }
    case OpKind::DotProduct: {
      int64_t acc = 0;
      for (size_t i = 0; i < in[0]->data.size(); ++i)
        acc += int64_t(in[0]->data[i]) * in[1]->data[i];
      out.data[0] = wrap16(acc);
      break;
    }
    case OpKind::OuterProduct: {
      int m = in[0]->shape.rows(), k = in[1]->shape.rows();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
          out.data[size_t(i) * k + j] =
              wrap16(int64_t(in[0]->data[size_t(i)]) * in[1]->data[size_t(j)]);
      break;
    }
    case OpKind::ArgMax: {
      int32_t best = in[0]->data[0];
      int idx = 0;
      for (int i = 1; i < int(in[0]->data.size()); ++i)
        if (in[0]->data[size_t(i)] > best) {
          best = in[0]->data[size_t(i)];
          idx = i;
        }
      out.data[0] = idx;
      break;
    }
    case OpKind::Sink:
      out.data = in[0]->data;
      break;
    default:
      throw MatforgeError("eval_node: unexpected kind " +
                          std::string(op_kind_name(n.kind)));
  }
  return out;
}

std::vector<TensorValue> eval_all(const MatrixDfg& dfg, const Inputs& inputs) {
  std::vector<TensorValue> vals(dfg.nodes.size());
  auto in_edges = dfg.in_edges();
  for (NodeId id : dfg.topo_order()) {
    const auto& n = dfg.nodes[id];
    if (n.kind == OpKind::Source) {
      if (n.init) {
        vals[id] = {n.out_dim, *n.init};
        for (auto& v : vals[id].data) v = wrap16(v);
      } else {
        auto it = inputs.find(n.name);
        if (it == inputs.end())
          throw MatforgeError("missing input for source '" + n.name + "'");
        if (!(it->second.shape == n.out_dim))
          throw MatforgeError("input shape mismatch for '" + n.name + "': got " +
                              it->second.shape.str() + ", want " + n.out_dim.str());
        vals[id] = it->second;
        for (auto& v : vals[id].data) v = wrap16(v);
      }
      continue;
    }
    std::vector<const TensorValue*> in(n.in_dims.size(), nullptr);
    for (int e : in_edges[id]) in[size_t(dfg.edges[e].slot)] = &vals[dfg.edges[e].producer];
    vals[id] = eval_node(n, in);
  }
  return vals;
}

}  // namespace

SimReport run(const MatrixDfg& dfg, const PfAssignment& a, const Schedule& schedule,
              const Inputs& inputs, const CostTable& table) {
  auto vals = eval_all(dfg, inputs);

  SimReport r;
  r.per_node.assign(dfg.nodes.size(), {});
  std::vector<int64_t> unit_end(schedule.units.size(), 0);
  // units are already in an order compatible with deps? deps may point
  // forward; iterate until fixpoint-free via topological pass over units
  std::vector<int> order(schedule.units.size());
  for (int i = 0; i < int(order.size()); ++i) order[i] = i;
  std::vector<bool> done(schedule.units.size(), false);
  size_t resolved = 0;
  while (resolved < schedule.units.size()) {
    bool progress = false;
    for (int u = 0; u < int(schedule.units.size()); ++u) {
      if (done[u]) continue;
      bool ready = true;
      int64_t start = 0;
      for (int p : schedule.deps[u]) {
        if (!done[p]) { ready = false; break; }
        start = std::max(start, unit_end[p]);
      }
      if (!ready) continue;
      int64_t dur = unit_sim_latency(dfg, schedule.units[u], a, table);
      unit_end[u] = start + dur;
      for (NodeId m : schedule.units[u].members) r.per_node[m] = {start, start + dur};
      done[u] = true;
      ++resolved;
      progress = true;
    }
    if (!progress) throw MatforgeError("schedule dependency cycle");
  }
  for (auto e : unit_end) r.total_cycles = std::max(r.total_cycles, e);
  for (const auto& n : dfg.nodes)
    if (n.kind == OpKind::Sink) r.outputs[n.name] = vals[n.id];
  return r;
}

std::map<std::string, TensorValue> reference_eval(const MatrixDfg& dfg,
                                                  const Inputs& inputs) {
  // naive dense interpreter, deliberately written apart from eval_node:
  // everything is a dense matrix; SpMV densifies into a plain mat-vec
  std::vector<TensorValue> vals(dfg.nodes.size());
  auto in_edges = dfg.in_edges();
  std::map<std::string, TensorValue> out;
  for (NodeId id : dfg.topo_order()) {
    const auto& n = dfg.nodes[id];
    std::vector<const TensorValue*> in(n.in_dims.size(), nullptr);
    for (int e : in_edges[id]) in[size_t(dfg.edges[e].slot)] = &vals[dfg.edges[e].producer];
    TensorValue v = TensorValue::zeros(n.out_dim);
    switch (n.kind) {
      case OpKind::Source: {
        if (n.init) {
          v.data = *n.init;
        } else {
          auto it = inputs.find(n.name);
          if (it == inputs.end())
            throw MatforgeError("missing input for source '" + n.name + "'");
          if (!(it->second.shape == n.out_dim))
            throw MatforgeError("input shape mismatch for '" + n.name + "'");
          v.data = it->second.data;
        }
        for (auto& x : v.data) x = wrap16(x);
        break;
      }
      case OpKind::SpMV:
      case OpKind::MatMul:
      case OpKind::DotProduct:
      case OpKind::OuterProduct: {
        // treat each operand as a 2-D dense matrix and multiply
        auto as_mat = [&](const TensorValue& t, bool column) {
          int r = t.shape.rank == 2 ? t.shape.rows() : (column ? t.shape.rows() : 1);
          int c = t.shape.rank == 2 ? t.shape.cols() : (column ? 1 : t.shape.rows());
          return std::pair<int, int>(r, c);
        };
        const TensorValue& A = *in[0];
        const TensorValue& B = *in[1];
        // rank-1 operands: column on the outer-product left / product right,
        // row otherwise
        auto [ar, ac] = as_mat(A, n.kind == OpKind::OuterProduct);
        auto [br, bc] = as_mat(B, n.kind != OpKind::OuterProduct);
        if (ac != br) throw MatforgeError("reference_eval: inner dim mismatch");
        for (int i = 0; i < ar; ++i)
          for (int j = 0; j < bc; ++j) {
            int64_t acc = 0;
            for (int k = 0; k < ac; ++k)
              acc += int64_t(A.data[size_t(i) * ac + k]) * B.data[size_t(k) * bc + j];
            v.data[size_t(i) * bc + j] = wrap16(acc);
          }
        break;
      }
      case OpKind::ArgMax: {
        int idx = 0;
        for (int i = 1; i < int(in[0]->data.size()); ++i)
          if (in[0]->data[size_t(i)] > in[0]->data[size_t(idx)]) idx = i;
        v.data[0] = idx;
        break;
      }
      case OpKind::Select:
        v.data = (in[0]->data[0] != 0 ? in[1] : in[2])->data;
        break;
      case OpKind::Geq:
        v.data[0] = in[0]->data[0] >= in[1]->data[0] ? 1 : 0;
        break;
      case OpKind::MatAdd:
      case OpKind::MatSub:
        for (size_t i = 0; i < v.data.size(); ++i)
          v.data[i] = wrap16(n.kind == OpKind::MatAdd
                                 ? int64_t(in[0]->data[i]) + in[1]->data[i]
                                 : int64_t(in[0]->data[i]) - in[1]->data[i]);
        break;
      case OpKind::Hadamard:
        for (size_t i = 0; i < v.data.size(); ++i)
          v.data[i] = wrap16(int64_t(in[0]->data[i]) * in[1]->data[i]);
        break;
      case OpKind::ScalarMatMul:
        for (size_t i = 0; i < v.data.size(); ++i)
          v.data[i] = wrap16(int64_t(in[0]->data[0]) * in[1]->data[i]);
        break;
      case OpKind::TanH:
      case OpKind::Sigmoid:
      case OpKind::Exp:
      case OpKind::ReLU:
      case OpKind::Sgn:
        for (size_t i = 0; i < v.data.size(); ++i)
          v.data[i] = apply_unary(n.kind, in[0]->data[i]);
        break;
      case OpKind::Sink:
        v.data = in[0]->data;
        out[n.name] = v;
        break;
    }
    vals[id] = std::move(v);
  }
  return out;
}

Inputs random_inputs(const MatrixDfg& dfg, uint64_t seed) {
  Inputs in;
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int32_t> dist(-64, 63);
  for (const auto& n : dfg.nodes) {
    if (n.kind != OpKind::Source || n.init) continue;
    TensorValue v = TensorValue::zeros(n.out_dim);
    if (n.nnz) {
      // sparse source: place exactly nnz nonzeros deterministically
      std::vector<size_t> pos(v.data.size());
      for (size_t i = 0; i < pos.size(); ++i) pos[i] = i;
      std::shuffle(pos.begin(), pos.end(), rng);
      for (int i = 0; i < *n.nnz && i < int(pos.size()); ++i) {
        int32_t x = 0;
        while (x == 0) x = dist(rng);
        v.data[pos[size_t(i)]] = x;
      }
    } else {
      for (auto& x : v.data) x = dist(rng);
    }
    in[n.name] = std::move(v);
  }
  return in;
}

Profile1 profile_pf1(const MatrixDfg& dfg, const CostTable& table, uint64_t seed) {
  auto a = PfAssignment::ones(dfg);
  auto sched = build_schedule(dfg, a, /*pipelining=*/false, table);
  auto report = run(dfg, a, sched, random_inputs(dfg, seed), table);
  Profile1 p;
  for (const auto& n : dfg.nodes) {
    const auto& iv = report.per_node[n.id];
    p[n.id] = {iv.end - iv.start, table.lut1(n)};
  }
  return p;
}

TensorType infer_out_dim(OpKind kind, const std::vector<TensorType>& in_dims) {
  switch (kind) {
    case OpKind::SpMV:
      return TensorType::vector(in_dims.at(0).rows());
    case OpKind::DotProduct:
    case OpKind::ArgMax:
    case OpKind::Geq:
      return TensorType::scalar();
    case OpKind::OuterProduct:
      return TensorType::matrix(in_dims.at(0).rows(), in_dims.at(1).rows());
    case OpKind::MatMul: {
      const auto& a = in_dims.at(0);
      const auto& b = in_dims.at(1);
      if (a.rank == 1) return TensorType::vector(b.cols());
      if (b.rank == 1) return TensorType::vector(a.rows());
      return TensorType::matrix(a.rows(), b.cols());
    }
    case OpKind::ScalarMatMul:
    case OpKind::Select:
      return in_dims.back();
    default:
      return in_dims.at(0);
  }
}

MatrixDfg build_single_op_dfg(OpKind kind, const std::vector<TensorType>& in_dims,
                              std::optional<int> nnz) {
  MatrixDfg dfg;
  std::vector<NodeId> srcs;
  for (int i = 0; i < int(in_dims.size()); ++i) {
    DfgNode s;
    s.id = NodeId(dfg.nodes.size());
    s.name = "in" + std::to_string(i);
    s.kind = OpKind::Source;
    s.out_dim = in_dims[size_t(i)];
    if (i == 0 && kind == OpKind::SpMV) s.nnz = nnz;
    srcs.push_back(s.id);
    dfg.nodes.push_back(std::move(s));
  }
  DfgNode op;
  op.id = NodeId(dfg.nodes.size());
  op.name = "op";
  op.kind = kind;
  op.in_dims = in_dims;
  op.out_dim = infer_out_dim(kind, in_dims);
  if (kind == OpKind::SpMV) op.nnz = nnz;
  for (int slot = 0; slot < int(srcs.size()); ++slot)
    dfg.edges.push_back({srcs[size_t(slot)], op.id, slot, in_dims[size_t(slot)]});
  dfg.nodes.push_back(op);
  DfgNode sink;
  sink.id = NodeId(dfg.nodes.size());
  sink.name = "out";
  sink.kind = OpKind::Sink;
  sink.in_dims = {op.out_dim};
  sink.out_dim = op.out_dim;
  dfg.edges.push_back({op.id, sink.id, 0, op.out_dim});
  dfg.nodes.push_back(std::move(sink));
  dfg.validate();
  return dfg;
}

std::vector<TrainingSample> gen_training_data(const std::vector<TrainingSpec>& specs,
                                              const std::vector<int>& pf_grid,
                                              const CostTable& table) {
  std::vector<TrainingSample> out;
  for (const auto& spec : specs) {
    auto dfg = build_single_op_dfg(spec.kind, spec.dims, spec.nnz);
    NodeId op_id = -1;
    for (const auto& n : dfg.nodes)
      if (n.kind == spec.kind) op_id = n.id;
    const auto& op = dfg.nodes[op_id];
    int bound = op.pf_bound();
    auto inputs = random_inputs(dfg, 0xda7a5eed ^ uint64_t(op_id));
    for (int pf : pf_grid) {
      if (pf > bound) continue;  // clamped grid
      PfAssignment a = PfAssignment::ones(dfg);
      a.epf[op_id] = pf;
      if (op.node_class() == NodeClass::LinearTime)
        for (int e = 0; e < int(dfg.edges.size()); ++e)
          if (dfg.edges[e].shape.rank > 0 &&
              (dfg.edges[e].producer == op_id || dfg.edges[e].consumer == op_id))
            a.edge_pf[e] = pf;
      auto sched = build_schedule(dfg, a, /*pipelining=*/false, table);
      auto rep = run(dfg, a, sched, inputs, table);
      TrainingSample s;
      s.kind = spec.kind;
      s.dims = spec.dims;
      s.pf = pf;
      s.latency = rep.per_node[op_id].end - rep.per_node[op_id].start;
      s.lut = table.lut_at(op, pf);
      out.push_back(std::move(s));
    }
  }
  return out;
}

nlohmann::json sim_report_to_json(const MatrixDfg& dfg, const SimReport& r) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["total_cycles"] = r.total_cycles;
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : dfg.nodes)
    j["nodes"].push_back({{"id", n.id},
                          {"name", n.name},
                          {"start", r.per_node[n.id].start},
                          {"end", r.per_node[n.id].end}});
  j["outputs"] = nlohmann::json::object();
  for (const auto& [name, v] : r.outputs) {
    j["outputs"][name] = {{"shape", v.shape.str()}, {"data", v.data}};
  }
  return j;
}

}  // namespace matforge
