#include "matforge/dfg.hpp"

#include <algorithm>
#include <deque>

namespace matforge {

namespace {

int input_arity(OpKind k) {
  switch (k) {
    case OpKind::Source:
      return 0;
    case OpKind::Exp:
    case OpKind::ReLU:
    case OpKind::Sigmoid:
    case OpKind::TanH:
    case OpKind::Sgn:
    case OpKind::ArgMax:
    case OpKind::Sink:
      return 1;
    case OpKind::Select:
      return 3;  // cond, then, else
    default:
      return 2;
  }
}

}  // namespace

std::vector<NodeId> MatrixDfg::sources() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes)
    if (n.kind == OpKind::Source) out.push_back(n.id);
  return out;
}

std::vector<NodeId> MatrixDfg::sinks() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes)
    if (n.kind == OpKind::Sink) out.push_back(n.id);
  return out;
}

std::vector<NodeId> MatrixDfg::op_nodes() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes)
    if (n.kind != OpKind::Source && n.kind != OpKind::Sink) out.push_back(n.id);
  return out;
}

std::vector<std::vector<int>> MatrixDfg::out_edges() const {
  std::vector<std::vector<int>> out(nodes.size());
  for (int e = 0; e < int(edges.size()); ++e) out[edges[e].producer].push_back(e);
  return out;
}

std::vector<std::vector<int>> MatrixDfg::in_edges() const {
  std::vector<std::vector<int>> in(nodes.size());
  for (int e = 0; e < int(edges.size()); ++e) in[edges[e].consumer].push_back(e);
  return in;
}

std::vector<NodeId> MatrixDfg::topo_order() const {
  std::vector<int> indeg(nodes.size(), 0);
  auto out = out_edges();
  for (const auto& e : edges) ++indeg[e.consumer];
  std::deque<NodeId> ready;
  for (const auto& n : nodes)
    if (indeg[n.id] == 0) ready.push_back(n.id);
  std::vector<NodeId> order;
  while (!ready.empty()) {
    // smallest id first keeps the order deterministic
    auto it = std::min_element(ready.begin(), ready.end());
    NodeId n = *it;
    ready.erase(it);
    order.push_back(n);
    for (int e : out[n])
      if (--indeg[edges[e].consumer] == 0) ready.push_back(edges[e].consumer);
  }
  if (order.size() != nodes.size()) throw MatforgeError("DFG contains a cycle");
  return order;
}

void MatrixDfg::validate() const {
  for (int i = 0; i < int(nodes.size()); ++i)
    if (nodes[i].id != i) throw MatforgeError("node ids must be dense and ordered");
  for (const auto& e : edges) {
    if (e.producer < 0 || e.producer >= int(nodes.size()) || e.consumer < 0 ||
        e.consumer >= int(nodes.size()))
      throw MatforgeError("edge references unknown node");
    if (!(e.shape == nodes[e.producer].out_dim))
      throw MatforgeError("edge shape differs from producer output shape");
  }
  auto in = in_edges();
  for (const auto& n : nodes) {
    int arity = input_arity(n.kind);
    if (int(in[n.id].size()) != arity)
      throw MatforgeError("node " + n.name + " (" + std::string(op_kind_name(n.kind)) +
                          ") has " + std::to_string(in[n.id].size()) +
                          " inputs, expected " + std::to_string(arity));
    std::vector<bool> seen(arity, false);
    for (int e : in[n.id]) {
      int s = edges[e].slot;
      if (s < 0 || s >= arity || seen[s]) throw MatforgeError("bad input slot");
      seen[s] = true;
    }
    if (n.nnz && n.kind != OpKind::SpMV && n.kind != OpKind::Source)
      throw MatforgeError("nnz only valid on SpMV nodes and sparse sources");
    if (n.kind == OpKind::SpMV && !n.nnz)
      throw MatforgeError("SpMV node missing nnz annotation");
    if (n.nnz && *n.nnz > (n.kind == OpKind::SpMV ? n.in_dims.at(0).elems()
                                                  : n.out_dim.elems()))
      throw MatforgeError("nnz exceeds matrix element count");
  }
  topo_order();  // throws on cycles
}

std::vector<PfViolation> pf_violations(const MatrixDfg& dfg, const PfAssignment& a) {
  std::vector<PfViolation> v;
  if (a.epf.size() != dfg.nodes.size() || a.edge_pf.size() != dfg.edges.size()) {
    v.push_back({"assignment does not cover the graph", -1, -1});
    return v;
  }
  for (const auto& n : dfg.nodes) {
    int pf = a.epf[n.id];
    if (pf < 1)
      v.push_back({"epf < 1 at node " + std::to_string(n.id), n.id, -1});
    else if (pf > n.pf_bound())
      v.push_back({"epf " + std::to_string(pf) + " exceeds max_pf " +
                       std::to_string(n.pf_bound()) + " at node " + std::to_string(n.id),
                   n.id, -1});
  }
  for (int e = 0; e < int(dfg.edges.size()); ++e) {
    const auto& ed = dfg.edges[e];
    int pf = a.edge_pf[e];
    if (pf < 1) {
      v.push_back({"edge pf < 1", -1, e});
      continue;
    }
    if (ed.shape.rank == 0 && pf != 1)
      v.push_back({"scalar edge must have pf 1", -1, e});
    if (pf > std::max<int64_t>(1, ed.shape.elems()))
      v.push_back({"edge pf exceeds element count", -1, e});
  }
  // linear-time equality: all non-scalar incident edges match the node's epf
  for (const auto& n : dfg.nodes) {
    if (n.node_class() != NodeClass::LinearTime) continue;
    for (int e = 0; e < int(dfg.edges.size()); ++e) {
      const auto& ed = dfg.edges[e];
      if (ed.shape.rank == 0) continue;
      if (ed.producer != n.id && ed.consumer != n.id) continue;
      if (a.edge_pf[e] != a.epf[n.id])
        v.push_back({"linear-time node " + std::to_string(n.id) + " has edge pf " +
                         std::to_string(a.edge_pf[e]) + " != epf " +
                         std::to_string(a.epf[n.id]),
                     n.id, e});
    }
  }
  return v;
}

std::vector<std::vector<NodeId>> lt_clusters(const MatrixDfg& dfg) {
  int n = int(dfg.nodes.size());
  std::vector<int> parent(n);
  for (int i = 0; i < n; ++i) parent[i] = i;
  auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : dfg.edges) {
    if (e.shape.rank == 0) continue;
    if (dfg.nodes[e.producer].node_class() == NodeClass::LinearTime &&
        dfg.nodes[e.consumer].node_class() == NodeClass::LinearTime)
      parent[find(e.producer)] = find(e.consumer);
  }
  std::map<int, std::vector<NodeId>> groups;
  for (const auto& node : dfg.nodes)
    if (node.node_class() == NodeClass::LinearTime)
      groups[find(node.id)].push_back(node.id);
  std::vector<std::vector<NodeId>> out;
  for (auto& [root, members] : groups) {
    std::sort(members.begin(), members.end());
    out.push_back(std::move(members));
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::vector<NodeId>> all_source_sink_paths(const MatrixDfg& dfg, int cap) {
  auto out = dfg.out_edges();
  std::vector<std::vector<NodeId>> paths;
  std::vector<NodeId> cur;
  auto dfs = [&](auto&& self, NodeId n) -> void {
    cur.push_back(n);
    if (out[n].empty()) {
      if (int(paths.size()) >= cap)
        throw PathExplosion("path count exceeds cap " + std::to_string(cap));
      paths.push_back(cur);
    } else {
      std::vector<NodeId> succs;
      for (int e : out[n]) succs.push_back(dfg.edges[e].consumer);
      std::sort(succs.begin(), succs.end());
      succs.erase(std::unique(succs.begin(), succs.end()), succs.end());
      for (NodeId s : succs) self(self, s);
    }
    cur.pop_back();
  };
  std::vector<NodeId> starts;
  auto in = dfg.in_edges();
  for (const auto& n : dfg.nodes)
    if (in[n.id].empty()) starts.push_back(n.id);
  for (NodeId s : starts) dfs(dfs, s);
  return paths;
}

CriticalPath critical_path(const MatrixDfg& dfg, const std::vector<int64_t>& latency) {
  auto order = dfg.topo_order();
  auto out = dfg.out_edges();
  int n = int(dfg.nodes.size());
  std::vector<int64_t> total(n, 0);
  std::vector<std::vector<NodeId>> suffix(n);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    NodeId u = *it;
    std::vector<NodeId> succs;
    for (int e : out[u]) succs.push_back(dfg.edges[e].consumer);
    std::sort(succs.begin(), succs.end());
    succs.erase(std::unique(succs.begin(), succs.end()), succs.end());
    int64_t best = 0;
    const std::vector<NodeId>* best_suffix = nullptr;
    for (NodeId s : succs) {
      if (!best_suffix || total[s] > best ||
          (total[s] == best && suffix[s] < *best_suffix)) {
        best = total[s];
        best_suffix = &suffix[s];
      }
    }
    total[u] = latency[u] + best;
    suffix[u] = {u};
    if (best_suffix)
      suffix[u].insert(suffix[u].end(), best_suffix->begin(), best_suffix->end());
  }
  CriticalPath cp;
  auto in = dfg.in_edges();
  for (const auto& node : dfg.nodes) {
    if (!in[node.id].empty()) continue;
    if (total[node.id] > cp.total_cycles ||
        (total[node.id] == cp.total_cycles &&
         (cp.path.empty() || suffix[node.id] < cp.path))) {
      cp.total_cycles = total[node.id];
      cp.path = suffix[node.id];
    }
  }
  return cp;
}

}  // namespace matforge
