#include "matforge/scheduler.hpp"

#include <algorithm>

namespace matforge {

namespace {

int64_t cluster_elems(const MatrixDfg& dfg, const std::vector<NodeId>& members) {
  int64_t e = 1;
  for (NodeId m : members) e = std::max(e, dfg.nodes[m].out_dim.elems());
  return e;
}

std::vector<NodeId> topo_sorted_members(const MatrixDfg& dfg,
                                        std::vector<NodeId> members) {
  auto order = dfg.topo_order();
  std::vector<int> pos(dfg.nodes.size());
  for (int i = 0; i < int(order.size()); ++i) pos[order[i]] = i;
  std::sort(members.begin(), members.end(),
            [&](NodeId a, NodeId b) { return pos[a] < pos[b]; });
  return members;
}

// A cluster may only be fused when no path leaves it and re-enters through
// an outside node; otherwise the fused unit would depend on a unit that
// depends on it.
bool convex_cluster(const MatrixDfg& dfg, const std::vector<NodeId>& cluster) {
  std::vector<char> in_c(dfg.nodes.size(), 0);
  for (NodeId m : cluster) in_c[size_t(m)] = 1;
  auto out = dfg.out_edges();
  std::vector<char> below(dfg.nodes.size(), 0);
  std::vector<NodeId> stack;
  for (NodeId m : cluster)
    for (int e : out[size_t(m)]) {
      NodeId c = dfg.edges[size_t(e)].consumer;
      if (!in_c[size_t(c)] && !below[size_t(c)]) {
        below[size_t(c)] = 1;
        stack.push_back(c);
      }
    }
  while (!stack.empty()) {
    NodeId n = stack.back();
    stack.pop_back();
    for (int e : out[size_t(n)]) {
      NodeId c = dfg.edges[size_t(e)].consumer;
      if (!below[size_t(c)]) {
        below[size_t(c)] = 1;
        stack.push_back(c);
      }
    }
  }
  for (const auto& e : dfg.edges)
    if (below[size_t(e.producer)] && in_c[size_t(e.consumer)]) return false;
  return true;
}

}  // namespace

namespace {

Schedule assemble(const MatrixDfg& dfg, const PfAssignment& a,
                  const std::vector<std::vector<NodeId>>& fusions);

// Longest path over the unit graph; equals the event simulator's makespan.
int64_t schedule_makespan(const MatrixDfg& dfg, const Schedule& s,
                          const PfAssignment& a, const CostTable& table) {
  std::vector<int64_t> finish(s.units.size(), -1);
  int64_t total = 0;
  auto visit = [&](auto&& self, int u) -> int64_t {
    if (finish[size_t(u)] >= 0) return finish[size_t(u)];
    int64_t start = 0;
    for (int d : s.deps[size_t(u)]) start = std::max(start, self(self, d));
    finish[size_t(u)] = start + unit_sim_latency(dfg, s.units[size_t(u)], a, table);
    return finish[size_t(u)];
  };
  for (int u = 0; u < int(s.units.size()); ++u) total = std::max(total, visit(visit, u));
  return total;
}

}  // namespace

Schedule build_schedule(const MatrixDfg& dfg, const PfAssignment& a, bool pipelining,
                        const CostTable& table) {
  auto violations = pf_violations(dfg, a);
  if (!violations.empty())
    throw ConstraintViolation("PF assignment invalid: " + violations.front().what);

  std::vector<std::vector<NodeId>> fusions;
  if (pipelining) {
    int64_t best = schedule_makespan(dfg, assemble(dfg, a, fusions), a, table);
    for (const auto& cluster : lt_clusters(dfg)) {
      if (cluster.size() < 2) continue;
      if (!convex_cluster(dfg, cluster)) continue;
      int pf = a.epf[cluster.front()];
      // fuse only when the pipeline is actually shorter than running the
      // members back to back
      int64_t sum = 0;
      for (NodeId m : cluster) sum += table.latency_at(dfg.nodes[m], pf);
      int64_t fused = table.supernode_latency(cluster_elems(dfg, cluster),
                                              int(cluster.size()), pf);
      if (fused >= sum) continue;
      // fusing delays early members until every cluster input is ready, so
      // a locally-shorter pipeline can still stretch the makespan; keep the
      // fusion only when the whole-graph makespan does not grow
      fusions.push_back(cluster);
      int64_t with = schedule_makespan(dfg, assemble(dfg, a, fusions), a, table);
      if (with > best)
        fusions.pop_back();
      else
        best = with;
    }
  }
  return assemble(dfg, a, fusions);
}

namespace {

Schedule assemble(const MatrixDfg& dfg, const PfAssignment& a,
                  const std::vector<std::vector<NodeId>>& fusions) {
  Schedule s;
  s.unit_of.assign(dfg.nodes.size(), -1);
  for (const auto& cluster : fusions) {
    ScheduleUnit u;
    u.members = topo_sorted_members(dfg, cluster);
    u.pf = a.epf[cluster.front()];
    int idx = int(s.units.size());
    for (NodeId m : u.members) s.unit_of[m] = idx;
    s.units.push_back(std::move(u));
  }
  for (const auto& n : dfg.nodes) {
    if (s.unit_of[n.id] >= 0) continue;
    ScheduleUnit u;
    u.members = {n.id};
    u.pf = a.epf[n.id];
    s.unit_of[n.id] = int(s.units.size());
    s.units.push_back(std::move(u));
  }

  // deterministic unit order: by smallest member id
  std::vector<int> perm(s.units.size());
  for (int i = 0; i < int(perm.size()); ++i) perm[i] = i;
  std::sort(perm.begin(), perm.end(), [&](int x, int y) {
    return s.units[x].members.front() < s.units[y].members.front();
  });
  std::vector<ScheduleUnit> reordered;
  std::vector<int> newpos(s.units.size());
  for (int i = 0; i < int(perm.size()); ++i) {
    newpos[perm[i]] = i;
    reordered.push_back(std::move(s.units[perm[i]]));
  }
  s.units = std::move(reordered);
  for (auto& u : s.unit_of) u = newpos[u];

  s.deps.assign(s.units.size(), {});
  for (int e = 0; e < int(dfg.edges.size()); ++e) {
    const auto& ed = dfg.edges[e];
    int pu = s.unit_of[ed.producer];
    int cu = s.unit_of[ed.consumer];
    if (pu == cu)
      s.fused_edges.push_back(e);
    else
      s.deps[cu].insert(pu);
  }
  return s;
}

}  // namespace

int64_t unit_sim_latency(const MatrixDfg& dfg, const ScheduleUnit& unit,
                         const PfAssignment& a, const CostTable& table) {
  if (unit.members.size() == 1)
    return table.latency_at(dfg.nodes[unit.members[0]], a.epf[unit.members[0]]);
  return table.supernode_latency(cluster_elems(dfg, unit.members),
                                 int(unit.members.size()), unit.pf);
}

int64_t unit_latency(const MatrixDfg& dfg, const ScheduleUnit& unit,
                     const CostModelParams& params, const Profile1& profile1,
                     const PfAssignment& a, const CostTable& table) {
  if (unit.members.size() == 1) {
    NodeId id = unit.members[0];
    return est_node_latency(params, dfg.nodes[id], profile1.at(id).latency1,
                            a.epf[id]);
  }
  // pipelined chain: streaming time plus one register stage per member
  return table.supernode_latency(cluster_elems(dfg, unit.members),
                                 int(unit.members.size()), unit.pf);
}

}  // namespace matforge
