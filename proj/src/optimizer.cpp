#include "matforge/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <set>

namespace matforge {

PfGroups PfGroups::build(const MatrixDfg& dfg) {
  PfGroups g;
  g.group_of.assign(dfg.nodes.size(), -1);
  for (const auto& cluster : lt_clusters(dfg)) {
    int idx = int(g.groups.size());
    for (NodeId m : cluster) g.group_of[m] = idx;
    g.groups.push_back(cluster);
  }
  for (const auto& n : dfg.nodes) {
    if (g.group_of[n.id] >= 0) continue;
    g.group_of[n.id] = int(g.groups.size());
    g.groups.push_back({n.id});
  }
  for (const auto& members : g.groups) {
    int b = std::numeric_limits<int>::max();
    for (NodeId m : members) b = std::min(b, dfg.nodes[m].pf_bound());
    g.bound.push_back(b);
  }
  return g;
}

PfAssignment PfGroups::assignment(const MatrixDfg& dfg,
                                 const std::vector<int>& pf) const {
  PfAssignment a = PfAssignment::ones(dfg);
  for (const auto& n : dfg.nodes) a.epf[n.id] = pf[size_t(group_of[n.id])];
  for (int e = 0; e < int(dfg.edges.size()); ++e) {
    const auto& ed = dfg.edges[e];
    if (ed.shape.rank == 0) continue;  // scalar broadcast wire
    const auto& pn = dfg.nodes[ed.producer];
    const auto& cn = dfg.nodes[ed.consumer];
    if (pn.node_class() == NodeClass::LinearTime)
      a.edge_pf[e] = pf[size_t(group_of[ed.producer])];
    else if (cn.node_class() == NodeClass::LinearTime)
      a.edge_pf[e] = pf[size_t(group_of[ed.consumer])];
    // NLT-to-NLT edges stay at 1; shuffle logic absorbs the mismatch
  }
  return a;
}

Usage usage(const MatrixDfg& dfg, const CostModelParams& params,
            const Profile1& profile1, const PfAssignment& a, const CostTable& table) {
  Usage u;
  auto in = dfg.in_edges();
  auto out = dfg.out_edges();
  for (const auto& n : dfg.nodes) {
    int lut1 = profile1.at(n.id).lut1;
    if (n.kind == OpKind::Source || n.kind == OpKind::Sink) {
      u.lut += lut1;
      continue;
    }
    u.lut += predict_lut(params, n.kind, lut1, a.epf[n.id]);
    u.dsp += predict_dsp(params, n.kind, a.epf[n.id]);
    if (n.node_class() == NodeClass::NonLinearTime) {
      int64_t edge_pf_sum = 0;
      for (int e : in[n.id]) edge_pf_sum += a.edge_pf[e];
      for (int e : out[n.id]) edge_pf_sum += a.edge_pf[e];
      u.lut += int64_t(table.c_shuffle) * edge_pf_sum;
    }
  }
  return u;
}

int64_t est_total_latency(const MatrixDfg& dfg, const CostModelParams& params,
                          const Profile1& profile1, const PfAssignment& a) {
  std::vector<int64_t> lat(dfg.nodes.size());
  for (const auto& n : dfg.nodes)
    lat[n.id] = est_node_latency(params, n, profile1.at(n.id).latency1, a.epf[n.id]);
  return critical_path(dfg, lat).total_cycles;
}

namespace {

std::vector<int64_t> node_latencies(const MatrixDfg& dfg, const CostModelParams& params,
                                    const Profile1& profile1, const PfAssignment& a) {
  std::vector<int64_t> lat(dfg.nodes.size());
  for (const auto& n : dfg.nodes)
    lat[n.id] = est_node_latency(params, n, profile1.at(n.id).latency1, a.epf[n.id]);
  return lat;
}

}  // namespace

OptimizerResult greedy_optimize(const MatrixDfg& dfg, const CostModelParams& params,
                                const Profile1& profile1, const ResourceBudget& budget,
                                BenefitMetric metric, const CostTable& table) {
  auto t0 = std::chrono::steady_clock::now();
  auto groups = PfGroups::build(dfg);
  std::vector<int> pf(groups.groups.size(), 1);
  PfAssignment cur = groups.assignment(dfg, pf);
  Usage cur_usage = usage(dfg, params, profile1, cur, table);
  if (!cur_usage.fits(budget))
    throw InfeasibleBaseline("PF=1 design needs " + std::to_string(cur_usage.lut) +
                             " LUT / " + std::to_string(cur_usage.dsp) +
                             " DSP, budget is " + std::to_string(budget.lut_total) +
                             " / " + std::to_string(budget.dsp_total));
  int64_t cur_lat = est_total_latency(dfg, params, profile1, cur);

  OptimizerResult result;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  for (;;) {
    auto lat = node_latencies(dfg, params, profile1, cur);
    auto cp = critical_path(dfg, lat);

    // candidate moves: +1 on the decision group of each critical-path node
    std::set<int> seen_groups;
    double best_benefit = -kInf;
    int best_group = -1;
    NodeId best_node = -1;
    PfAssignment best_assignment;
    Usage best_usage;
    int64_t best_lat = 0;
    for (NodeId n : cp.path) {
      int g = groups.group_of[n];
      if (seen_groups.count(g)) continue;
      seen_groups.insert(g);
      if (pf[size_t(g)] + 1 > groups.bound[size_t(g)]) continue;
      // skip moves past the group's continuous optimum: the rounded model
      // plateaus there, so zero-delta admissibility would otherwise walk PF
      // to the bound while the real beta*pf cost keeps growing
      {
        double before = 0, after = 0;
        int p = pf[size_t(g)];
        for (NodeId m : groups.groups[size_t(g)]) {
          const auto& node = dfg.nodes[m];
          if (node.kind == OpKind::Source || node.kind == OpKind::Sink) continue;
          const auto& om = params.model(node.kind);
          double lat1 = double(profile1.at(m).latency1);
          before += (om.alpha_l + om.beta_l * p + om.gamma_l / p) * lat1;
          after += (om.alpha_l + om.beta_l * (p + 1) + om.gamma_l / (p + 1)) * lat1;
        }
        if (after > before - 1e-12) continue;
      }
      auto trial_pf = pf;
      ++trial_pf[size_t(g)];
      PfAssignment trial = groups.assignment(dfg, trial_pf);
      Usage trial_usage = usage(dfg, params, profile1, trial, table);
      if (!trial_usage.fits(budget)) continue;
      int64_t trial_lat = est_total_latency(dfg, params, profile1, trial);
      int64_t dtotal = cur_lat - trial_lat;
      // the whole-graph total must never get worse (zero is fine: raising
      // one of two symmetric branches leaves the max unchanged)
      if (dtotal < 0) continue;
      // latency delta on the current critical path, holding the path fixed;
      // the frozen-path delta keeps parallel same-latency branches from
      // starving each other. Zero-delta moves stay admissible so integer
      // plateaus of the rounded model can be crossed; the continuous-optimum
      // guard above already stops walks past the model's minimum
      auto trial_nodes = node_latencies(dfg, params, profile1, trial);
      int64_t dpath = 0;
      for (NodeId pn : cp.path) dpath += lat[size_t(pn)] - trial_nodes[size_t(pn)];
      if (dpath < 0) continue;
      double benefit;
      if (metric == BenefitMetric::LatencyReduction) {
        benefit = double(dtotal);
      } else {
        // latency reduction per additional LUT
        int64_t dlut = trial_usage.lut - cur_usage.lut;
        benefit = dlut <= 0 ? kInf : double(dpath) / double(dlut);
      }
      NodeId rep = n;  // smallest critical-path node of the group wins ties
      if (benefit > best_benefit ||
          (benefit == best_benefit && rep < best_node)) {
        best_benefit = benefit;
        best_group = g;
        best_node = rep;
        best_assignment = std::move(trial);
        best_usage = trial_usage;
        best_lat = trial_lat;
      }
    }
    if (best_group < 0) break;  // no admissible move on the critical path
    ++pf[size_t(best_group)];
    cur = std::move(best_assignment);
    cur_usage = best_usage;
    cur_lat = best_lat;
    ++result.iterations;
    result.log.push_back({best_node, pf[size_t(best_group)], cur_lat, cur_usage});
  }

  result.assignment = std::move(cur);
  result.est_latency = cur_lat;
  result.usage = cur_usage;
  result.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

namespace {

// Continuous relaxation helpers. Latencies and LUTs use the un-rounded
// model forms; both are evaluated per decision group vector.
struct Relaxation {
  const MatrixDfg& dfg;
  const CostModelParams& params;
  const Profile1& profile1;
  const CostTable& table;
  const PfGroups& groups;

  double node_latency(NodeId id, double p) const {
    const auto& n = dfg.nodes[id];
    int64_t lat1 = profile1.at(id).latency1;
    if (n.kind == OpKind::Source || n.kind == OpKind::Sink) return double(lat1);
    const auto& m = params.model(n.kind);
    return (m.alpha_l + m.beta_l * p + m.gamma_l / p) * double(lat1);
  }

  // longest source-to-sink path under continuous PFs
  double objective(const std::vector<double>& pf) const {
    auto order = dfg.topo_order();
    auto out = dfg.out_edges();
    std::vector<double> total(dfg.nodes.size(), 0);
    double best = 0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      NodeId u = *it;
      double succ = 0;
      for (int e : out[u])
        succ = std::max(succ, total[dfg.edges[e].consumer]);
      total[u] = node_latency(u, pf[size_t(groups.group_of[u])]) + succ;
      best = std::max(best, total[u]);
    }
    return best;
  }

  double edge_pf(int e, const std::vector<double>& pf) const {
    const auto& ed = dfg.edges[e];
    if (ed.shape.rank == 0) return 1.0;
    if (dfg.nodes[ed.producer].node_class() == NodeClass::LinearTime)
      return pf[size_t(groups.group_of[ed.producer])];
    if (dfg.nodes[ed.consumer].node_class() == NodeClass::LinearTime)
      return pf[size_t(groups.group_of[ed.consumer])];
    return 1.0;
  }

  void usage_cont(const std::vector<double>& pf, double& lut, double& dsp) const {
    lut = 0;
    dsp = 0;
    auto in = dfg.in_edges();
    auto out = dfg.out_edges();
    for (const auto& n : dfg.nodes) {
      int lut1 = profile1.at(n.id).lut1;
      if (n.kind == OpKind::Source || n.kind == OpKind::Sink) {
        lut += lut1;
        continue;
      }
      double p = pf[size_t(groups.group_of[n.id])];
      const auto& m = params.model(n.kind);
      lut += (m.alpha_lut + m.beta_lut * p) * lut1;
      dsp += m.alpha_dsp * p;
      if (n.node_class() == NodeClass::NonLinearTime) {
        for (int e : in[n.id]) lut += table.c_shuffle * edge_pf(e, pf);
        for (int e : out[n.id]) lut += table.c_shuffle * edge_pf(e, pf);
      }
    }
  }

  bool feasible(const std::vector<double>& pf, const ResourceBudget& b) const {
    double lut, dsp;
    usage_cont(pf, lut, dsp);
    return lut <= double(b.lut_total) + 1e-6 && dsp <= double(b.dsp_total) + 1e-6;
  }

  // largest value of variable g keeping the budget, others fixed
  double max_feasible(int g, std::vector<double> pf, const ResourceBudget& b,
                      double ub) const {
    double lo = 1.0, hi = ub;
    pf[size_t(g)] = hi;
    if (feasible(pf, b)) return hi;
    for (int i = 0; i < 60; ++i) {
      double mid = 0.5 * (lo + hi);
      pf[size_t(g)] = mid;
      (feasible(pf, b) ? lo : hi) = mid;
    }
    return lo;
  }
};

double golden_min(const std::function<double(double)>& f, double lo, double hi) {
  constexpr double kPhi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - kPhi * (b - a);
  double x2 = a + kPhi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int i = 0; i < 80 && (b - a) > 1e-6; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - kPhi * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + kPhi * (b - a);
      f2 = f(x2);
    }
  }
  return f1 < f2 ? x1 : x2;
}

}  // namespace

OptimizerResult blackbox_optimize(const MatrixDfg& dfg, const CostModelParams& params,
                                  const Profile1& profile1,
                                  const ResourceBudget& budget, const CostTable& table,
                                  const BlackboxOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  auto groups = PfGroups::build(dfg);
  int nvars = int(groups.groups.size());

  Relaxation rx{dfg, params, profile1, table, groups};
  std::vector<double> ones(size_t(nvars), 1.0);
  if (!rx.feasible(ones, budget)) {
    // check with the integer model too so the message matches greedy's
    PfAssignment a1 = groups.assignment(dfg, std::vector<int>(size_t(nvars), 1));
    Usage u1 = usage(dfg, params, profile1, a1, table);
    throw InfeasibleBaseline("PF=1 design needs " + std::to_string(u1.lut) + " LUT / " +
                             std::to_string(u1.dsp) + " DSP, over budget");
  }

  std::vector<double> best_pf = ones;
  double best_obj = rx.objective(ones);
  bool any_converged = false;
  int total_sweeps = 0;

  std::mt19937_64 rng(opts.seed);
  for (int restart = 0; restart < opts.restarts; ++restart) {
    std::vector<double> pf(size_t(nvars), 1.0);
    if (restart > 0) {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (int g = 0; g < nvars; ++g) {
        double span = double(groups.bound[size_t(g)]) - 1.0;
        pf[size_t(g)] = 1.0 + u(rng) * u(rng) * span;
      }
      // shrink toward 1 until the random start is feasible
      while (!rx.feasible(pf, budget)) {
        bool shrunk = false;
        for (auto& p : pf)
          if (p > 1.0) {
            p = 1.0 + (p - 1.0) * 0.5;
            shrunk = true;
          }
        if (!shrunk) break;
      }
      if (!rx.feasible(pf, budget)) pf.assign(size_t(nvars), 1.0);
    }

    double prev = rx.objective(pf);
    bool converged = false;
    for (int sweep = 0; sweep < opts.sweep_cap; ++sweep, ++total_sweeps) {
      for (int g = 0; g < nvars; ++g) {
        double ub = rx.max_feasible(g, pf, budget, double(groups.bound[size_t(g)]));
        if (ub <= 1.0 + 1e-9) {
          pf[size_t(g)] = 1.0;
          continue;
        }
        auto f = [&](double p) {
          auto trial = pf;
          trial[size_t(g)] = p;
          return rx.objective(trial);
        };
        pf[size_t(g)] = golden_min(f, 1.0, ub);
      }
      double cur = rx.objective(pf);
      if (std::abs(prev - cur) <= opts.tol * std::max(1.0, prev)) {
        converged = true;
        break;
      }
      prev = cur;
    }
    if (converged) any_converged = true;
    double obj = rx.objective(pf);
    if (obj < best_obj - 1e-9) {
      best_obj = obj;
      best_pf = pf;
    }
  }
  if (!any_converged)
    throw SolverDiverged("no restart reached stationarity within the sweep cap");

  // integer rounding: down by default (budget-safe since LUT/DSP are
  // monotone in PF); the round-to-nearest variant repairs feasibility by
  // stepping offenders back down
  std::vector<int> ipf(size_t(nvars), 1);
  for (int g = 0; g < nvars; ++g) {
    double v = best_pf[size_t(g)];
    int r = opts.round_to_nearest ? int(std::lround(v)) : int(std::floor(v + 1e-9));
    ipf[size_t(g)] = std::clamp(r, 1, groups.bound[size_t(g)]);
  }
  PfAssignment a = groups.assignment(dfg, ipf);
  Usage u = usage(dfg, params, profile1, a, table);
  while (!u.fits(budget)) {
    int worst = -1, worst_pf = 1;
    for (int g = 0; g < nvars; ++g)
      if (ipf[size_t(g)] > worst_pf) {
        worst_pf = ipf[size_t(g)];
        worst = g;
      }
    if (worst < 0) throw MatforgeError("cannot repair rounded solution");
    --ipf[size_t(worst)];
    a = groups.assignment(dfg, ipf);
    u = usage(dfg, params, profile1, a, table);
  }

  OptimizerResult result;
  result.assignment = std::move(a);
  result.usage = u;
  result.est_latency = est_total_latency(dfg, params, profile1, result.assignment);
  result.iterations = total_sweeps;
  result.wall_time_sec =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace matforge
