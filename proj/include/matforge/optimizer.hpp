#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "matforge/cost_model.hpp"
#include "matforge/cost_table.hpp"
#include "matforge/dfg.hpp"

namespace matforge {

struct ResourceBudget {
  int64_t lut_total = 20800;
  int64_t dsp_total = 90;
};

enum class BenefitMetric { LatencyReduction, LatencyPerLut };

struct Usage {
  int64_t lut = 0;
  int64_t dsp = 0;
  bool fits(const ResourceBudget& b) const {
    return lut <= b.lut_total && dsp <= b.dsp_total;
  }
};

struct OptStep {
  NodeId node = -1;  // representative node whose PF move was applied
  int new_pf = 1;
  int64_t est_latency = 0;
  Usage usage;
};

struct OptimizerResult {
  PfAssignment assignment;
  int64_t est_latency = 0;
  Usage usage;
  int iterations = 0;
  double wall_time_sec = 0;
  std::vector<OptStep> log;  // greedy iteration trace
};

struct InfeasibleBaseline : MatforgeError {
  using MatforgeError::MatforgeError;
};
struct SolverDiverged : MatforgeError {
  using MatforgeError::MatforgeError;
};

// Decision variables of the PF problem: one per linear-time cluster, one
// per non-linear-time node. Edge PFs follow the LT endpoint's cluster.
struct PfGroups {
  std::vector<std::vector<NodeId>> groups;  // member nodes per group
  std::vector<int> group_of;                // node id -> group index
  std::vector<int> bound;                   // per-group max PF

  static PfGroups build(const MatrixDfg& dfg);
  PfAssignment assignment(const MatrixDfg& dfg, const std::vector<int>& pf) const;
};

// Total LUT/DSP consumption: per-node model prediction plus shuffle logic
// on every edge of a non-linear-time node.
Usage usage(const MatrixDfg& dfg, const CostModelParams& params,
            const Profile1& profile1, const PfAssignment& a, const CostTable& table);

int64_t est_total_latency(const MatrixDfg& dfg, const CostModelParams& params,
                          const Profile1& profile1, const PfAssignment& a);

OptimizerResult greedy_optimize(const MatrixDfg& dfg, const CostModelParams& params,
                                const Profile1& profile1, const ResourceBudget& budget,
                                BenefitMetric metric, const CostTable& table);

struct BlackboxOptions {
  int restarts = 16;
  int sweep_cap = 10000;
  double tol = 1e-3;
  uint64_t seed = 1;
  bool round_to_nearest = false;  // default rounds down (feasibility wins)
  int path_cap = kDefaultPathCap;
};

OptimizerResult blackbox_optimize(const MatrixDfg& dfg, const CostModelParams& params,
                                  const Profile1& profile1,
                                  const ResourceBudget& budget, const CostTable& table,
                                  const BlackboxOptions& opts = {});

}  // namespace matforge
