#pragma once

#include <set>
#include <vector>

#include "matforge/cost_model.hpp"
#include "matforge/cost_table.hpp"
#include "matforge/dfg.hpp"

namespace matforge {

// A schedule unit is a single DFG node or a fused pipeline of linear-time
// nodes sharing one PF. Members are in topological order; k = members.size().
struct ScheduleUnit {
  std::vector<NodeId> members;
  int pf = 1;
  bool fused() const { return members.size() > 1; }
};

struct Schedule {
  std::vector<ScheduleUnit> units;            // ordered by smallest member id
  std::vector<std::set<int>> deps;            // unit -> predecessor unit indices
  std::vector<int> unit_of;                   // node id -> unit index

  // edges internal to a fused unit (no buffer is materialized for them)
  std::vector<int> fused_edges;
};

struct ConstraintViolation : MatforgeError {
  using MatforgeError::MatforgeError;
};

// With pipelining on, every linear-time cluster whose fusion shortens its
// own execution becomes one SuperNode unit; a unit starts only when all
// external predecessors are done.
Schedule build_schedule(const MatrixDfg& dfg, const PfAssignment& a,
                        bool pipelining, const CostTable& table);

// Ground-truth cycles for one unit (the simulator's clock source).
int64_t unit_sim_latency(const MatrixDfg& dfg, const ScheduleUnit& unit,
                         const PfAssignment& a, const CostTable& table);

// Model-estimated cycles for one unit.
int64_t unit_latency(const MatrixDfg& dfg, const ScheduleUnit& unit,
                     const CostModelParams& params, const Profile1& profile1,
                     const PfAssignment& a, const CostTable& table);

}  // namespace matforge
