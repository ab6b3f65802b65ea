#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "matforge/cost_model.hpp"
#include "matforge/cost_table.hpp"
#include "matforge/dfg.hpp"
#include "matforge/scheduler.hpp"

namespace matforge {

// Row-major integer tensor with 16-bit signed wraparound semantics.
struct TensorValue {
  TensorType shape;
  std::vector<int32_t> data;

  static TensorValue zeros(TensorType t) {
    return {t, std::vector<int32_t>(size_t(t.elems()), 0)};
  }
  int32_t at(int r, int c) const { return data[size_t(r) * shape.cols() + c]; }

  bool operator==(const TensorValue&) const = default;
};

using Inputs = std::map<std::string, TensorValue>;

struct NodeInterval {
  int64_t start = 0;
  int64_t end = 0;
};

struct SimReport {
  int64_t total_cycles = 0;
  std::vector<NodeInterval> per_node;  // by node id
  std::map<std::string, TensorValue> outputs;  // by sink name
};

// Shared 256-entry activation tables; codegen emits the same values so the
// simulator and the RTL agree bit for bit. Index = clamp(x,-128,127)+128.
const std::array<int16_t, 256>& tanh_table();
const std::array<int16_t, 256>& sigmoid_table();
const std::array<int16_t, 256>& exp_table();

// Discrete-event execution: a unit starts at the max end cycle of its
// predecessor units, runs for its ground-truth duration, and asserts done.
// Functional results are exact 16-bit integer semantics.
SimReport run(const MatrixDfg& dfg, const PfAssignment& a, const Schedule& schedule,
              const Inputs& inputs, const CostTable& table);

// Independent functional oracle: straight-line topological interpretation
// with dense semantics (sparse ops densified). No timing.
std::map<std::string, TensorValue> reference_eval(const MatrixDfg& dfg,
                                                  const Inputs& inputs);

// Deterministic random inputs for every source lacking literal data.
Inputs random_inputs(const MatrixDfg& dfg, uint64_t seed);

// One whole-design PF=1 run; per-node latency1 from the measured intervals,
// lut1 from the template cost table.
Profile1 profile_pf1(const MatrixDfg& dfg, const CostTable& table,
                     uint64_t seed = 0x5eed);

struct TrainingSpec {
  OpKind kind;
  std::vector<TensorType> dims;
  std::optional<int> nnz;  // SpMV only
};

std::vector<TrainingSample> gen_training_data(const std::vector<TrainingSpec>& specs,
                                              const std::vector<int>& pf_grid,
                                              const CostTable& table);

// Single-operation DFG (sources -> op -> sink) used for training runs.
MatrixDfg build_single_op_dfg(OpKind kind, const std::vector<TensorType>& in_dims,
                              std::optional<int> nnz = std::nullopt);

TensorType infer_out_dim(OpKind kind, const std::vector<TensorType>& in_dims);

nlohmann::json sim_report_to_json(const MatrixDfg& dfg, const SimReport& r);

}  // namespace matforge
