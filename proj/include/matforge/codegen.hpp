#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "matforge/cost_model.hpp"
#include "matforge/cost_table.hpp"
#include "matforge/dfg.hpp"
#include "matforge/optimizer.hpp"
#include "matforge/scheduler.hpp"

namespace matforge {

// Stencil library: one Verilog module text per op kind plus the banked
// buffer, with {{NAME}} holes, versioned together with the cost table.
struct TemplateLibrary {
  int version = 1;
  CostTable costs;
  std::map<OpKind, std::string> stencils;
  std::string buffer_stencil;

  static TemplateLibrary load(const std::string& dir);
};

struct MissingTemplate : MatforgeError {
  using MatforgeError::MatforgeError;
};
struct ParameterOutOfRange : MatforgeError {
  using MatforgeError::MatforgeError;
};

struct InstanceInfo {
  std::string module;
  std::string instance;
  std::map<std::string, int64_t> params;
  int lut_table = 0;  // cost-table LUT lookup at the bound PF
  int dsp = 0;
};

struct BufferInfo {
  int edge = -1;
  std::string instance;  // empty when fused or scalar wire
  int banks = 1;
  int depth = 1;
  enum class Kind { Buffer, Fused, ScalarWire } kind = Kind::Buffer;
};

struct VerilogDesign {
  std::string text;
  std::map<NodeId, InstanceInfo> instances;
  std::vector<BufferInfo> buffers;  // one entry per DFG edge
  int64_t lut_table_total = 0;      // sum of cost-table lookups
  int64_t dsp_total = 0;
  std::optional<Usage> est_usage;   // optimizer-consistent accounting
  int library_version = 1;
};

// Deterministic emission of the scheduled, PF-annotated design. When the
// cost model and profile are supplied the manifest also carries the
// optimizer's usage figures (same formula, exact match).
VerilogDesign emit(const MatrixDfg& dfg, const PfAssignment& a,
                   const Schedule& schedule, const TemplateLibrary& lib,
                   int width = 16, const CostModelParams* params = nullptr,
                   const Profile1* profile1 = nullptr);

struct StructuralReport {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

// Lightweight structural verification of the emitted text: balanced
// module/endmodule, declared-before-use wires, instantiation port names
// against module definitions, one driver per wire, and PF parameter
// bindings against the assignment.
StructuralReport structural_check(const VerilogDesign& design, const MatrixDfg& dfg,
                                  const PfAssignment& a);

nlohmann::json manifest_to_json(const VerilogDesign& design, const MatrixDfg& dfg);

}  // namespace matforge
