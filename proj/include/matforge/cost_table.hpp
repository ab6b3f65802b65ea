#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "matforge/dfg.hpp"

namespace matforge {

// Per-operation template descriptors: DSPs per PE, the LUT sizing curve,
// and the cycle-count formulas the templates realize. This table is the
// ground truth the regression models are trained against; the simulator,
// the optimizer's resource accounting, and the codegen manifest all read
// from the same instance.
struct CostTable {
  struct Tpl {
    int dsp_per_pe = 0;
    double lut_base = 0;      // LUT[1] = ceil(lut_base + lut_per_unit * work)
    double lut_per_unit = 0;
    double lut_alpha = 1.0;   // LUT[pf] = ceil(LUT[1] * (alpha + beta*pf))
    double lut_beta = 0.0;

    bool operator==(const Tpl&) const = default;
  };

  int c_setup = 4;    // fixed start-up cycles per template activation
  int d_stage = 2;    // register depth per pipeline stage in fused chains
  int c_shuffle = 8;  // LUTs per unit of edge PF on a shuffle interface
  std::map<OpKind, Tpl> templates;

  static CostTable builtin();
  static CostTable load(const std::string& costs_json_path);

  const Tpl& tpl(OpKind k) const;

  // Sizing unit for LUT[1]: output elements for streaming ops, vector
  // length for reductions, rows+cols for SpMV.
  double work_units(const DfgNode& n) const;

  int lut1(const DfgNode& n) const;
  int lut_at(const DfgNode& n, int pf) const;
  int dsp_at(OpKind k, int pf) const;

  // Ground-truth execution cycles of one node at the given PF.
  int64_t latency_at(const DfgNode& n, int pf) const;

  // Fused linear-time chain: k stages streaming E elements at PF p.
  int64_t supernode_latency(int64_t elems, int stages, int pf) const;

  bool operator==(const CostTable&) const = default;
};

}  // namespace matforge
