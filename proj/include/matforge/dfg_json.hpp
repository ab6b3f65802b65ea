#pragma once

#include <json.hpp>

#include "matforge/dfg.hpp"

namespace matforge {

inline constexpr int kDfgSchemaVersion = 1;

// Profile data (latency1/lut1 per node) and PF assignments ride alongside
// the graph when present. Unknown fields are rejected.
nlohmann::json dfg_to_json(const MatrixDfg& dfg,
                           const std::map<NodeId, std::pair<int64_t, int>>* profile = nullptr,
                           const PfAssignment* pf = nullptr);

struct DfgDocument {
  MatrixDfg dfg;
  std::map<NodeId, std::pair<int64_t, int>> profile;  // empty when absent
  std::optional<PfAssignment> pf;
};

DfgDocument dfg_from_json(const nlohmann::json& j);

}  // namespace matforge
