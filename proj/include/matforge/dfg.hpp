#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matforge/types.hpp"

namespace matforge {

using NodeId = int;

struct DfgNode {
  NodeId id = -1;
  std::string name;  // variable name for Source/Sink, else derived
  OpKind kind = OpKind::Source;
  std::vector<TensorType> in_dims;
  TensorType out_dim;
  std::optional<int> nnz;                // SpMV matrix operand only
  std::optional<std::vector<int32_t>> init;  // literal-initialized sources

  NodeClass node_class() const { return classify(kind); }
  int pf_bound() const { return max_pf(kind, in_dims, out_dim, nnz); }
};

struct DfgEdge {
  NodeId producer = -1;
  NodeId consumer = -1;
  int slot = 0;  // input index at the consumer
  TensorType shape;
};

// Immutable after construction; ids are dense [0, nodes.size()).
struct MatrixDfg {
  std::vector<DfgNode> nodes;
  std::vector<DfgEdge> edges;

  std::vector<NodeId> sources() const;
  std::vector<NodeId> sinks() const;
  std::vector<NodeId> op_nodes() const;  // everything but Source/Sink

  std::vector<std::vector<int>> out_edges() const;  // node -> edge indices
  std::vector<std::vector<int>> in_edges() const;

  // Throws MatforgeError when malformed (cycle, dangling edge, arity, shape).
  void validate() const;

  std::vector<NodeId> topo_order() const;
};

struct PfAssignment {
  std::vector<int> epf;      // by node id
  std::vector<int> edge_pf;  // by edge index

  static PfAssignment ones(const MatrixDfg& dfg) {
    return {std::vector<int>(dfg.nodes.size(), 1),
            std::vector<int>(dfg.edges.size(), 1)};
  }
  bool operator==(const PfAssignment&) const = default;
};

struct PfViolation {
  std::string what;
  NodeId node = -1;
  int edge = -1;
};

// Edge PF rules: an edge's single pf is both the producer's oPF and the
// consumer's iPF. Linear-time nodes require all incident non-scalar edge
// PFs equal to their execution PF; non-linear-time nodes have shuffle
// logic and impose no relation. Scalar-shaped edges are broadcast wires,
// always pf = 1 and outside the equality rule.
std::vector<PfViolation> pf_violations(const MatrixDfg& dfg, const PfAssignment& a);
inline bool pf_constraints_ok(const MatrixDfg& dfg, const PfAssignment& a) {
  return pf_violations(dfg, a).empty();
}

// Connected components of linear-time nodes joined by non-scalar LT-LT edges.
std::vector<std::vector<NodeId>> lt_clusters(const MatrixDfg& dfg);

struct PathExplosion : MatforgeError {
  using MatforgeError::MatforgeError;
};

inline constexpr int kDefaultPathCap = 10000;

std::vector<std::vector<NodeId>> all_source_sink_paths(const MatrixDfg& dfg,
                                                       int cap = kDefaultPathCap);

struct CriticalPath {
  std::vector<NodeId> path;
  int64_t total_cycles = 0;
};

// Longest path by summed node latency; ties broken toward the
// lexicographically smallest node-id sequence.
CriticalPath critical_path(const MatrixDfg& dfg, const std::vector<int64_t>& latency);

}  // namespace matforge
