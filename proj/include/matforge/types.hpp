#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace matforge {

// Shape of a value flowing through the graph: scalar, vector(n) or matrix(r,c).
struct TensorType {
  int rank = 0;
  std::array<int, 2> dims{1, 1};  // rows, cols; unused dims stay 1

  static TensorType scalar() { return {0, {1, 1}}; }
  static TensorType vector(int n) { return {1, {n, 1}}; }
  static TensorType matrix(int r, int c) { return {2, {r, c}}; }

  int rows() const { return dims[0]; }
  int cols() const { return dims[1]; }
  int64_t elems() const { return int64_t(dims[0]) * dims[1]; }

  bool operator==(const TensorType&) const = default;

  std::string str() const {
    switch (rank) {
      case 0: return "int";
      case 1: return "int[" + std::to_string(dims[0]) + "]";
      default:
        return "int[" + std::to_string(dims[0]) + "][" + std::to_string(dims[1]) + "]";
    }
  }
};

enum class OpKind {
  SpMV,
  MatAdd,
  MatSub,
  ScalarMatMul,
  Hadamard,
  DotProduct,
  OuterProduct,
  MatMul,
  Exp,
  ReLU,
  Sigmoid,
  TanH,
  Sgn,
  Geq,
  ArgMax,
  Select,
  Source,
  Sink,
};

enum class NodeClass { LinearTime, NonLinearTime };

std::string_view op_kind_name(OpKind k);
std::optional<OpKind> op_kind_from_name(std::string_view name);

// Linear-time ops stream one output element per PF-wide step; non-linear-time
// ops need a reduction or non-streaming access pattern, so shuffle logic
// decouples their edge PFs from the execution PF. Source/Sink are boundary
// pseudo-nodes and are treated like non-linear-time (no edge constraints).
NodeClass classify(OpKind k);

bool is_elementwise(OpKind k);

// Largest execution PF the template for `kind` supports at these dimensions.
int max_pf(OpKind kind, const std::vector<TensorType>& in_dims,
           const TensorType& out_dim, std::optional<int> nnz = std::nullopt);

struct MatforgeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace matforge
