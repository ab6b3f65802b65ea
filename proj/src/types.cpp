#include "matforge/types.hpp"

#include <algorithm>

namespace matforge {

namespace {
struct KindName {
  OpKind kind;
  std::string_view name;
};
constexpr KindName kKindNames[] = {
    {OpKind::SpMV, "SpMV"},
    {OpKind::MatAdd, "MatAdd"},
    {OpKind::MatSub, "MatSub"},
    {OpKind::ScalarMatMul, "ScalarMatMul"},
    {OpKind::Hadamard, "Hadamard"},
    {OpKind::DotProduct, "DotProduct"},
    {OpKind::OuterProduct, "OuterProduct"},
    {OpKind::MatMul, "MatMul"},
    {OpKind::Exp, "Exp"},
    {OpKind::ReLU, "ReLU"},
    {OpKind::Sigmoid, "Sigmoid"},
    {OpKind::TanH, "TanH"},
    {OpKind::Sgn, "Sgn"},
    {OpKind::Geq, "Geq"},
    {OpKind::ArgMax, "ArgMax"},
    {OpKind::Select, "Select"},
    {OpKind::Source, "Source"},
    {OpKind::Sink, "Sink"},
};
}  // namespace

std::string_view op_kind_name(OpKind k) {
  for (const auto& kn : kKindNames)
    if (kn.kind == k) return kn.name;
  return "?";
}

std::optional<OpKind> op_kind_from_name(std::string_view name) {
  for (const auto& kn : kKindNames)
    if (kn.name == name) return kn.kind;
  return std::nullopt;
}

bool is_elementwise(OpKind k) {
  switch (k) {
    case OpKind::MatAdd:
    case OpKind::MatSub:
    case OpKind::ScalarMatMul:
    case OpKind::Hadamard:
    case OpKind::Exp:
    case OpKind::ReLU:
    case OpKind::Sigmoid:
    case OpKind::TanH:
    case OpKind::Sgn:
    case OpKind::Geq:
    case OpKind::Select:
      return true;
    default:
      return false;
  }
}

NodeClass classify(OpKind k) {
  if (is_elementwise(k)) return NodeClass::LinearTime;
  return NodeClass::NonLinearTime;
}

int max_pf(OpKind kind, const std::vector<TensorType>& in_dims,
           const TensorType& out_dim, std::optional<int> nnz) {
  (void)nnz;
  switch (kind) {
    case OpKind::Source:
    case OpKind::Sink:
      return 1;
    case OpKind::SpMV:
      // one PE per matrix column at most
      return in_dims.empty() ? 1 : std::max(1, in_dims[0].cols());
    case OpKind::DotProduct:
    case OpKind::ArgMax:
      return in_dims.empty() ? 1 : int(std::max<int64_t>(1, in_dims[0].elems()));
    default:
      // elementwise, MatMul, OuterProduct: bounded by output element count
      return int(std::max<int64_t>(1, out_dim.elems()));
  }
}

}  // namespace matforge
