#include "matforge/cost_table.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

namespace matforge {

namespace {
int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }
}  // namespace

CostTable CostTable::builtin() {
  CostTable t;
  t.c_setup = 4;
  t.d_stage = 2;
  t.c_shuffle = 8;
  auto& m = t.templates;
  //                      dsp  base  per_unit alpha  beta
  m[OpKind::MatAdd] =       {0, 40.0, 1.00, 0.60, 0.40};
  m[OpKind::MatSub] =       {0, 40.0, 1.00, 0.60, 0.40};
  m[OpKind::ScalarMatMul] = {1, 50.0, 1.00, 0.55, 0.45};
  m[OpKind::Hadamard] =     {1, 50.0, 1.00, 0.55, 0.45};
  m[OpKind::Exp] =          {0, 80.0, 1.20, 0.50, 0.50};
  m[OpKind::Sigmoid] =      {0, 80.0, 1.20, 0.50, 0.50};
  m[OpKind::TanH] =         {0, 80.0, 1.20, 0.50, 0.50};
  m[OpKind::ReLU] =         {0, 30.0, 0.80, 0.60, 0.40};
  m[OpKind::Sgn] =          {0, 20.0, 0.50, 0.70, 0.30};
  m[OpKind::Geq] =          {0, 20.0, 0.50, 0.70, 0.30};
  m[OpKind::Select] =       {0, 35.0, 0.90, 0.60, 0.40};
  m[OpKind::MatMul] =       {1, 90.0, 1.00, 0.45, 0.55};
  m[OpKind::DotProduct] =   {1, 70.0, 0.80, 0.50, 0.50};
  m[OpKind::OuterProduct] = {1, 60.0, 0.90, 0.50, 0.50};
  m[OpKind::SpMV] =         {1, 100.0, 0.90, 0.45, 0.55};
  m[OpKind::ArgMax] =       {0, 60.0, 0.80, 0.55, 0.45};
  m[OpKind::Source] =       {0, 10.0, 0.25, 1.00, 0.00};
  m[OpKind::Sink] =         {0, 10.0, 0.25, 1.00, 0.00};
  return t;
}

CostTable CostTable::load(const std::string& costs_json_path) {
  std::ifstream in(costs_json_path);
  if (!in) throw MatforgeError("cannot open cost table: " + costs_json_path);
  nlohmann::json j;
  in >> j;
  CostTable t;
  t.c_setup = j.at("c_setup").get<int>();
  t.d_stage = j.at("d_stage").get<int>();
  t.c_shuffle = j.at("c_shuffle").get<int>();
  for (auto& [name, jt] : j.at("templates").items()) {
    auto kind = op_kind_from_name(name);
    if (!kind) throw MatforgeError("unknown op kind in cost table: " + name);
    Tpl tp;
    tp.dsp_per_pe = jt.at("dsp_per_pe").get<int>();
    tp.lut_base = jt.at("lut_base").get<double>();
    tp.lut_per_unit = jt.at("lut_per_unit").get<double>();
    tp.lut_alpha = jt.at("lut_alpha").get<double>();
    tp.lut_beta = jt.at("lut_beta").get<double>();
    t.templates[*kind] = tp;
  }
  return t;
}

const CostTable::Tpl& CostTable::tpl(OpKind k) const {
  auto it = templates.find(k);
  if (it == templates.end())
    throw MatforgeError("no template for " + std::string(op_kind_name(k)));
  return it->second;
}

double CostTable::work_units(const DfgNode& n) const {
  switch (n.kind) {
    case OpKind::SpMV:
      return double(n.in_dims.at(0).rows() + n.in_dims.at(0).cols());
    case OpKind::DotProduct:
    case OpKind::ArgMax:
      return double(n.in_dims.at(0).elems());
    case OpKind::Sink:
      return double(n.in_dims.empty() ? 1 : n.in_dims.at(0).elems());
    default:
      return double(n.out_dim.elems());
  }
}

int CostTable::lut1(const DfgNode& n) const {
  const Tpl& t = tpl(n.kind);
  return int(std::ceil(t.lut_base + t.lut_per_unit * work_units(n)));
}

int CostTable::lut_at(const DfgNode& n, int pf) const {
  const Tpl& t = tpl(n.kind);
  return int(std::ceil(lut1(n) * (t.lut_alpha + t.lut_beta * pf)));
}

int CostTable::dsp_at(OpKind k, int pf) const { return tpl(k).dsp_per_pe * pf; }

int64_t CostTable::latency_at(const DfgNode& n, int pf) const {
  switch (n.kind) {
    case OpKind::Source:
    case OpKind::Sink:
      return 1;
    case OpKind::MatMul: {
      const auto& a = n.in_dims.at(0);
      int64_t inner = a.rank == 1 ? a.elems() : a.cols();
      return ceil_div(n.out_dim.elems(), pf) * inner + c_setup;
    }
    case OpKind::SpMV:
      return ceil_div(n.nnz.value(), pf) + n.in_dims.at(0).rows() + c_setup;
    case OpKind::DotProduct:
    case OpKind::ArgMax:
      // parallel scan plus linear reduction of the partial results
      return ceil_div(n.in_dims.at(0).elems(), pf) + pf + c_setup;
    case OpKind::OuterProduct:
      return ceil_div(n.out_dim.elems(), pf) + c_setup;
    default:
      // elementwise; scalar versions are combinational
      if (n.out_dim.rank == 0) return 1;
      return ceil_div(n.out_dim.elems(), pf) + c_setup;
  }
}

int64_t CostTable::supernode_latency(int64_t elems, int stages, int pf) const {
  return ceil_div(elems, pf) + int64_t(stages) * d_stage + c_setup;
}

}  // namespace matforge
