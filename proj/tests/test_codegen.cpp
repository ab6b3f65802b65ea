#include <doctest.h>

#include <string>

#include "matforge/codegen.hpp"
#include "matforge/frontend.hpp"
#include "matforge/optimizer.hpp"
#include "matforge/scheduler.hpp"
#include "matforge/simulator.hpp"
#include "matforge/suite.hpp"

using namespace matforge;

namespace {

const TemplateLibrary& library() {
  static const TemplateLibrary lib =
      TemplateLibrary::load(MATFORGE_DEFAULT_TEMPLATES_DIR);
  return lib;
}

MatrixDfg compile(const std::string& src) {
  auto ast = parse(src);
  auto symbols = type_check(ast);
  return lower_to_dfg(ast, symbols);
}

struct Emitted {
  MatrixDfg dfg;
  PfAssignment a;
  Schedule schedule;
  VerilogDesign design;
};

Emitted emit_optimized(MatrixDfg dfg, bool pipelining = true) {
  const auto& lib = library();
  static const CostModelParams params = fit(
      gen_training_data(default_training_specs(), default_pf_grid(), lib.costs),
      lib.costs);
  auto profile = profile_pf1(dfg, lib.costs);
  auto opt = greedy_optimize(dfg, params, profile, {20800, 90},
                             BenefitMetric::LatencyPerLut, lib.costs);
  Emitted e;
  e.a = opt.assignment;
  e.schedule = build_schedule(dfg, e.a, pipelining, lib.costs);
  e.design = emit(dfg, e.a, e.schedule, lib, 16, &params, &profile);
  e.dfg = std::move(dfg);
  return e;
}

}  // namespace

TEST_CASE("template library loads every op stencil") {
  const auto& lib = library();
  CHECK(lib.version == 1);
  CHECK_FALSE(lib.buffer_stencil.empty());
  for (OpKind k :
       {OpKind::MatAdd, OpKind::MatSub, OpKind::ScalarMatMul, OpKind::Hadamard,
        OpKind::Exp, OpKind::ReLU, OpKind::Sigmoid, OpKind::TanH, OpKind::Sgn,
        OpKind::Geq, OpKind::Select, OpKind::MatMul, OpKind::SpMV,
        OpKind::DotProduct, OpKind::OuterProduct, OpKind::ArgMax, OpKind::Sink})
    CHECK(lib.stencils.count(k) == 1);
}

TEST_CASE("emit: simple add design passes the structural check") {
  auto e = emit_optimized(
      compile("int[8][8] A; int[8][8] B; int[8][8] C; C = A + B;"));
  auto rep = structural_check(e.design, e.dfg, e.a);
  for (const auto& v : rep.violations) MESSAGE(v);
  CHECK(rep.ok());
  CHECK(e.design.text.find("MF_MatAdd") != std::string::npos);
  CHECK(e.design.text.find("mf_top") != std::string::npos);
}

TEST_CASE("emit: deterministic byte-identical re-emission") {
  auto dfg = bonsai_dfg(64, 16, 8, 128);
  auto e1 = emit_optimized(dfg);
  auto e2 = emit_optimized(dfg);
  CHECK(e1.design.text == e2.design.text);
}

TEST_CASE("emit: sgn program uses a combinational instance and scalar wires") {
  auto e = emit_optimized(compile("int x; int r; r = sgn(x);"));
  CHECK(structural_check(e.design, e.dfg, e.a).ok());
  for (const auto& b : e.design.buffers)
    CHECK(b.kind == BufferInfo::Kind::ScalarWire);
}

TEST_CASE("emit: fused super-node elides internal buffers") {
  auto e = emit_optimized(lt_chain_dfg(64, 4));
  CHECK(structural_check(e.design, e.dfg, e.a).ok());
  int fused = 0;
  for (const auto& b : e.design.buffers)
    fused += b.kind == BufferInfo::Kind::Fused;
  CHECK(fused == 3);  // the three member-to-member edges
  CHECK(e.design.text.find("mf_fused_") != std::string::npos);
}

TEST_CASE("emit: manifest accounting is exact") {
  auto e = emit_optimized(protonn_dfg(64, 16, 20));
  REQUIRE(e.design.instances.size() == e.dfg.nodes.size());
  int64_t lut_sum = 0, dsp_sum = 0;
  for (const auto& [id, inst] : e.design.instances) {
    lut_sum += inst.lut_table;
    dsp_sum += inst.dsp;
  }
  CHECK(lut_sum == e.design.lut_table_total);
  CHECK(dsp_sum == e.design.dsp_total);
  REQUIRE(e.design.est_usage.has_value());
  CHECK(e.design.est_usage->dsp == e.design.dsp_total);
  auto manifest = manifest_to_json(e.design, e.dfg);
  CHECK(manifest["totals"]["lut"] == e.design.lut_table_total);
  CHECK(manifest["totals"]["dsp"] == e.design.dsp_total);
  CHECK(manifest["instances"].size() == e.dfg.nodes.size());
  CHECK(manifest["buffers"].size() == e.dfg.edges.size());
}

TEST_CASE("emit: missing stencil raises MissingTemplate") {
  auto dfg = compile("int[8] a; int[8] b; int[8] c; c = a + b;");
  TemplateLibrary broken = library();
  broken.stencils.erase(OpKind::MatAdd);
  auto a = PfAssignment::ones(dfg);
  auto s = build_schedule(dfg, a, true, broken.costs);
  CHECK_THROWS_AS(emit(dfg, a, s, broken), MissingTemplate);
}

TEST_CASE("emit: out-of-range parameters rejected") {
  auto dfg = compile("int[8] a; int[8] b; int[8] c; c = a + b;");
  auto a = PfAssignment::ones(dfg);
  auto s = build_schedule(dfg, a, true, library().costs);
  CHECK_THROWS_AS(emit(dfg, a, s, library(), 128), ParameterOutOfRange);
  auto bad = a;
  bad.epf[2] = 1000;  // above the 8-element bound
  CHECK_THROWS_AS(emit(dfg, bad, s, library()), ParameterOutOfRange);
}

TEST_CASE("structural_check: dropped endmodule is caught") {
  auto e = emit_optimized(
      compile("int[8][8] A; int[8][8] B; int[8][8] C; C = A + B;"));
  auto pos = e.design.text.rfind("endmodule");
  REQUIRE(pos != std::string::npos);
  e.design.text.erase(pos);
  CHECK_FALSE(structural_check(e.design, e.dfg, e.a).ok());
}

TEST_CASE("structural_check: unknown port name is caught") {
  auto e = emit_optimized(
      compile("int[8][8] A; int[8][8] B; int[8][8] C; C = A + B;"));
  auto pos = e.design.text.find(".rd0_addr(", e.design.text.find("mf_top"));
  REQUIRE(pos != std::string::npos);
  e.design.text.replace(pos, 10, ".rd0_addrx(");
  CHECK_FALSE(structural_check(e.design, e.dfg, e.a).ok());
}

TEST_CASE("structural_check: PF binding mismatch is caught") {
  auto e = emit_optimized(
      compile("int[8][8] A; int[8][8] B; int[8][8] C; C = A + B;"));
  int pf = 0;
  for (const auto& n : e.dfg.nodes)
    if (n.kind == OpKind::MatAdd) pf = e.a.epf[size_t(n.id)];
  REQUIRE(pf > 1);
  std::string needle = ".PF(" + std::to_string(pf) + ")";
  auto pos = e.design.text.find(needle, e.design.text.find("mf_top"));
  REQUIRE(pos != std::string::npos);
  e.design.text.replace(pos, needle.size(), ".PF(" + std::to_string(pf - 1) + ")");
  CHECK_FALSE(structural_check(e.design, e.dfg, e.a).ok());
}

TEST_CASE("structural_check: double-driven wire is caught") {
  auto e = emit_optimized(
      compile("int[8][8] A; int[8][8] B; int[8][8] C; C = A + B;"));
  auto pos = e.design.text.rfind("endmodule");
  REQUIRE(pos != std::string::npos);
  e.design.text.insert(pos, "  assign done = 1'b0;\n");
  CHECK_FALSE(structural_check(e.design, e.dfg, e.a).ok());
}

TEST_CASE("structural_check: whole suite emits cleanly") {
  for (const auto& c : spmv_sweep()) {
    auto e = emit_optimized(c.dfg);
    auto rep = structural_check(e.design, e.dfg, e.a);
    for (const auto& v : rep.violations) MESSAGE(c.name << ": " << v);
    CHECK(rep.ok());
  }
}
