#include <doctest.h>

#include <algorithm>
#include <string>

#include "matforge/frontend.hpp"

using namespace matforge;

namespace {

MatrixDfg compile(const std::string& src) {
  auto ast = parse(src);
  auto symbols = type_check(ast);
  return lower_to_dfg(ast, symbols);
}

int count_kind(const MatrixDfg& dfg, OpKind k) {
  int n = 0;
  for (const auto& node : dfg.nodes)
    if (node.kind == k) ++n;
  return n;
}

}  // namespace

TEST_CASE("parse: single declaration") {
  auto ast = parse("int x");
  REQUIRE(ast.statements.size() == 1);
  const auto& s = ast.statements[0];
  CHECK(s.kind == Stmt::Kind::Decl);
  CHECK(s.name == "x");
  CHECK(s.type == TensorType::scalar());
}

TEST_CASE("parse: matrix add program") {
  auto ast = parse("int[2][2] A; int[2][2] B; int[2][2] C; C = A + B");
  REQUIRE(ast.statements.size() == 4);
  for (int i = 0; i < 3; ++i) {
    CHECK(ast.statements[size_t(i)].kind == Stmt::Kind::Decl);
    CHECK(ast.statements[size_t(i)].type == TensorType::matrix(2, 2));
  }
  const auto& a = ast.statements[3];
  CHECK(a.kind == Stmt::Kind::Assign);
  CHECK(a.name == "C");
  REQUIRE(a.expr != nullptr);
  CHECK(a.expr->kind == Expr::Kind::Add);
  REQUIRE(a.expr->args.size() == 2);
  CHECK(a.expr->args[0]->kind == Expr::Kind::Var);
  CHECK(a.expr->args[0]->name == "A");
  CHECK(a.expr->args[1]->name == "B");
}

TEST_CASE("parse: sparse multiply operator") {
  auto ast = parse(
      "sparse(40) int[16][16] X; int[16] Y; int[16] Z;\n"
      "Z = X |*| Y;");
  const auto& d = ast.statements[0];
  CHECK(d.sparse);
  REQUIRE(d.nnz.has_value());
  CHECK(*d.nnz == 40);
  const auto& a = ast.statements[3];
  CHECK(a.expr->kind == Expr::Kind::SparseMul);
}

TEST_CASE("parse: syntax error carries line and column") {
  try {
    parse("int[2] a;\na = ;");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.loc.line == 2);
    CHECK(std::string(e.what()).find("2:") != std::string::npos);
  }
}

TEST_CASE("parse: unknown token rejected") {
  CHECK_THROWS_AS(parse("int x; x = x @ x;"), ParseError);
}

TEST_CASE("parse: comments and literals") {
  auto ast = parse(
      "// header comment\n"
      "int[2][2] A;\n"
      "A = [[1, 2], [-3, 4]]; // trailing\n");
  REQUIRE(ast.statements.size() == 2);
  const auto& init = ast.statements[1];
  CHECK(init.kind == Stmt::Kind::Init);
  CHECK(init.literal_shape == TensorType::matrix(2, 2));
  CHECK(init.values == std::vector<int32_t>{1, 2, -3, 4});
}

TEST_CASE("type_check: matmul shape rule 2x3 * 3x4 -> 2x4") {
  auto ast = parse("int[2][3] A; int[3][4] B; int[2][4] C; C = A * B;");
  type_check(ast);
  CHECK(ast.statements[3].expr->ty == TensorType::matrix(2, 4));
}

TEST_CASE("type_check: dimension mismatch reports both shapes") {
  auto ast = parse("int[2][3] A; int[2][4] B; int[2][3] C; C = A + B;");
  try {
    type_check(ast);
    FAIL("expected TypeError");
  } catch (const TypeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("int[2][3]") != std::string::npos);
    CHECK(msg.find("int[2][4]") != std::string::npos);
  }
}

TEST_CASE("type_check: sgn on scalar is scalar") {
  auto ast = parse("int x; int r; r = sgn(x);");
  type_check(ast);
  CHECK(ast.statements[2].expr->ty == TensorType::scalar());
}

TEST_CASE("type_check: use before declare") {
  auto ast = parse("int[4] a; a = a + b;");
  CHECK_THROWS_AS(type_check(ast), TypeError);
}

TEST_CASE("type_check: incompatible reassignment") {
  auto ast = parse("int[4] a; int[2][2] m; a = m;");
  CHECK_THROWS_AS(type_check(ast), TypeError);
}

TEST_CASE("lower: C = A + B gives 2 sources, 1 MatAdd, 1 sink") {
  auto dfg = compile("int[2][2] A; int[2][2] B; int[2][2] C; C = A + B;");
  CHECK(dfg.nodes.size() == 4);
  CHECK(count_kind(dfg, OpKind::Source) == 2);
  CHECK(count_kind(dfg, OpKind::MatAdd) == 1);
  CHECK(count_kind(dfg, OpKind::Sink) == 1);
  CHECK(dfg.edges.size() == 3);
}

TEST_CASE("lower: (Z*A)*(Z*B) forms a diamond on Z") {
  auto dfg = compile(
      "int[4][4] Z; int[4][4] A; int[4][4] B; int[4][4] P;\n"
      "P = (Z * A) * (Z * B);");
  CHECK(count_kind(dfg, OpKind::MatMul) == 3);
  // Z fans out to the two inner MatMuls, which join at the outer one.
  NodeId z = -1;
  for (const auto& n : dfg.nodes)
    if (n.kind == OpKind::Source && n.name == "Z") z = n.id;
  REQUIRE(z >= 0);
  std::vector<NodeId> z_consumers;
  for (const auto& e : dfg.edges)
    if (e.producer == z) z_consumers.push_back(e.consumer);
  REQUIRE(z_consumers.size() == 2);
  NodeId outer = -1;
  for (const auto& e : dfg.edges) {
    if (e.producer == z_consumers[0]) {
      for (const auto& e2 : dfg.edges)
        if (e2.producer == z_consumers[1] && e2.consumer == e.consumer)
          outer = e.consumer;
    }
  }
  REQUIRE(outer >= 0);
  CHECK(dfg.nodes[size_t(outer)].kind == OpKind::MatMul);
}

TEST_CASE("lower: sgn becomes a single Sgn node") {
  auto dfg = compile("int x; int r; r = sgn(x);");
  CHECK(count_kind(dfg, OpKind::Sgn) == 1);
  CHECK(count_kind(dfg, OpKind::Source) == 1);
  CHECK(count_kind(dfg, OpKind::Sink) == 1);
}

TEST_CASE("lower: scalar if/else merges through Select") {
  auto dfg = compile(
      "int x; int y; int[4] a; int[4] b; int[4] r;\n"
      "if (x >= y) then { r = a + b; } else { r = a - b; }");
  CHECK(count_kind(dfg, OpKind::Geq) == 1);
  CHECK(count_kind(dfg, OpKind::Select) == 1);
  for (const auto& n : dfg.nodes) {
    if (n.kind != OpKind::Select) continue;
    REQUIRE(n.in_dims.size() == 3);
    CHECK(n.in_dims[0] == TensorType::scalar());
    CHECK(n.out_dim == TensorType::vector(4));
  }
}

TEST_CASE("lower: SSA renaming keeps reassignment acyclic") {
  auto dfg = compile(
      "int[8] q; int[8] y;\n"
      "q = q + y;\n"
      "q = q + y;\n");
  CHECK_NOTHROW(dfg.validate());  // would throw on a cycle
  CHECK(count_kind(dfg, OpKind::MatAdd) == 2);
}

TEST_CASE("lower: sparse matrix carries nnz onto the SpMV node") {
  auto dfg = compile(
      "sparse(40) int[16][16] X; int[16] Y; int[16] Z; Z = X |*| Y;");
  for (const auto& n : dfg.nodes)
    if (n.kind == OpKind::SpMV) {
      REQUIRE(n.nnz.has_value());
      CHECK(*n.nnz == 40);
    }
  CHECK(count_kind(dfg, OpKind::SpMV) == 1);
}

TEST_CASE("lower: node count equals operator applications") {
  auto dfg = compile(
      "int[4][4] Z; int[4][4] A; int[4][4] B; int[4][4] P;\n"
      "P = (Z * A) * (Z * B);");
  int ops = 0;
  for (const auto& n : dfg.nodes)
    if (n.kind != OpKind::Source && n.kind != OpKind::Sink) ++ops;
  CHECK(ops == 3);
}

TEST_CASE("lower: edge shapes match checked types") {
  auto dfg = compile("int[2][3] A; int[3][4] B; int[2][4] C; C = A * B;");
  for (const auto& e : dfg.edges)
    CHECK(e.shape == dfg.nodes[size_t(e.producer)].out_dim);
}

TEST_CASE("pretty-print round trip is a fixpoint") {
  const char* programs[] = {
      "int x;\n",
      "int[2][2] A; int[2][2] B; int[2][2] C; C = A + B;",
      "sparse(40) int[16][16] X; int[16] Y; int[16] Z; Z = X |*| Y;",
      "int[8] a; int[8] b; int[8] c; c = a <*> b; c = tanh(c);",
      "int x; int y; int[4] a; int[4] b; int[4] r;\n"
      "if (x >= y) then { r = a + b; } else { r = a - b; }",
      "int[3] v; v = [1, -2, 3];",
  };
  for (const char* p : programs) {
    std::string once = pretty_print(parse(p));
    std::string twice = pretty_print(parse(once));
    CHECK(once == twice);
  }
}
