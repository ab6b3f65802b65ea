#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "matforge/dfg.hpp"
#include "matforge/types.hpp"

namespace matforge {

struct SourceLoc {
  int line = 1;
  int col = 1;
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Expr {
  enum class Kind { Var, Add, Sub, Mul, Geq, Hadamard, SparseMul, Call };
  Kind kind = Kind::Var;
  SourceLoc loc;
  std::string name;  // variable name, or callee for Call
  std::vector<ExprPtr> args;
  TensorType ty;  // filled in by type_check

  ExprPtr clone() const;
};

struct Stmt {
  enum class Kind { Decl, Assign, Init, If };
  Kind kind = Kind::Decl;
  SourceLoc loc;
  std::string name;

  // Decl
  TensorType type;
  bool sparse = false;
  std::optional<int> nnz;

  // Assign / If condition
  ExprPtr expr;

  // Init
  std::vector<int32_t> values;
  TensorType literal_shape;

  // If
  std::vector<Stmt> then_body;
  std::vector<Stmt> else_body;
};

struct Ast {
  std::vector<Stmt> statements;
};

struct ParseError : MatforgeError {
  ParseError(const std::string& msg, SourceLoc l)
      : MatforgeError(std::to_string(l.line) + ":" + std::to_string(l.col) + ": " + msg),
        loc(l) {}
  SourceLoc loc;
};

struct TypeError : MatforgeError {
  TypeError(const std::string& msg, SourceLoc l)
      : MatforgeError(std::to_string(l.line) + ":" + std::to_string(l.col) + ": " + msg),
        loc(l) {}
  SourceLoc loc;
};

Ast parse(const std::string& source_text);
std::string pretty_print(const Ast& ast);

struct SymbolInfo {
  TensorType type;
  bool sparse = false;
  std::optional<int> nnz;
  int buffer = -1;  // unique storage id
};

struct SymbolTable {
  std::map<std::string, SymbolInfo> symbols;
  std::vector<std::string> declared;  // declaration order

  const SymbolInfo& lookup(const std::string& name, SourceLoc loc) const;
};

// Assigns a TensorType to every expression and enforces shape agreement.
SymbolTable type_check(Ast& ast);

MatrixDfg lower_to_dfg(const Ast& ast, const SymbolTable& symbols);

}  // namespace matforge
