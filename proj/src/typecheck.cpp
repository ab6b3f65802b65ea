#include "matforge/frontend.hpp"

namespace matforge {

namespace {

class Checker {
 public:
  SymbolTable run(Ast& ast) {
    check_body(ast.statements);
    return std::move(table_);
  }

 private:
  void check_body(std::vector<Stmt>& body) {
    for (auto& s : body) check_stmt(s);
  }

  void check_stmt(Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Decl: {
        if (table_.symbols.count(s.name))
          throw TypeError("redeclaration of '" + s.name + "'", s.loc);
        if (s.sparse && s.type.rank != 2)
          throw TypeError("sparse attribute requires a matrix type", s.loc);
        if (s.nnz && *s.nnz > s.type.elems())
          throw TypeError("nnz exceeds matrix element count", s.loc);
        SymbolInfo info;
        info.type = s.type;
        info.sparse = s.sparse;
        info.nnz = s.nnz;
        info.buffer = next_buffer_++;
        table_.symbols.emplace(s.name, info);
        table_.declared.push_back(s.name);
        break;
      }
      case Stmt::Kind::Init: {
        auto& info = lookup_mut(s.name, s.loc);
        if (!(info.type == s.literal_shape))
          throw TypeError("literal shape " + s.literal_shape.str() +
                              " does not match declared " + info.type.str() +
                              " for '" + s.name + "'",
                          s.loc);
        if (info.sparse) {
          int nz = 0;
          for (auto v : s.values) nz += v != 0;
          if (info.nnz && nz > *info.nnz)
            throw TypeError("literal has more nonzeros than declared nnz", s.loc);
          if (!info.nnz) info.nnz = nz;
        }
        break;
      }
      case Stmt::Kind::Assign: {
        auto& info = lookup_mut(s.name, s.loc);
        TensorType t = check_expr(*s.expr);
        if (!(t == info.type))
          throw TypeError("cannot assign " + t.str() + " to '" + s.name + "' of type " +
                              info.type.str(),
                          s.loc);
        break;
      }
      case Stmt::Kind::If: {
        TensorType c = check_expr(*s.expr);
        if (c.rank != 0)
          throw TypeError("condition must be scalar, got " + c.str(), s.loc);
        check_body(s.then_body);
        check_body(s.else_body);
        break;
      }
    }
  }

  SymbolInfo& lookup_mut(const std::string& name, SourceLoc loc) {
    auto it = table_.symbols.find(name);
    if (it == table_.symbols.end())
      throw TypeError("use of undeclared variable '" + name + "'", loc);
    return it->second;
  }

  TensorType check_expr(Expr& e) {
    e.ty = infer(e);
    return e.ty;
  }

  TensorType infer(Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Var:
        return lookup_mut(e.name, e.loc).type;
      case Expr::Kind::Add:
      case Expr::Kind::Sub:
      case Expr::Kind::Hadamard: {
        TensorType a = check_expr(*e.args[0]);
        TensorType b = check_expr(*e.args[1]);
        if (!(a == b))
          throw TypeError("shape mismatch: " + a.str() + " vs " + b.str(), e.loc);
        return a;
      }
      case Expr::Kind::Geq: {
        TensorType a = check_expr(*e.args[0]);
        TensorType b = check_expr(*e.args[1]);
        if (a.rank != 0 || b.rank != 0)
          throw TypeError(">= requires scalars, got " + a.str() + " and " + b.str(),
                          e.loc);
        return TensorType::scalar();
      }
      case Expr::Kind::Mul:
        return infer_mul(e);
      case Expr::Kind::SparseMul: {
        TensorType a = check_expr(*e.args[0]);
        TensorType b = check_expr(*e.args[1]);
        if (e.args[0]->kind != Expr::Kind::Var ||
            !lookup_mut(e.args[0]->name, e.loc).sparse)
          throw TypeError("left operand of |*| must be a sparse matrix variable",
                          e.loc);
        if (a.rank != 2 || b.rank != 1 || a.cols() != b.rows())
          throw TypeError("|*| requires matrix x vector with matching inner dim: " +
                              a.str() + " vs " + b.str(),
                          e.loc);
        return TensorType::vector(a.rows());
      }
      case Expr::Kind::Call:
        return infer_call(e);
    }
    throw TypeError("unreachable expression kind", e.loc);
  }

  TensorType infer_mul(Expr& e) {
    TensorType a = check_expr(*e.args[0]);
    TensorType b = check_expr(*e.args[1]);
    if (a.rank == 0 || b.rank == 0) return a.rank == 0 ? b : a;  // scalar scaling
    // matrix/vector product; vectors act as 1xN or Nx1 by position
    int ar = a.rank == 1 ? 1 : a.rows();
    int ac = a.rank == 1 ? a.rows() : a.cols();
    int br = b.rank == 1 ? b.rows() : b.rows();
    int bc = b.rank == 1 ? 1 : b.cols();
    if (a.rank == 1 && b.rank == 1)
      throw TypeError("vector * vector is ambiguous; use dot() or outer()", e.loc);
    if (ac != br)
      throw TypeError("inner dimension mismatch: " + a.str() + " * " + b.str(), e.loc);
    if (ar == 1 && a.rank == 1) return TensorType::vector(bc);  // row-vec * mat
    if (bc == 1 && b.rank == 1) return TensorType::vector(ar);  // mat * col-vec
    return TensorType::matrix(ar, bc);
  }

  TensorType infer_call(Expr& e) {
    auto arity = [&](size_t n) {
      if (e.args.size() != n)
        throw TypeError(e.name + " expects " + std::to_string(n) + " argument(s)",
                        e.loc);
    };
    if (e.name == "sgn") {
      arity(1);
      TensorType a = check_expr(*e.args[0]);
      if (a.rank != 0) throw TypeError("sgn requires a scalar, got " + a.str(), e.loc);
      return TensorType::scalar();
    }
    if (e.name == "tanh" || e.name == "exp" || e.name == "relu" ||
        e.name == "sigmoid") {
      arity(1);
      return check_expr(*e.args[0]);  // elementwise
    }
    if (e.name == "argmax") {
      arity(1);
      TensorType a = check_expr(*e.args[0]);
      if (a.rank != 1)
        throw TypeError("argmax requires a vector, got " + a.str(), e.loc);
      return TensorType::scalar();
    }
    if (e.name == "dot") {
      arity(2);
      TensorType a = check_expr(*e.args[0]);
      TensorType b = check_expr(*e.args[1]);
      if (a.rank != 1 || !(a == b))
        throw TypeError("dot requires two equal-length vectors: " + a.str() + " vs " +
                            b.str(),
                        e.loc);
      return TensorType::scalar();
    }
    if (e.name == "outer") {
      arity(2);
      TensorType a = check_expr(*e.args[0]);
      TensorType b = check_expr(*e.args[1]);
      if (a.rank != 1 || b.rank != 1)
        throw TypeError("outer requires two vectors", e.loc);
      return TensorType::matrix(a.rows(), b.rows());
    }
    throw TypeError("unknown function '" + e.name + "'", e.loc);
  }

  SymbolTable table_;
  int next_buffer_ = 0;
};

}  // namespace

const SymbolInfo& SymbolTable::lookup(const std::string& name, SourceLoc loc) const {
  auto it = symbols.find(name);
  if (it == symbols.end())
    throw TypeError("use of undeclared variable '" + name + "'", loc);
  return it->second;
}

SymbolTable type_check(Ast& ast) {
  Checker c;
  return c.run(ast);
}

}  // namespace matforge
