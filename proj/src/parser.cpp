#include <cctype>
#include <sstream>

#include "matforge/frontend.hpp"

namespace matforge {

ExprPtr Expr::clone() const {
  auto e = std::make_unique<Expr>();
  e->kind = kind;
  e->loc = loc;
  e->name = name;
  e->ty = ty;
  for (const auto& a : args) e->args.push_back(a->clone());
  return e;
}

namespace {

enum class Tok {
  Ident,
  Number,
  KwInt,
  KwSparse,
  KwIf,
  KwThen,
  KwElse,
  Plus,
  Minus,
  Star,
  Geq,
  HadamardOp,  // <*>
  SparseOp,    // |*|
  Assign,
  Semi,
  Comma,
  LParen,
  RParen,
  LBracket,
  RBracket,
  LBrace,
  RBrace,
  End,
};

struct Token {
  Tok tok;
  std::string text;
  int64_t number = 0;
  SourceLoc loc;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    for (;;) {
      skip_ws();
      SourceLoc loc{line_, col_};
      if (pos_ >= src_.size()) {
        out.push_back({Tok::End, "", 0, loc});
        return out;
      }
      char c = src_[pos_];
      if (std::isalpha(uc(c)) || c == '_') {
        std::string id;
        while (pos_ < src_.size() && (std::isalnum(uc(src_[pos_])) || src_[pos_] == '_'))
          id += advance();
        Tok t = Tok::Ident;
        if (id == "int") t = Tok::KwInt;
        else if (id == "sparse") t = Tok::KwSparse;
        else if (id == "if") t = Tok::KwIf;
        else if (id == "then") t = Tok::KwThen;
        else if (id == "else") t = Tok::KwElse;
        out.push_back({t, id, 0, loc});
      } else if (std::isdigit(uc(c))) {
        std::string num;
        while (pos_ < src_.size() && std::isdigit(uc(src_[pos_]))) num += advance();
        out.push_back({Tok::Number, num, std::stoll(num), loc});
      } else if (c == '<' && peek(1) == '*' && peek(2) == '>') {
        advance(); advance(); advance();
        out.push_back({Tok::HadamardOp, "<*>", 0, loc});
      } else if (c == '|' && peek(1) == '*' && peek(2) == '|') {
        advance(); advance(); advance();
        out.push_back({Tok::SparseOp, "|*|", 0, loc});
      } else if (c == '>' && peek(1) == '=') {
        advance(); advance();
        out.push_back({Tok::Geq, ">=", 0, loc});
      } else {
        advance();
        switch (c) {
          case '+': out.push_back({Tok::Plus, "+", 0, loc}); break;
          case '-': out.push_back({Tok::Minus, "-", 0, loc}); break;
          case '*': out.push_back({Tok::Star, "*", 0, loc}); break;
          case '=': out.push_back({Tok::Assign, "=", 0, loc}); break;
          case ';': out.push_back({Tok::Semi, ";", 0, loc}); break;
          case ',': out.push_back({Tok::Comma, ",", 0, loc}); break;
          case '(': out.push_back({Tok::LParen, "(", 0, loc}); break;
          case ')': out.push_back({Tok::RParen, ")", 0, loc}); break;
          case '[': out.push_back({Tok::LBracket, "[", 0, loc}); break;
          case ']': out.push_back({Tok::RBracket, "]", 0, loc}); break;
          case '{': out.push_back({Tok::LBrace, "{", 0, loc}); break;
          case '}': out.push_back({Tok::RBrace, "}", 0, loc}); break;
          default:
            throw ParseError(std::string("unknown token '") + c + "'", loc);
        }
      }
    }
  }

 private:
  static int uc(char c) { return static_cast<unsigned char>(c); }
  char peek(int off) const {
    return pos_ + off < src_.size() ? src_[pos_ + off] : '\0';
  }
  char advance() {
    char c = src_[pos_++];
    if (c == '\n') { ++line_; col_ = 1; } else { ++col_; }
    return c;
  }
  void skip_ws() {
    for (;;) {
      while (pos_ < src_.size() && std::isspace(uc(src_[pos_]))) advance();
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
      } else {
        return;
      }
    }
  }

  const std::string& src_;
  size_t pos_ = 0;
  int line_ = 1, col_ = 1;
};

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  Ast run() {
    Ast ast;
    while (cur().tok != Tok::End) ast.statements.push_back(statement());
    return ast;
  }

 private:
  const Token& cur() const { return toks_[pos_]; }
  const Token& peek(int off = 1) const {
    return toks_[std::min(pos_ + off, toks_.size() - 1)];
  }
  Token eat(Tok t, const std::string& what) {
    if (cur().tok != t)
      throw ParseError("expected " + what + ", got '" + cur().text + "'", cur().loc);
    return toks_[pos_++];
  }
  bool accept(Tok t) {
    if (cur().tok == t) { ++pos_; return true; }
    return false;
  }

  // ';' separates statements; the last one before end-of-input or '}' may
  // omit it.
  void terminator() {
    if (accept(Tok::Semi)) return;
    if (cur().tok == Tok::End || cur().tok == Tok::RBrace) return;
    throw ParseError("expected ';', got '" + cur().text + "'", cur().loc);
  }

  Stmt statement() {
    if (cur().tok == Tok::KwIf) return if_stmt();
    Stmt s;
    s.loc = cur().loc;
    if (cur().tok == Tok::KwSparse || cur().tok == Tok::KwInt) {
      s.kind = Stmt::Kind::Decl;
      if (accept(Tok::KwSparse)) {
        s.sparse = true;
        if (accept(Tok::LParen)) {
          s.nnz = int(eat(Tok::Number, "nnz count").number);
          eat(Tok::RParen, "')'");
        }
      }
      s.type = type_spec();
      s.name = eat(Tok::Ident, "identifier").text;
      terminator();
      return s;
    }
    // assignment or literal init
    s.name = eat(Tok::Ident, "identifier").text;
    eat(Tok::Assign, "'='");
    if (cur().tok == Tok::Number || cur().tok == Tok::LBracket ||
        (cur().tok == Tok::Minus && peek().tok == Tok::Number)) {
      s.kind = Stmt::Kind::Init;
      literal(s);
    } else {
      s.kind = Stmt::Kind::Assign;
      s.expr = expression();
    }
    terminator();
    return s;
  }

  Stmt if_stmt() {
    Stmt s;
    s.kind = Stmt::Kind::If;
    s.loc = cur().loc;
    eat(Tok::KwIf, "'if'");
    eat(Tok::LParen, "'('");
    s.expr = expression();
    eat(Tok::RParen, "')'");
    eat(Tok::KwThen, "'then'");
    s.then_body = block();
    eat(Tok::KwElse, "'else'");
    s.else_body = block();
    return s;
  }

  std::vector<Stmt> block() {
    std::vector<Stmt> body;
    if (accept(Tok::LBrace)) {
      while (cur().tok != Tok::RBrace) body.push_back(statement());
      eat(Tok::RBrace, "'}'");
    } else {
      body.push_back(statement());
    }
    return body;
  }

  TensorType type_spec() {
    eat(Tok::KwInt, "'int'");
    if (!accept(Tok::LBracket)) return TensorType::scalar();
    int n1 = int(eat(Tok::Number, "dimension").number);
    eat(Tok::RBracket, "']'");
    if (!accept(Tok::LBracket)) return TensorType::vector(n1);
    int n2 = int(eat(Tok::Number, "dimension").number);
    eat(Tok::RBracket, "']'");
    return TensorType::matrix(n1, n2);
  }

  int32_t signed_number() {
    bool neg = accept(Tok::Minus);
    auto n = eat(Tok::Number, "number").number;
    return int32_t(neg ? -n : n);
  }

  void literal(Stmt& s) {
    if (cur().tok != Tok::LBracket) {
      s.values.push_back(signed_number());
      s.literal_shape = TensorType::scalar();
      return;
    }
    eat(Tok::LBracket, "'['");
    if (cur().tok == Tok::LBracket) {
      // matrix [[..],[..]]
      int rows = 0, cols = -1;
      do {
        eat(Tok::LBracket, "'['");
        int c = 0;
        do {
          s.values.push_back(signed_number());
          ++c;
        } while (accept(Tok::Comma));
        eat(Tok::RBracket, "']'");
        if (cols < 0) cols = c;
        if (c != cols)
          throw ParseError("ragged matrix literal", s.loc);
        ++rows;
      } while (accept(Tok::Comma));
      eat(Tok::RBracket, "']'");
      s.literal_shape = TensorType::matrix(rows, cols);
    } else {
      int n = 0;
      do {
        s.values.push_back(signed_number());
        ++n;
      } while (accept(Tok::Comma));
      eat(Tok::RBracket, "']'");
      s.literal_shape = TensorType::vector(n);
    }
  }

  ExprPtr expression() { return comparison(); }

  ExprPtr binary(Expr::Kind k, ExprPtr lhs, ExprPtr rhs, SourceLoc loc) {
    auto e = std::make_unique<Expr>();
    e->kind = k;
    e->loc = loc;
    e->args.push_back(std::move(lhs));
    e->args.push_back(std::move(rhs));
    return e;
  }

  ExprPtr comparison() {
    auto lhs = additive();
    while (cur().tok == Tok::Geq) {
      auto loc = cur().loc;
      ++pos_;
      lhs = binary(Expr::Kind::Geq, std::move(lhs), additive(), loc);
    }
    return lhs;
  }

  ExprPtr additive() {
    auto lhs = multiplicative();
    for (;;) {
      auto loc = cur().loc;
      if (accept(Tok::Plus))
        lhs = binary(Expr::Kind::Add, std::move(lhs), multiplicative(), loc);
      else if (accept(Tok::Minus))
        lhs = binary(Expr::Kind::Sub, std::move(lhs), multiplicative(), loc);
      else
        return lhs;
    }
  }

  ExprPtr multiplicative() {
    auto lhs = primary();
    for (;;) {
      auto loc = cur().loc;
      if (accept(Tok::Star))
        lhs = binary(Expr::Kind::Mul, std::move(lhs), primary(), loc);
      else if (accept(Tok::HadamardOp))
        lhs = binary(Expr::Kind::Hadamard, std::move(lhs), primary(), loc);
      else if (accept(Tok::SparseOp))
        lhs = binary(Expr::Kind::SparseMul, std::move(lhs), primary(), loc);
      else
        return lhs;
    }
  }

  ExprPtr primary() {
    if (accept(Tok::LParen)) {
      auto e = expression();
      eat(Tok::RParen, "')'");
      return e;
    }
    auto tok = eat(Tok::Ident, "expression");
    if (cur().tok == Tok::LParen) {
      // builtin call: sgn, tanh, exp, relu, sigmoid, argmax, dot, outer
      auto e = std::make_unique<Expr>();
      e->kind = Expr::Kind::Call;
      e->loc = tok.loc;
      e->name = tok.text;
      eat(Tok::LParen, "'('");
      if (cur().tok != Tok::RParen) {
        do {
          e->args.push_back(expression());
        } while (accept(Tok::Comma));
      }
      eat(Tok::RParen, "')'");
      return e;
    }
    auto e = std::make_unique<Expr>();
    e->kind = Expr::Kind::Var;
    e->loc = tok.loc;
    e->name = tok.text;
    return e;
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

void print_expr(std::ostream& os, const Expr& e);

void print_operand(std::ostream& os, const Expr& e) {
  bool atom = e.kind == Expr::Kind::Var || e.kind == Expr::Kind::Call;
  if (!atom) os << "(";
  print_expr(os, e);
  if (!atom) os << ")";
}

void print_expr(std::ostream& os, const Expr& e) {
  switch (e.kind) {
    case Expr::Kind::Var: os << e.name; return;
    case Expr::Kind::Call: {
      os << e.name << "(";
      for (size_t i = 0; i < e.args.size(); ++i) {
        if (i) os << ", ";
        print_expr(os, *e.args[i]);
      }
      os << ")";
      return;
    }
    default: break;
  }
  const char* op = "+";
  switch (e.kind) {
    case Expr::Kind::Add: op = "+"; break;
    case Expr::Kind::Sub: op = "-"; break;
    case Expr::Kind::Mul: op = "*"; break;
    case Expr::Kind::Geq: op = ">="; break;
    case Expr::Kind::Hadamard: op = "<*>"; break;
    case Expr::Kind::SparseMul: op = "|*|"; break;
    default: break;
  }
  print_operand(os, *e.args[0]);
  os << " " << op << " ";
  print_operand(os, *e.args[1]);
}

void print_stmt(std::ostream& os, const Stmt& s, int indent) {
  std::string pad(indent, ' ');
  switch (s.kind) {
    case Stmt::Kind::Decl:
      os << pad;
      if (s.sparse) {
        os << "sparse";
        if (s.nnz) os << "(" << *s.nnz << ")";
        os << " ";
      }
      os << s.type.str() << " " << s.name << ";\n";
      break;
    case Stmt::Kind::Assign:
      os << pad << s.name << " = ";
      print_expr(os, *s.expr);
      os << ";\n";
      break;
    case Stmt::Kind::Init: {
      os << pad << s.name << " = ";
      const auto& v = s.values;
      if (s.literal_shape.rank == 0) {
        os << v[0];
      } else if (s.literal_shape.rank == 1) {
        os << "[";
        for (size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
        os << "]";
      } else {
        os << "[";
        int cols = s.literal_shape.cols();
        for (int r = 0; r < s.literal_shape.rows(); ++r) {
          if (r) os << ", ";
          os << "[";
          for (int c = 0; c < cols; ++c)
            os << (c ? ", " : "") << v[size_t(r) * cols + c];
          os << "]";
        }
        os << "]";
      }
      os << ";\n";
      break;
    }
    case Stmt::Kind::If:
      os << pad << "if (";
      print_expr(os, *s.expr);
      os << ") then {\n";
      for (const auto& t : s.then_body) print_stmt(os, t, indent + 2);
      os << pad << "} else {\n";
      for (const auto& t : s.else_body) print_stmt(os, t, indent + 2);
      os << pad << "}\n";
      break;
  }
}

}  // namespace

Ast parse(const std::string& source_text) {
  Lexer lex(source_text);
  Parser p(lex.run());
  return p.run();
}

std::string pretty_print(const Ast& ast) {
  std::ostringstream os;
  for (const auto& s : ast.statements) print_stmt(os, s, 0);
  return os.str();
}

}  // namespace matforge
