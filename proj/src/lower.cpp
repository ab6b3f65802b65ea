#include <cctype>
#include <map>

#include "matforge/frontend.hpp"

namespace matforge {

namespace {

// Lowers the checked AST to a MatrixDfg. Reassignments are SSA-renamed:
// the environment maps each variable to the node currently producing its
// value, so reading an old value and writing a new one never forms a cycle.
class Lowerer {
 public:
  Lowerer(const Ast& ast, const SymbolTable& symbols) : ast_(ast), symbols_(symbols) {}

  MatrixDfg run() {
    for (const auto& s : ast_.statements) lower_stmt(s);
    add_sinks();
    dfg_.validate();
    return std::move(dfg_);
  }

 private:
  NodeId add_node(OpKind kind, std::string name, std::vector<NodeId> operands,
                  TensorType out, std::optional<int> nnz = std::nullopt) {
    DfgNode n;
    n.id = NodeId(dfg_.nodes.size());
    n.name = std::move(name);
    n.kind = kind;
    n.out_dim = out;
    n.nnz = nnz;
    for (int slot = 0; slot < int(operands.size()); ++slot) {
      const auto& prod = dfg_.nodes[operands[slot]];
      n.in_dims.push_back(prod.out_dim);
      dfg_.edges.push_back({operands[slot], n.id, slot, prod.out_dim});
    }
    dfg_.nodes.push_back(std::move(n));
    return dfg_.nodes.back().id;
  }

  // One source node per input variable, shared across all reads.
  NodeId source_of(const std::string& name, SourceLoc loc) {
    auto it = sources_.find(name);
    if (it != sources_.end()) return it->second;
    const auto& info = symbols_.lookup(name, loc);
    DfgNode n;
    n.id = NodeId(dfg_.nodes.size());
    n.name = name;
    n.kind = OpKind::Source;
    n.out_dim = info.type;
    n.nnz = info.sparse ? info.nnz : std::nullopt;
    auto lit = literals_.find(name);
    if (lit != literals_.end()) n.init = lit->second;
    dfg_.nodes.push_back(std::move(n));
    sources_[name] = dfg_.nodes.back().id;
    return dfg_.nodes.back().id;
  }

  NodeId current_value(const std::string& name, SourceLoc loc) {
    auto it = env_.find(name);
    if (it != env_.end()) return it->second;
    return source_of(name, loc);
  }

  void lower_stmt(const Stmt& s) {
    switch (s.kind) {
      case Stmt::Kind::Decl:
        break;
      case Stmt::Kind::Init:
        if (sources_.count(s.name) || env_.count(s.name))
          throw TypeError("literal re-initialization of '" + s.name +
                              "' after use is not supported",
                          s.loc);
        literals_[s.name] = s.values;
        break;
      case Stmt::Kind::Assign:
        env_[s.name] = lower_expr(*s.expr);
        break;
      case Stmt::Kind::If:
        lower_if(s);
        break;
    }
  }

  void lower_if(const Stmt& s) {
    NodeId cond = lower_expr(*s.expr);
    auto snapshot = env_;
    for (const auto& t : s.then_body) lower_stmt(t);
    auto then_env = env_;
    env_ = snapshot;
    for (const auto& t : s.else_body) lower_stmt(t);
    auto else_env = env_;
    env_ = snapshot;
    // each variable assigned in either branch merges through a Select;
    // a branch that leaves it untouched contributes the pre-branch value
    std::map<std::string, NodeId> merged;
    auto side_value = [&](const std::map<std::string, NodeId>& side,
                          const std::string& name) {
      auto it = side.find(name);
      if (it != side.end()) return it->second;
      return current_value(name, s.loc);
    };
    for (const auto* side : {&then_env, &else_env}) {
      for (const auto& [name, val] : *side) {
        if (merged.count(name)) continue;
        NodeId tv = side_value(then_env, name);
        NodeId ev = side_value(else_env, name);
        if (tv == ev) {
          merged[name] = tv;
          continue;
        }
        TensorType ty = dfg_.nodes[tv].out_dim;
        merged[name] = add_node(OpKind::Select, fresh("select"), {cond, tv, ev}, ty);
      }
    }
    for (const auto& [name, val] : merged) env_[name] = val;
  }

  NodeId lower_expr(const Expr& e) {
    switch (e.kind) {
      case Expr::Kind::Var:
        return current_value(e.name, e.loc);
      case Expr::Kind::Add:
        return lower_binary(OpKind::MatAdd, e);
      case Expr::Kind::Sub:
        return lower_binary(OpKind::MatSub, e);
      case Expr::Kind::Hadamard:
        return lower_binary(OpKind::Hadamard, e);
      case Expr::Kind::Geq:
        return lower_binary(OpKind::Geq, e);
      case Expr::Kind::Mul: {
        const auto& a = e.args[0]->ty;
        const auto& b = e.args[1]->ty;
        if (a.rank == 0 || b.rank == 0) {
          // scalar operand goes in slot 0
          NodeId sc = lower_expr(a.rank == 0 ? *e.args[0] : *e.args[1]);
          NodeId tn = lower_expr(a.rank == 0 ? *e.args[1] : *e.args[0]);
          return add_node(OpKind::ScalarMatMul, fresh("smul"), {sc, tn}, e.ty);
        }
        return lower_binary(OpKind::MatMul, e);
      }
      case Expr::Kind::SparseMul: {
        NodeId m = lower_expr(*e.args[0]);
        NodeId v = lower_expr(*e.args[1]);
        auto nnz = dfg_.nodes[m].nnz;
        if (!nnz) nnz = int(e.args[0]->ty.elems());
        return add_node(OpKind::SpMV, fresh("spmv"), {m, v}, e.ty, nnz);
      }
      case Expr::Kind::Call: {
        OpKind k;
        if (e.name == "sgn") k = OpKind::Sgn;
        else if (e.name == "tanh") k = OpKind::TanH;
        else if (e.name == "exp") k = OpKind::Exp;
        else if (e.name == "relu") k = OpKind::ReLU;
        else if (e.name == "sigmoid") k = OpKind::Sigmoid;
        else if (e.name == "argmax") k = OpKind::ArgMax;
        else if (e.name == "dot") k = OpKind::DotProduct;
        else if (e.name == "outer") k = OpKind::OuterProduct;
        else throw TypeError("unsupported construct '" + e.name + "'", e.loc);
        std::vector<NodeId> ops;
        for (const auto& a : e.args) ops.push_back(lower_expr(*a));
        return add_node(k, fresh(e.name), std::move(ops), e.ty);
      }
    }
    throw TypeError("unsupported expression", e.loc);
  }

  NodeId lower_binary(OpKind k, const Expr& e) {
    NodeId a = lower_expr(*e.args[0]);
    NodeId b = lower_expr(*e.args[1]);
    std::string base(op_kind_name(k));
    for (auto& c : base) c = char(std::tolower(static_cast<unsigned char>(c)));
    return add_node(k, fresh(base), {a, b}, e.ty);
  }

  std::string fresh(const std::string& base) {
    return base + "_" + std::to_string(fresh_counter_++);
  }

  void add_sinks() {
    std::vector<int> fanout(dfg_.nodes.size(), 0);
    for (const auto& e : dfg_.edges) ++fanout[e.producer];
    for (const auto& name : symbols_.declared) {
      auto it = env_.find(name);
      if (it == env_.end()) continue;
      const auto& node = dfg_.nodes[it->second];
      if (fanout[node.id] > 0) continue;
      if (node.kind == OpKind::Source && node.name == name) continue;
      add_node(OpKind::Sink, name, {node.id}, node.out_dim);
    }
    // dead intermediates (values overwritten before use) still drain somewhere
    fanout.assign(dfg_.nodes.size(), 0);
    for (const auto& e : dfg_.edges) ++fanout[e.producer];
    for (NodeId id = 0; id < NodeId(fanout.size()); ++id) {
      const auto& node = dfg_.nodes[id];
      if (fanout[id] == 0 && node.kind != OpKind::Sink && node.kind != OpKind::Source)
        add_node(OpKind::Sink, node.name, {id}, node.out_dim);
    }
  }

  const Ast& ast_;
  const SymbolTable& symbols_;
  MatrixDfg dfg_;
  std::map<std::string, NodeId> env_;      // assigned SSA values
  std::map<std::string, NodeId> sources_;  // input variable sources
  std::map<std::string, std::vector<int32_t>> literals_;
  int fresh_counter_ = 0;
};

}  // namespace

MatrixDfg lower_to_dfg(const Ast& ast, const SymbolTable& symbols) {
  Lowerer l(ast, symbols);
  return l.run();
}

}  // namespace matforge
