#include "matforge/codegen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "matforge/simulator.hpp"

namespace matforge {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MatforgeError("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Replaces {{KEY}} holes; keys are uppercase identifiers only, so Verilog
// replication braces pass through untouched.
std::string substitute(const std::string& text,
                       const std::map<std::string, std::string>& holes) {
  static const std::regex hole(R"(\{\{([A-Z_]+)\}\})");
  std::string out;
  auto begin = std::sregex_iterator(text.begin(), text.end(), hole);
  size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    out.append(text, last, size_t(it->position()) - last);
    auto h = holes.find((*it)[1].str());
    if (h == holes.end())
      throw MatforgeError("unbound template hole {{" + (*it)[1].str() + "}}");
    out += h->second;
    last = size_t(it->position() + it->length());
  }
  out.append(text, last, text.size() - last);
  return out;
}

const std::array<int16_t, 256>* activation_table(OpKind k) {
  switch (k) {
    case OpKind::TanH: return &tanh_table();
    case OpKind::Sigmoid: return &sigmoid_table();
    case OpKind::Exp: return &exp_table();
    default: return nullptr;
  }
}

std::string table_init_text(const std::array<int16_t, 256>& t,
                            const std::string& rom) {
  std::ostringstream out;
  for (int i = 0; i < 256; ++i) {
    if (i % 4 == 0) out << "    ";
    out << rom << "[" << i << "] = " << t[i] << ";";
    out << (i % 4 == 3 ? "\n" : " ");
  }
  std::string s = out.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

// Ordered stencil parameter bindings for a node at a given PF.
std::vector<std::pair<std::string, int64_t>> param_bindings(const DfgNode& n,
                                                            int width, int pf) {
  auto rc = [](const TensorType& t) -> std::pair<int64_t, int64_t> {
    if (t.rank == 2) return {t.rows(), t.cols()};
    return {t.elems(), 1};
  };
  std::vector<std::pair<std::string, int64_t>> p{{"WIDTH", width}, {"PF", pf}};
  switch (n.kind) {
    case OpKind::MatMul: {
      const auto& a = n.in_dims.at(0);
      const auto& b = n.in_dims.at(1);
      int64_t k = a.rank == 1 ? a.elems() : a.cols();
      int64_t j = b.rank == 1 ? 1 : b.cols();
      p.push_back({"I", n.out_dim.elems() / j});
      p.push_back({"K", k});
      p.push_back({"J", j});
      break;
    }
    case OpKind::SpMV: {
      p.push_back({"ROWS", n.in_dims.at(0).rows()});
      p.push_back({"COLS", n.in_dims.at(0).cols()});
      p.push_back({"NNZ", n.nnz.value()});
      break;
    }
    case OpKind::OuterProduct:
      p.push_back({"I", n.out_dim.rows()});
      p.push_back({"J", n.out_dim.cols()});
      break;
    case OpKind::DotProduct:
    case OpKind::ArgMax:
      p.push_back({"N", n.in_dims.at(0).elems()});
      break;
    case OpKind::Sgn:
    case OpKind::Geq:
      break;  // scalar combinational: WIDTH/PF only
    case OpKind::Sink: {
      auto [r, c] = rc(n.in_dims.at(0));
      p.push_back({"ROWS", r});
      p.push_back({"COLS", c});
      break;
    }
    default: {
      auto [r, c] = rc(n.out_dim);
      p.push_back({"ROWS", r});
      p.push_back({"COLS", c});
      break;
    }
  }
  return p;
}

// Stencil input slots wired as broadcast values (no address port).
bool value_only_slot(OpKind k, int slot) {
  switch (k) {
    case OpKind::ScalarMatMul:
    case OpKind::Select:
    case OpKind::Sgn:
      return slot == 0;
    case OpKind::Geq:
      return true;
    default:
      return false;
  }
}

bool combinational_scalar(OpKind k) { return k == OpKind::Sgn || k == OpKind::Geq; }

std::string fused_expr(OpKind k, const std::vector<std::string>& in,
                       std::map<OpKind, bool>& roms_used, int stage) {
  switch (k) {
    case OpKind::MatAdd: return "(" + in[0] + " + " + in[1] + ")";
    case OpKind::MatSub: return "(" + in[0] + " - " + in[1] + ")";
    case OpKind::ScalarMatMul:
    case OpKind::Hadamard: return "(" + in[0] + " * " + in[1] + ")";
    case OpKind::ReLU:
      return "((" + in[0] + " > 0) ? " + in[0] + " : {WIDTH{1'b0}})";
    case OpKind::Select:
      return "((" + in[0] + " != 0) ? " + in[1] + " : " + in[2] + ")";
    case OpKind::Exp:
    case OpKind::Sigmoid:
    case OpKind::TanH: {
      roms_used[k] = true;
      std::string rom = k == OpKind::Exp ? "exp_rom"
                        : k == OpKind::Sigmoid ? "sigmoid_rom"
                                               : "tanh_rom";
      return rom + "[m" + std::to_string(stage) + "_idx]";
    }
    default:
      throw MatforgeError("op kind cannot be fused: " +
                          std::string(op_kind_name(k)));
  }
}

std::string wtype(int width) {
  return "signed [" + std::to_string(width - 1) + ":0]";
}

}  // namespace

TemplateLibrary TemplateLibrary::load(const std::string& dir) {
  TemplateLibrary lib;
  std::string costs_path = dir + "/costs.json";
  lib.costs = CostTable::load(costs_path);
  {
    std::ifstream in(costs_path);
    nlohmann::json j;
    in >> j;
    lib.version = j.value("version", 1);
  }
  lib.buffer_stencil = read_file(dir + "/Buffer.v.tpl");
  for (int k = 0; k <= int(OpKind::Sink); ++k) {
    OpKind kind = OpKind(k);
    if (kind == OpKind::Source) continue;  // source ROMs are generated
    std::string path = dir + "/" + std::string(op_kind_name(kind)) + ".v.tpl";
    std::ifstream in(path);
    if (!in) continue;
    std::ostringstream out;
    out << in.rdbuf();
    lib.stencils[kind] = out.str();
  }
  return lib;
}

VerilogDesign emit(const MatrixDfg& dfg, const PfAssignment& a,
                   const Schedule& schedule, const TemplateLibrary& lib, int width,
                   const CostModelParams* params, const Profile1* profile1) {
  if (width < 4 || width > 64)
    throw ParameterOutOfRange("data width " + std::to_string(width) +
                              " outside [4, 64]");
  dfg.validate();
  for (const auto& n : dfg.nodes) {
    int pf = a.epf.at(n.id);
    if (pf < 1 || pf > n.pf_bound())
      throw ParameterOutOfRange("node " + std::to_string(n.id) + " (" + n.name +
                                "): PF " + std::to_string(pf) + " outside [1, " +
                                std::to_string(n.pf_bound()) + "]");
  }

  VerilogDesign d;
  d.library_version = lib.version;
  const std::string ws = std::to_string(width);
  auto in_edges = dfg.in_edges();
  auto out_edges = dfg.out_edges();
  std::set<int> fused_edge_set(schedule.fused_edges.begin(),
                               schedule.fused_edges.end());

  std::ostringstream v;
  v << "// Generated by matforge. Do not edit.\n";
  v << "// template library version " << lib.version << ", data width " << width
    << "\n\n";

  // --- specialized stencil modules, one per op kind in use -------------
  std::set<OpKind> used;
  bool any_buffer = false;
  for (const auto& n : dfg.nodes) {
    int unit = schedule.unit_of[n.id];
    if (n.kind != OpKind::Source && !schedule.units[unit].fused())
      used.insert(n.kind);
  }
  for (OpKind k : used) {
    auto it = lib.stencils.find(k);
    if (it == lib.stencils.end())
      throw MissingTemplate("no stencil for op kind " +
                            std::string(op_kind_name(k)));
    std::map<std::string, std::string> holes{{"WIDTH", ws}};
    if (const auto* t = activation_table(k))
      holes["TABLE_INIT"] = table_init_text(*t, "table_rom");
    v << substitute(it->second, holes) << "\n";
  }

  // --- source ROM modules ----------------------------------------------
  auto init_value = [&](const DfgNode& n, int64_t i) -> int32_t {
    if (n.init && i < int64_t(n.init->size())) return (*n.init)[size_t(i)];
    return 0;
  };
  for (NodeId s : dfg.sources()) {
    const auto& n = dfg.nodes[s];
    if (n.out_dim.rank == 0) continue;  // scalar sources become wires
    int64_t e = n.out_dim.elems();
    v << "module mf_source_" << s << " #(\n  parameter WIDTH = " << width
      << "\n) (\n  input wire clk,\n  input wire [31:0] rd_addr,\n"
      << "  output wire " << wtype(width) << " rd_data\n);\n";
    v << "  reg " << wtype(width) << " mem [0:" << (e - 1) << "];\n";
    v << "  initial begin\n";
    for (int64_t i = 0; i < e; ++i)
      v << "    mem[" << i << "] = " << init_value(n, i) << ";\n";
    v << "  end\n  assign rd_data = mem[rd_addr];\n";
    v << "endmodule\n\n";
  }

  // --- fused super-node modules ----------------------------------------
  struct FusedPort {
    std::vector<int> ext_in;       // external input edge ids, sorted
    std::vector<NodeId> wr_nodes;  // members with external consumers
  };
  std::map<int, FusedPort> fused_ports;
  for (int u = 0; u < int(schedule.units.size()); ++u) {
    const auto& unit = schedule.units[u];
    if (!unit.fused()) continue;
    FusedPort fp;
    std::set<NodeId> memberset(unit.members.begin(), unit.members.end());
    for (NodeId m : unit.members) {
      for (int e : in_edges[m])
        if (!fused_edge_set.count(e)) fp.ext_in.push_back(e);
      bool ext_out = false;
      for (int e : out_edges[m])
        if (!fused_edge_set.count(e)) ext_out = true;
      if (ext_out) fp.wr_nodes.push_back(m);
    }
    std::sort(fp.ext_in.begin(), fp.ext_in.end());
    fused_ports[u] = fp;

    int k = int(unit.members.size());
    v << "module mf_fused_u" << u << " #(\n";
    v << "  parameter WIDTH = " << width << ",\n";
    v << "  parameter PF = 1,\n  parameter ELEMS = 1\n) (\n";
    v << "  input wire clk,\n  input wire rst,\n  input wire start,\n";
    v << "  output reg done,\n";
    for (int e : fp.ext_in) {
      if (dfg.edges[e].shape.rank == 0) {
        v << "  input wire " << wtype(width) << " val_e" << e << ",\n";
      } else {
        v << "  output reg [31:0] rd_e" << e << "_addr,\n";
        v << "  input wire " << wtype(width) << " rd_e" << e << "_data,\n";
      }
    }
    for (size_t i = 0; i < fp.wr_nodes.size(); ++i) {
      NodeId m = fp.wr_nodes[i];
      v << "  output wire [31:0] wr" << m << "_addr,\n";
      v << "  output wire " << wtype(width) << " wr" << m << "_data,\n";
      v << "  output wire wr" << m << "_en"
        << (i + 1 < fp.wr_nodes.size() ? "," : "") << "\n";
    }
    v << ");\n";
    v << "  localparam STAGES = " << k << ";\n";
    v << "  reg [31:0] idx;\n  reg [1:0] phase;\n  reg [31:0] drain;\n";

    // stage wiring in member topological order
    std::map<NodeId, int> stage_of;
    for (int i = 0; i < k; ++i) stage_of[unit.members[i]] = i;
    std::map<OpKind, bool> roms_used;
    std::ostringstream stage_decls;
    for (int i = 0; i < k; ++i) {
      NodeId m = unit.members[i];
      const auto& n = dfg.nodes[m];
      std::vector<std::string> ins(n.in_dims.size());
      for (int e : in_edges[m]) {
        const auto& ed = dfg.edges[e];
        std::string src;
        if (fused_edge_set.count(e))
          src = "s" + std::to_string(stage_of.at(ed.producer)) + "_q";
        else if (ed.shape.rank == 0)
          src = "val_e" + std::to_string(e);
        else
          src = "rd_e" + std::to_string(e) + "_data";
        ins[size_t(ed.slot)] = src;
      }
      std::string si = std::to_string(i);
      for (size_t s = 0; s < ins.size(); ++s) {
        stage_decls << "  wire " << wtype(width) << " m" << si << "_in" << s
                    << " = " << ins[s] << ";\n";
        ins[s] = "m" + si + "_in" + std::to_string(s);
      }
      if (activation_table(n.kind)) {
        stage_decls << "  wire [7:0] m" << si << "_idx = (m" << si
                    << "_in0 < -128) ? 8'd0 : (m" << si
                    << "_in0 > 127) ? 8'd255 : (m" << si
                    << "_in0[7:0] + 8'd128);\n";
      }
      stage_decls << "  wire " << wtype(width) << " s" << si << "_d = "
                  << fused_expr(n.kind, ins, roms_used, i) << ";\n";
      stage_decls << "  reg " << wtype(width) << " s" << si << "_q;\n";
      stage_decls << "  reg [31:0] a" << si << "_q;\n";
    }
    for (auto& [rk, _] : roms_used) {
      std::string rom = rk == OpKind::Exp ? "exp_rom"
                        : rk == OpKind::Sigmoid ? "sigmoid_rom"
                                                : "tanh_rom";
      v << "  reg " << wtype(width) << " " << rom << " [0:255];\n";
      v << "  initial begin\n" << table_init_text(*activation_table(rk), rom)
        << "\n  end\n";
    }
    v << stage_decls.str();
    v << "  always @(posedge clk) begin\n";
    for (int i = 0; i < k; ++i) {
      v << "    s" << i << "_q <= s" << i << "_d;\n";
      v << "    a" << i << "_q <= " << (i == 0 ? "idx" : "a" + std::to_string(i - 1) + "_q")
        << ";\n";
    }
    v << "  end\n";
    for (NodeId m : fp.wr_nodes) {
      int st = stage_of.at(m);
      v << "  assign wr" << m << "_addr = a" << st << "_q;\n";
      v << "  assign wr" << m << "_data = s" << st << "_q;\n";
      v << "  assign wr" << m << "_en = (phase == 2'd1) || (phase == 2'd2);\n";
    }
    v << "  always @(posedge clk) begin\n";
    v << "    if (rst) begin\n";
    v << "      idx <= 0;\n      phase <= 2'd0;\n      drain <= 0;\n";
    v << "      done <= 0;\n";
    v << "    end else if (start && phase == 2'd0 && !done) begin\n";
    v << "      phase <= 2'd1;\n      idx <= 0;\n      drain <= 0;\n";
    v << "    end else if (phase == 2'd1) begin\n";
    for (int e : fp.ext_in)
      if (dfg.edges[e].shape.rank != 0)
        v << "      rd_e" << e << "_addr <= idx;\n";
    v << "      if (idx + PF >= ELEMS) begin\n        phase <= 2'd2;\n"
      << "      end else begin\n        idx <= idx + PF;\n      end\n";
    v << "    end else if (phase == 2'd2) begin\n";
    v << "      if (drain + 1 >= STAGES + 1) begin\n";
    v << "        phase <= 2'd0;\n        done <= 1;\n";
    v << "      end else begin\n        drain <= drain + 1;\n      end\n";
    v << "    end\n  end\nendmodule\n\n";
  }

  // --- edge classification ---------------------------------------------
  d.buffers.resize(dfg.edges.size());
  for (int e = 0; e < int(dfg.edges.size()); ++e) {
    const auto& ed = dfg.edges[e];
    BufferInfo b;
    b.edge = e;
    b.banks = a.edge_pf.at(e);
    b.depth = int(ed.shape.elems());
    if (fused_edge_set.count(e)) {
      b.kind = BufferInfo::Kind::Fused;
    } else if (ed.shape.rank == 0) {
      b.kind = BufferInfo::Kind::ScalarWire;
      b.banks = 1;
    } else if (dfg.nodes[ed.producer].kind == OpKind::Source) {
      b.kind = BufferInfo::Kind::Buffer;
      b.instance = "src" + std::to_string(ed.producer) + "_e" + std::to_string(e);
    } else {
      b.kind = BufferInfo::Kind::Buffer;
      b.instance = "buf_e" + std::to_string(e);
      any_buffer = true;
    }
    d.buffers[size_t(e)] = b;
  }
  if (any_buffer)
    v << substitute(lib.buffer_stencil, {{"WIDTH", ws}}) << "\n";

  // --- top module -------------------------------------------------------
  std::ostringstream top;
  top << "module mf_top (\n  input wire clk,\n  input wire rst,\n"
      << "  input wire start,\n  output wire done";
  for (NodeId s : dfg.sinks()) {
    const auto& n = dfg.nodes[s];
    top << ",\n  output wire [31:0] o_" << n.name << "_addr";
    top << ",\n  output wire " << wtype(width) << " o_" << n.name << "_data";
    top << ",\n  output wire o_" << n.name << "_en";
  }
  top << "\n);\n";

  // unit handshake wires
  for (int u = 0; u < int(schedule.units.size()); ++u) {
    top << "  wire u" << u << "_start;\n  wire u" << u << "_done;\n";
    top << "  reg u" << u << "_done_r;\n";
  }
  // per-edge wires
  for (int e = 0; e < int(dfg.edges.size()); ++e) {
    const auto& b = d.buffers[size_t(e)];
    if (b.kind == BufferInfo::Kind::Fused) continue;
    if (b.kind == BufferInfo::Kind::ScalarWire) {
      top << "  wire " << wtype(width) << " e" << e << "_val;\n";
    } else {
      top << "  wire [31:0] e" << e << "_rd_addr;\n";
      top << "  wire " << wtype(width) << " e" << e << "_rd_data;\n";
    }
  }
  // per-node producer-side wires
  for (const auto& n : dfg.nodes) {
    if (n.kind == OpKind::Source) {
      if (n.out_dim.rank == 0)
        top << "  wire " << wtype(width) << " n" << n.id << "_out = "
            << init_value(n, 0) << ";\n";
      continue;
    }
    if (n.kind == OpKind::Sink) continue;
    int u = schedule.unit_of[n.id];
    if (schedule.units[u].fused()) continue;  // fused units expose wr ports
    bool ext_out = false;
    for (int e : out_edges[n.id])
      if (!fused_edge_set.count(e)) ext_out = true;
    if (!ext_out) continue;
    if (combinational_scalar(n.kind)) {
      top << "  wire " << wtype(width) << " n" << n.id << "_out;\n";
    } else if (n.out_dim.rank == 0) {
      top << "  wire [31:0] n" << n.id << "_wr_addr;\n";
      top << "  wire " << wtype(width) << " n" << n.id << "_wr_data;\n";
      top << "  wire n" << n.id << "_wr_en;\n";
      top << "  reg " << wtype(width) << " n" << n.id << "_q;\n";
    } else {
      top << "  wire [31:0] n" << n.id << "_wr_addr;\n";
      top << "  wire " << wtype(width) << " n" << n.id << "_wr_data;\n";
      top << "  wire n" << n.id << "_wr_en;\n";
    }
  }
  // fused unit wr wires
  for (auto& [u, fp] : fused_ports) {
    for (NodeId m : fp.wr_nodes) {
      top << "  wire [31:0] u" << u << "_wr" << m << "_addr;\n";
      top << "  wire " << wtype(width) << " u" << u << "_wr" << m << "_data;\n";
      top << "  wire u" << u << "_wr" << m << "_en;\n";
    }
  }

  // scalar-producing op nodes latch their single result word
  for (const auto& n : dfg.nodes) {
    if (n.kind == OpKind::Source || n.kind == OpKind::Sink) continue;
    if (n.out_dim.rank != 0 || combinational_scalar(n.kind)) continue;
    int u = schedule.unit_of[n.id];
    if (schedule.units[u].fused()) continue;
    bool ext_out = false;
    for (int e : out_edges[n.id])
      if (!fused_edge_set.count(e)) ext_out = true;
    if (!ext_out) continue;
    top << "  always @(posedge clk) begin\n";
    top << "    if (n" << n.id << "_wr_en) n" << n.id << "_q <= n" << n.id
        << "_wr_data;\n  end\n";
  }

  // scalar edge drivers
  for (int e = 0; e < int(dfg.edges.size()); ++e) {
    const auto& b = d.buffers[size_t(e)];
    if (b.kind != BufferInfo::Kind::ScalarWire) continue;
    const auto& p = dfg.nodes[dfg.edges[e].producer];
    std::string src;
    if (p.kind == OpKind::Source || combinational_scalar(p.kind))
      src = "n" + std::to_string(p.id) + "_out";
    else
      src = "n" + std::to_string(p.id) + "_q";
    top << "  assign e" << e << "_val = " << src << ";\n";
  }

  auto wr_source = [&](int e) -> std::string {
    // producer-side write bus prefix for a buffered edge
    const auto& ed = dfg.edges[e];
    int pu = schedule.unit_of[ed.producer];
    if (schedule.units[pu].fused())
      return "u" + std::to_string(pu) + "_wr" + std::to_string(ed.producer);
    return "n" + std::to_string(ed.producer) + "_wr";
  };

  // buffer / source-ROM instances
  for (int e = 0; e < int(dfg.edges.size()); ++e) {
    const auto& b = d.buffers[size_t(e)];
    if (b.kind != BufferInfo::Kind::Buffer) continue;
    const auto& ed = dfg.edges[e];
    if (dfg.nodes[ed.producer].kind == OpKind::Source) {
      top << "  mf_source_" << ed.producer << " #(\n    .WIDTH(" << width
          << ")\n  ) " << b.instance << " (\n";
      top << "    .clk(clk),\n";
      top << "    .rd_addr(e" << e << "_rd_addr),\n";
      top << "    .rd_data(e" << e << "_rd_data)\n  );\n";
    } else {
      std::string wp = wr_source(e);
      top << "  MF_Buffer #(\n    .WIDTH(" << width << "),\n    .DEPTH("
          << b.depth << "),\n    .BANKS(" << b.banks << ")\n  ) " << b.instance
          << " (\n";
      top << "    .clk(clk),\n";
      top << "    .wr_addr(" << wp << "_addr),\n";
      top << "    .wr_data(" << wp << "_data),\n";
      top << "    .wr_en(" << wp << "_en),\n";
      top << "    .rd_addr(e" << e << "_rd_addr),\n";
      top << "    .rd_data(e" << e << "_rd_data)\n  );\n";
    }
  }

  // op / sink instances and fused unit instances
  auto edge_of_slot = [&](NodeId n, int slot) -> int {
    for (int e : in_edges[n])
      if (dfg.edges[e].slot == slot) return e;
    throw MatforgeError("missing input edge");
  };
  for (int u = 0; u < int(schedule.units.size()); ++u) {
    const auto& unit = schedule.units[u];
    if (unit.fused()) {
      const auto& fp = fused_ports.at(u);
      int64_t elems = 1;
      for (NodeId m : unit.members)
        elems = std::max(elems, dfg.nodes[m].out_dim.elems());
      top << "  mf_fused_u" << u << " #(\n    .WIDTH(" << width
          << "),\n    .PF(" << unit.pf << "),\n    .ELEMS(" << elems
          << ")\n  ) u" << u << "_i (\n";
      top << "    .clk(clk),\n    .rst(rst),\n";
      top << "    .start(u" << u << "_start),\n    .done(u" << u << "_done),\n";
      for (int e : fp.ext_in) {
        if (dfg.edges[e].shape.rank == 0) {
          top << "    .val_e" << e << "(e" << e << "_val),\n";
        } else {
          top << "    .rd_e" << e << "_addr(e" << e << "_rd_addr),\n";
          top << "    .rd_e" << e << "_data(e" << e << "_rd_data),\n";
        }
      }
      for (size_t i = 0; i < fp.wr_nodes.size(); ++i) {
        NodeId m = fp.wr_nodes[i];
        top << "    .wr" << m << "_addr(u" << u << "_wr" << m << "_addr),\n";
        top << "    .wr" << m << "_data(u" << u << "_wr" << m << "_data),\n";
        top << "    .wr" << m << "_en(u" << u << "_wr" << m << "_en)"
            << (i + 1 < fp.wr_nodes.size() ? "," : "") << "\n";
      }
      top << "  );\n";
      for (NodeId m : unit.members) {
        InstanceInfo info;
        info.module = "mf_fused_u" + std::to_string(u);
        info.instance = "u" + std::to_string(u) + "_i";
        info.params = {{"WIDTH", width}, {"PF", unit.pf}, {"ELEMS", elems}};
        info.lut_table = lib.costs.lut_at(dfg.nodes[m], unit.pf);
        info.dsp = lib.costs.dsp_at(dfg.nodes[m].kind, unit.pf);
        d.instances[m] = info;
      }
      continue;
    }

    NodeId id = unit.members[0];
    const auto& n = dfg.nodes[id];
    if (n.kind == OpKind::Source) {
      InstanceInfo info;
      info.module = n.out_dim.rank == 0 ? "mf_const"
                                        : "mf_source_" + std::to_string(id);
      info.instance = n.out_dim.rank == 0 ? "n" + std::to_string(id) + "_out"
                                          : "src" + std::to_string(id);
      info.params = {{"WIDTH", width}};
      info.lut_table = lib.costs.lut_at(n, 1);
      info.dsp = 0;
      d.instances[id] = info;
      continue;
    }

    int pf = a.epf[id];
    std::string module = "MF_" + std::string(op_kind_name(n.kind));
    std::string inst = "n" + std::to_string(id) + "_i";
    auto params = param_bindings(n, width, pf);
    top << "  " << module << " #(\n";
    for (size_t i = 0; i < params.size(); ++i)
      top << "    ." << params[i].first << "(" << params[i].second << ")"
          << (i + 1 < params.size() ? "," : "") << "\n";
    top << "  ) " << inst << " (\n";
    top << "    .clk(clk),\n    .rst(rst),\n";
    top << "    .start(u" << u << "_start),\n    .done(u" << u << "_done)";
    for (int slot = 0; slot < int(n.in_dims.size()); ++slot) {
      int e = edge_of_slot(id, slot);
      bool scalar = dfg.edges[e].shape.rank == 0;
      if (value_only_slot(n.kind, slot)) {
        top << ",\n    .rd" << slot << "_data(e" << e << "_val)";
      } else if (scalar) {
        top << ",\n    .rd" << slot << "_addr()";
        top << ",\n    .rd" << slot << "_data(e" << e << "_val)";
      } else {
        top << ",\n    .rd" << slot << "_addr(e" << e << "_rd_addr)";
        top << ",\n    .rd" << slot << "_data(e" << e << "_rd_data)";
      }
    }
    if (n.kind == OpKind::Sink) {
      top << ",\n    .out_addr(o_" << n.name << "_addr)";
      top << ",\n    .out_data(o_" << n.name << "_data)";
      top << ",\n    .out_en(o_" << n.name << "_en)";
    } else if (combinational_scalar(n.kind)) {
      top << ",\n    .out_data(n" << id << "_out)";
    } else {
      bool ext_out = false;
      for (int e : out_edges[id])
        if (!fused_edge_set.count(e)) ext_out = true;
      if (ext_out) {
        top << ",\n    .wr_addr(n" << id << "_wr_addr)";
        top << ",\n    .wr_data(n" << id << "_wr_data)";
        top << ",\n    .wr_en(n" << id << "_wr_en)";
      } else {
        top << ",\n    .wr_addr()";
        top << ",\n    .wr_data()";
        top << ",\n    .wr_en()";
      }
    }
    top << "\n  );\n";
    InstanceInfo info;
    info.module = module;
    info.instance = inst;
    for (auto& [k2, v2] : params) info.params[k2] = v2;
    info.lut_table = lib.costs.lut_at(n, pf);
    info.dsp = lib.costs.dsp_at(n.kind, pf);
    d.instances[id] = info;
  }

  // controller: a unit starts once every predecessor's done is latched
  for (int u = 0; u < int(schedule.units.size()); ++u) {
    const auto& deps = schedule.deps[u];
    if (deps.empty()) {
      top << "  assign u" << u << "_start = start;\n";
    } else {
      top << "  assign u" << u << "_start = ";
      bool first = true;
      for (int dpu : deps) {
        top << (first ? "" : " & ") << "u" << dpu << "_done_r";
        first = false;
      }
      top << ";\n";
    }
    NodeId rep = schedule.units[u].members[0];
    if (dfg.nodes[rep].kind == OpKind::Source)
      top << "  assign u" << u << "_done = u" << u << "_start;\n";
    top << "  always @(posedge clk) begin\n";
    top << "    if (rst) u" << u << "_done_r <= 1'b0;\n";
    top << "    else if (u" << u << "_done) u" << u << "_done_r <= 1'b1;\n";
    top << "  end\n";
  }
  {
    top << "  assign done = ";
    bool first = true;
    for (NodeId s : dfg.sinks()) {
      top << (first ? "" : " & ") << "u" << schedule.unit_of[s] << "_done_r";
      first = false;
    }
    if (first) top << "1'b1";
    top << ";\n";
  }
  top << "endmodule\n";
  v << top.str();

  d.text = v.str();
  for (auto& [id, info] : d.instances) {
    d.lut_table_total += info.lut_table;
    d.dsp_total += info.dsp;
  }
  if (params && profile1)
    d.est_usage = usage(dfg, *params, *profile1, a, lib.costs);
  return d;
}

// ---------------------------------------------------------------------------
// structural checking
// ---------------------------------------------------------------------------

namespace {

struct ParsedPort {
  std::string name;
  bool is_output = false;
};

struct ParsedInstance {
  std::string module;
  std::string instance;
  std::map<std::string, std::string> params;           // .P(value)
  std::vector<std::pair<std::string, std::string>> conns;  // .port(actual)
  int stmt_index = 0;
};

struct ParsedModule {
  std::string name;
  std::vector<ParsedPort> ports;
  std::map<std::string, int> wire_decl_at;  // wire name -> statement index
  std::set<std::string> regs;
  std::set<std::string> params;  // parameters + localparams + integers
  std::vector<std::pair<std::string, int>> assign_lhs;  // name, stmt index
  std::vector<std::pair<std::string, int>> wire_inits;  // wire x = expr
  std::vector<std::vector<std::string>> rhs_uses;       // per statement
  std::vector<ParsedInstance> instances;
};

const std::set<std::string>& verilog_keywords() {
  static const std::set<std::string> kw{
      "module", "endmodule", "input",  "output", "inout",  "wire",  "reg",
      "assign", "always",    "initial", "begin",  "end",    "if",    "else",
      "posedge", "negedge",  "signed",  "parameter", "localparam", "integer",
      "for", "case", "endcase", "default"};
  return kw;
}

std::vector<std::string> identifiers_in(const std::string& expr) {
  static const std::regex sized(R"([0-9]+\s*'s?[bdhoBDHO][0-9a-fA-FxzXZ_]+)");
  std::string cleaned = std::regex_replace(expr, sized, " ");
  static const std::regex ident(R"([A-Za-z_][A-Za-z0-9_]*)");
  std::vector<std::string> out;
  for (auto it = std::sregex_iterator(cleaned.begin(), cleaned.end(), ident);
       it != std::sregex_iterator(); ++it) {
    std::string s = it->str();
    if (!verilog_keywords().count(s)) out.push_back(s);
  }
  return out;
}

std::string strip_comments(const std::string& text) {
  std::ostringstream out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    auto pos = line.find("//");
    if (pos != std::string::npos) line.erase(pos);
    out << line << "\n";
  }
  return out.str();
}

// Removes always/initial blocks (begin..end matched) so the remaining text
// splits cleanly into declaration/assign/instantiation statements.
std::string strip_procedural(const std::string& text,
                             std::vector<std::string>* violations) {
  std::string out;
  size_t i = 0;
  while (i < text.size()) {
    size_t a = text.find("always", i);
    size_t b = text.find("initial", i);
    size_t start = std::min(a, b);
    if (start == std::string::npos) {
      out.append(text, i, text.size() - i);
      break;
    }
    out.append(text, i, start - i);
    size_t p = text.find("begin", start);
    if (p == std::string::npos) {
      violations->push_back("procedural block without begin");
      out.append(text, start, text.size() - start);
      break;
    }
    int depth = 0;
    size_t q = start;
    static const std::regex be(R"(\b(begin|end)\b)");
    auto it = std::sregex_iterator(text.begin() + long(p), text.end(), be);
    bool closed = false;
    for (; it != std::sregex_iterator(); ++it) {
      if (it->str() == "begin")
        ++depth;
      else if (--depth == 0) {
        q = p + size_t(it->position() + it->length());
        closed = true;
        break;
      }
    }
    if (!closed) {
      violations->push_back("unbalanced begin/end in procedural block");
      break;
    }
    i = q;
  }
  return out;
}

void parse_decl_names(const std::string& stmt, bool* is_wire_init,
                      std::string* init_expr, std::vector<std::string>* names) {
  // stmt like: wire signed [15:0] a, b   or   wire [31:0] x = expr
  static const std::regex range(R"(\[[^\]]*\])");
  std::string s = std::regex_replace(stmt, range, " ");
  auto eq = s.find('=');
  *is_wire_init = eq != std::string::npos;
  if (*is_wire_init) {
    *init_expr = s.substr(eq + 1);
    s.erase(eq);
  }
  for (auto& id : identifiers_in(s)) names->push_back(id);
}

std::optional<ParsedInstance> parse_instance(const std::string& stmt, int idx) {
  static const std::regex head(R"(^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(#)?)");
  std::smatch m;
  if (!std::regex_search(stmt, m, head)) return std::nullopt;
  ParsedInstance inst;
  inst.module = m[1].str();
  inst.stmt_index = idx;
  size_t pos = size_t(m.position() + m.length());
  auto paren_span = [&](size_t open) -> std::pair<size_t, size_t> {
    int depth = 0;
    for (size_t i = open; i < stmt.size(); ++i) {
      if (stmt[i] == '(') ++depth;
      else if (stmt[i] == ')' && --depth == 0) return {open, i};
    }
    return {std::string::npos, std::string::npos};
  };
  auto parse_pairs = [&](const std::string& body,
                         std::vector<std::pair<std::string, std::string>>* out) {
    static const std::regex pair(R"(\.([A-Za-z_][A-Za-z0-9_]*)\s*\(([^()]*)\))");
    for (auto it = std::sregex_iterator(body.begin(), body.end(), pair);
         it != std::sregex_iterator(); ++it)
      out->push_back({(*it)[1].str(), (*it)[2].str()});
  };
  if (m[2].matched) {  // parameter list
    size_t open = stmt.find('(', pos);
    if (open == std::string::npos) return std::nullopt;
    auto [o, c] = paren_span(open);
    if (c == std::string::npos) return std::nullopt;
    std::vector<std::pair<std::string, std::string>> pp;
    parse_pairs(stmt.substr(o + 1, c - o - 1), &pp);
    for (auto& [k2, v2] : pp) inst.params[k2] = v2;
    pos = c + 1;
  }
  static const std::regex nm(R"(^\s*([A-Za-z_][A-Za-z0-9_]*))");
  std::string rest = stmt.substr(pos);
  std::smatch m2;
  if (!std::regex_search(rest, m2, nm)) return std::nullopt;
  inst.instance = m2[1].str();
  size_t open = stmt.find('(', pos + size_t(m2.position() + m2.length()));
  if (open == std::string::npos) return std::nullopt;
  auto [o, c] = paren_span(open);
  if (c == std::string::npos) return std::nullopt;
  parse_pairs(stmt.substr(o + 1, c - o - 1), &inst.conns);
  return inst;
}

std::vector<ParsedModule> parse_modules(const std::string& text,
                                        std::vector<std::string>* violations) {
  std::vector<ParsedModule> mods;
  std::string clean = strip_comments(text);
  static const std::regex modre(R"(\bmodule\s+([A-Za-z_][A-Za-z0-9_]*))");
  size_t pos = 0;
  int opened = 0, closed = 0;
  {
    static const std::regex tok(R"(\b(module|endmodule)\b)");
    for (auto it = std::sregex_iterator(clean.begin(), clean.end(), tok);
         it != std::sregex_iterator(); ++it)
      (it->str() == "module" ? opened : closed)++;
  }
  if (opened != closed)
    violations->push_back("module/endmodule imbalance: " +
                          std::to_string(opened) + " vs " + std::to_string(closed));

  while (true) {
    std::smatch m;
    std::string tail = clean.substr(pos);
    if (!std::regex_search(tail, m, modre)) break;
    size_t mstart = pos + size_t(m.position());
    size_t mend = clean.find("endmodule", mstart);
    if (mend == std::string::npos) break;
    std::string body = clean.substr(mstart, mend - mstart);
    pos = mend + 9;

    ParsedModule pm;
    pm.name = m[1].str();

    // header: everything from the first '(' to the matching ');'
    size_t hopen = body.find('(');
    int depth = 0;
    size_t hclose = std::string::npos;
    for (size_t i = hopen; i < body.size() && hopen != std::string::npos; ++i) {
      if (body[i] == '(') ++depth;
      else if (body[i] == ')' && --depth == 0) {
        hclose = i;
        break;
      }
    }
    if (hopen == std::string::npos || hclose == std::string::npos) {
      violations->push_back("module " + pm.name + ": malformed header");
      mods.push_back(pm);
      continue;
    }
    std::string header = body.substr(hopen + 1, hclose - hopen - 1);
    // parameters inside #(...) — header may start with the param list
    size_t header_start = hopen;
    {
      size_t hash = body.find('#');
      size_t modkw = body.find(pm.name);
      if (hash != std::string::npos && hash < hopen && modkw < hash) {
        // body.find('(') was the param list; find the port list after it
        static const std::regex prm(R"(parameter\s+([A-Za-z_][A-Za-z0-9_]*))");
        for (auto it = std::sregex_iterator(header.begin(), header.end(), prm);
             it != std::sregex_iterator(); ++it)
          pm.params.insert((*it)[1].str());
        size_t popen = body.find('(', hclose + 1);
        depth = 0;
        size_t pclose = std::string::npos;
        for (size_t i = popen; i < body.size() && popen != std::string::npos;
             ++i) {
          if (body[i] == '(') ++depth;
          else if (body[i] == ')' && --depth == 0) {
            pclose = i;
            break;
          }
        }
        if (popen == std::string::npos || pclose == std::string::npos) {
          violations->push_back("module " + pm.name + ": malformed port list");
          mods.push_back(pm);
          continue;
        }
        header = body.substr(popen + 1, pclose - popen - 1);
        header_start = popen;
        hclose = pclose;
      }
    }
    // ports: comma separated declarations, last identifier is the name
    {
      std::istringstream hs(header);
      std::string piece;
      while (std::getline(hs, piece, ',')) {
        static const std::regex range(R"(\[[^\]]*\])");
        std::string p2 = std::regex_replace(piece, range, " ");
        bool is_out = p2.find("output") != std::string::npos;
        auto ids = identifiers_in(p2);
        if (ids.empty()) continue;
        pm.ports.push_back({ids.back(), is_out});
      }
    }

    // body statements after the port list
    std::string rest = body.substr(hclose + 1);
    size_t semi = rest.find(';');
    if (semi != std::string::npos) rest = rest.substr(semi + 1);
    rest = strip_procedural(rest, violations);
    std::istringstream rs(rest);
    std::string stmt;
    int idx = 0;
    while (std::getline(rs, stmt, ';')) {
      ++idx;
      std::string trimmed = stmt;
      trimmed.erase(0, trimmed.find_first_not_of(" \t\n"));
      if (trimmed.empty()) continue;
      auto starts = [&](const char* w) {
        return trimmed.rfind(w, 0) == 0 &&
               (trimmed.size() == strlen(w) ||
                !(isalnum(trimmed[strlen(w)]) || trimmed[strlen(w)] == '_'));
      };
      if (starts("wire") || starts("reg") || starts("integer") ||
          starts("localparam") || starts("parameter") || starts("genvar")) {
        bool init = false;
        std::string init_expr;
        std::vector<std::string> names;
        parse_decl_names(trimmed, &init, &init_expr, &names);
        if (starts("wire")) {
          // with an initializer only the first name is declared
          if (init && !names.empty()) {
            pm.wire_decl_at[names.front()] = idx;
            pm.assign_lhs.push_back({names.front(), idx});
            pm.rhs_uses.push_back(identifiers_in(init_expr));
          } else {
            for (auto& nme : names) pm.wire_decl_at[nme] = idx;
          }
        } else if (starts("reg")) {
          for (auto& nme : names) pm.regs.insert(nme);
        } else {
          for (auto& nme : names) pm.params.insert(nme);
        }
      } else if (starts("assign")) {
        auto eq = trimmed.find('=');
        if (eq == std::string::npos) {
          violations->push_back("module " + pm.name + ": malformed assign");
          continue;
        }
        std::string lhs = trimmed.substr(6, eq - 6);
        auto lids = identifiers_in(lhs);
        if (lids.empty()) {
          violations->push_back("module " + pm.name + ": assign without lhs");
          continue;
        }
        pm.assign_lhs.push_back({lids.front(), idx});
        pm.rhs_uses.push_back(identifiers_in(trimmed.substr(eq + 1)));
      } else if (starts("endmodule")) {
        continue;
      } else {
        auto inst = parse_instance(trimmed, idx);
        if (inst)
          pm.instances.push_back(*inst);
        else
          violations->push_back("module " + pm.name +
                                ": unrecognized statement: " +
                                trimmed.substr(0, 40));
      }
    }
    mods.push_back(std::move(pm));
  }
  return mods;
}

}  // namespace

StructuralReport structural_check(const VerilogDesign& design, const MatrixDfg& dfg,
                                  const PfAssignment& a) {
  StructuralReport rep;
  auto mods = parse_modules(design.text, &rep.violations);
  std::map<std::string, const ParsedModule*> by_name;
  for (const auto& m : mods) by_name[m.name] = &m;

  for (const auto& m : mods) {
    std::set<std::string> declared;  // ports, regs, params always visible
    for (const auto& p : m.ports) declared.insert(p.name);
    for (const auto& r : m.regs) declared.insert(r);
    for (const auto& p : m.params) declared.insert(p);

    // declared-before-use for wires, by statement position
    auto check_use = [&](const std::string& id, int at, const std::string& ctx) {
      if (declared.count(id)) return;
      auto w = m.wire_decl_at.find(id);
      if (w == m.wire_decl_at.end()) {
        rep.violations.push_back("module " + m.name + ": use of undeclared '" +
                                 id + "' in " + ctx);
      } else if (w->second > at) {
        rep.violations.push_back("module " + m.name + ": '" + id +
                                 "' used before its declaration in " + ctx);
      }
    };
    for (size_t i = 0; i < m.assign_lhs.size(); ++i) {
      for (const auto& id : m.rhs_uses[i])
        check_use(id, m.assign_lhs[i].second, "assign");
    }

    // drivers: assigns, output-port actuals, module input ports
    std::map<std::string, int> drivers;
    for (const auto& p : m.ports)
      if (!p.is_output) drivers[p.name]++;  // driven from outside
    for (const auto& [lhs, at] : m.assign_lhs) drivers[lhs]++;

    for (const auto& inst : m.instances) {
      auto def = by_name.find(inst.module);
      if (def == by_name.end()) {
        rep.violations.push_back("module " + m.name + ": instance '" +
                                 inst.instance + "' of undefined module '" +
                                 inst.module + "'");
        continue;
      }
      std::set<std::string> defports;
      std::map<std::string, bool> is_out;
      for (const auto& p : def->second->ports) {
        defports.insert(p.name);
        is_out[p.name] = p.is_output;
      }
      std::set<std::string> connected;
      for (const auto& [port, actual] : inst.conns) {
        connected.insert(port);
        if (!defports.count(port)) {
          rep.violations.push_back("instance '" + inst.instance +
                                   "': no port '" + port + "' on module " +
                                   inst.module);
          continue;
        }
        for (const auto& id : identifiers_in(actual))
          check_use(id, inst.stmt_index, "instance " + inst.instance);
        if (is_out[port]) {
          auto ids = identifiers_in(actual);
          if (ids.size() == 1 && !m.regs.count(ids[0])) drivers[ids[0]]++;
        }
      }
      for (const auto& p : defports)
        if (!connected.count(p))
          rep.violations.push_back("instance '" + inst.instance +
                                   "': port '" + p + "' of " + inst.module +
                                   " left unconnected");
      for (const auto& [pname, pval] : inst.params)
        if (!def->second->params.count(pname))
          rep.violations.push_back("instance '" + inst.instance +
                                   "': no parameter '" + pname + "' on module " +
                                   inst.module);
    }

    for (const auto& [w, at] : m.wire_decl_at) {
      int dr = drivers.count(w) ? drivers[w] : 0;
      if (dr == 0)
        rep.violations.push_back("module " + m.name + ": wire '" + w +
                                 "' has no driver");
      else if (dr > 1)
        rep.violations.push_back("module " + m.name + ": wire '" + w + "' has " +
                                 std::to_string(dr) + " drivers");
    }
    for (const auto& p : m.ports) {
      if (!p.is_output) continue;
      if (m.regs.count(p.name)) continue;  // output reg, procedurally driven
      int dr = drivers.count(p.name) ? drivers[p.name] : 0;
      if (dr != 1 && m.name == "mf_top")
        rep.violations.push_back("module " + m.name + ": output '" + p.name +
                                 "' has " + std::to_string(dr) + " drivers");
    }
  }

  // PF / BANKS bindings against the assignment
  const ParsedModule* topm = nullptr;
  for (const auto& m : mods)
    if (m.name == "mf_top") topm = &m;
  if (!topm) {
    rep.violations.push_back("no mf_top module");
    return rep;
  }
  std::map<std::string, const ParsedInstance*> top_insts;
  for (const auto& inst : topm->instances) top_insts[inst.instance] = &inst;

  std::set<std::string> checked;
  for (const auto& [id, info] : design.instances) {
    if (!info.params.count("PF")) continue;
    if (checked.count(info.instance)) continue;
    checked.insert(info.instance);
    auto it = top_insts.find(info.instance);
    if (it == top_insts.end()) {
      rep.violations.push_back("manifest instance '" + info.instance +
                               "' not found in mf_top");
      continue;
    }
    auto p = it->second->params.find("PF");
    int expect = int(info.params.at("PF"));
    if (p == it->second->params.end() || std::stoi(p->second) != expect)
      rep.violations.push_back("instance '" + info.instance + "': PF binding " +
                               (p == it->second->params.end() ? "missing"
                                                              : p->second) +
                               ", assignment says " + std::to_string(expect));
  }
  for (const auto& b : design.buffers) {
    if (b.kind != BufferInfo::Kind::Buffer) continue;
    if (dfg.nodes[dfg.edges[size_t(b.edge)].producer].kind == OpKind::Source)
      continue;  // source ROMs carry no BANKS parameter
    auto it = top_insts.find(b.instance);
    if (it == top_insts.end()) {
      rep.violations.push_back("buffer '" + b.instance + "' not found in mf_top");
      continue;
    }
    auto p = it->second->params.find("BANKS");
    int expect = a.edge_pf.at(size_t(b.edge));
    if (p == it->second->params.end() || std::stoi(p->second) != expect)
      rep.violations.push_back("buffer '" + b.instance + "': BANKS binding " +
                               (p == it->second->params.end() ? "missing"
                                                              : p->second) +
                               ", edge PF is " + std::to_string(expect));
  }
  return rep;
}

nlohmann::json manifest_to_json(const VerilogDesign& design, const MatrixDfg& dfg) {
  nlohmann::json j;
  j["library_version"] = design.library_version;
  j["instances"] = nlohmann::json::array();
  for (const auto& [id, info] : design.instances) {
    nlohmann::json ji;
    ji["node"] = id;
    ji["name"] = dfg.nodes[size_t(id)].name;
    ji["kind"] = op_kind_name(dfg.nodes[size_t(id)].kind);
    ji["module"] = info.module;
    ji["instance"] = info.instance;
    ji["params"] = info.params;
    ji["lut"] = info.lut_table;
    ji["dsp"] = info.dsp;
    j["instances"].push_back(ji);
  }
  j["buffers"] = nlohmann::json::array();
  for (const auto& b : design.buffers) {
    nlohmann::json jb;
    jb["edge"] = b.edge;
    jb["producer"] = dfg.edges[size_t(b.edge)].producer;
    jb["consumer"] = dfg.edges[size_t(b.edge)].consumer;
    jb["kind"] = b.kind == BufferInfo::Kind::Buffer ? "buffer"
                 : b.kind == BufferInfo::Kind::Fused ? "fused"
                                                     : "scalar_wire";
    jb["instance"] = b.instance;
    jb["banks"] = b.banks;
    jb["depth"] = b.depth;
    j["buffers"].push_back(jb);
  }
  j["totals"]["lut"] = design.lut_table_total;
  j["totals"]["dsp"] = design.dsp_total;
  if (design.est_usage) {
    j["est_usage"]["lut"] = design.est_usage->lut;
    j["est_usage"]["dsp"] = design.est_usage->dsp;
  }
  return j;
}

}  // namespace matforge
