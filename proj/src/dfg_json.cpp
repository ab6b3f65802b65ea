#include "matforge/dfg_json.hpp"

#include <set>

namespace matforge {

namespace {

using nlohmann::json;

json dims_to_json(const TensorType& t) {
  json j;
  j["rank"] = t.rank;
  j["dims"] = {t.dims[0], t.dims[1]};
  return j;
}

TensorType dims_from_json(const json& j) {
  TensorType t;
  t.rank = j.at("rank").get<int>();
  auto d = j.at("dims");
  t.dims = {d.at(0).get<int>(), d.at(1).get<int>()};
  if (t.rank < 0 || t.rank > 2 || t.dims[0] < 1 || t.dims[1] < 1)
    throw MatforgeError("invalid tensor type in DFG document");
  return t;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& ctx) {
  for (auto& [key, val] : j.items())
    if (!allowed.count(key))
      throw MatforgeError("unknown field '" + key + "' in " + ctx);
}

}  // namespace

json dfg_to_json(const MatrixDfg& dfg,
                 const std::map<NodeId, std::pair<int64_t, int>>* profile,
                 const PfAssignment* pf) {
  json j;
  j["schema_version"] = kDfgSchemaVersion;
  j["nodes"] = json::array();
  for (const auto& n : dfg.nodes) {
    json jn;
    jn["id"] = n.id;
    jn["name"] = n.name;
    jn["kind"] = std::string(op_kind_name(n.kind));
    jn["in_dims"] = json::array();
    for (const auto& d : n.in_dims) jn["in_dims"].push_back(dims_to_json(d));
    jn["out_dim"] = dims_to_json(n.out_dim);
    if (n.nnz) jn["nnz"] = *n.nnz;
    if (n.init) jn["init"] = *n.init;
    j["nodes"].push_back(std::move(jn));
  }
  j["edges"] = json::array();
  for (const auto& e : dfg.edges)
    j["edges"].push_back({{"producer", e.producer},
                          {"consumer", e.consumer},
                          {"slot", e.slot}});
  if (profile) {
    json jp = json::object();
    for (const auto& [id, lat_lut] : *profile)
      jp[std::to_string(id)] = {lat_lut.first, lat_lut.second};
    j["profile"] = std::move(jp);
  }
  if (pf) {
    j["pf"] = {{"epf", pf->epf}, {"edge_pf", pf->edge_pf}};
  }
  return j;
}

DfgDocument dfg_from_json(const json& j) {
  reject_unknown(j, {"schema_version", "nodes", "edges", "profile", "pf"}, "document");
  if (j.at("schema_version").get<int>() != kDfgSchemaVersion)
    throw MatforgeError("unsupported DFG schema version");
  DfgDocument doc;
  for (const auto& jn : j.at("nodes")) {
    reject_unknown(jn, {"id", "name", "kind", "in_dims", "out_dim", "nnz", "init"},
                   "node");
    DfgNode n;
    n.id = jn.at("id").get<int>();
    n.name = jn.value("name", "");
    auto kind = op_kind_from_name(jn.at("kind").get<std::string>());
    if (!kind) throw MatforgeError("unknown op kind in DFG document");
    n.kind = *kind;
    for (const auto& d : jn.at("in_dims")) n.in_dims.push_back(dims_from_json(d));
    n.out_dim = dims_from_json(jn.at("out_dim"));
    if (jn.contains("nnz")) n.nnz = jn.at("nnz").get<int>();
    if (jn.contains("init")) n.init = jn.at("init").get<std::vector<int32_t>>();
    doc.dfg.nodes.push_back(std::move(n));
  }
  for (const auto& je : j.at("edges")) {
    reject_unknown(je, {"producer", "consumer", "slot"}, "edge");
    DfgEdge e;
    e.producer = je.at("producer").get<int>();
    e.consumer = je.at("consumer").get<int>();
    e.slot = je.at("slot").get<int>();
    if (e.producer < 0 || e.producer >= int(doc.dfg.nodes.size()))
      throw MatforgeError("edge producer out of range");
    e.shape = doc.dfg.nodes[e.producer].out_dim;
    doc.dfg.edges.push_back(e);
  }
  doc.dfg.validate();
  if (j.contains("profile")) {
    for (auto& [key, val] : j.at("profile").items())
      doc.profile[std::stoi(key)] = {val.at(0).get<int64_t>(), val.at(1).get<int>()};
  }
  if (j.contains("pf")) {
    PfAssignment a;
    a.epf = j.at("pf").at("epf").get<std::vector<int>>();
    a.edge_pf = j.at("pf").at("edge_pf").get<std::vector<int>>();
    doc.pf = std::move(a);
  }
  return doc;
}

}  // namespace matforge
