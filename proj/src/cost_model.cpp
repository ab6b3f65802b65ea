#include "matforge/cost_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <json.hpp>

namespace matforge {

const OpModel& CostModelParams::model(OpKind k) const {
  auto it = models.find(k);
  if (it == models.end())
    throw MatforgeError("no cost model for " + std::string(op_kind_name(k)));
  return it->second;
}

int64_t predict_latency(const CostModelParams& p, OpKind kind, int64_t latency1,
                        int pf) {
  const auto& m = p.model(kind);
  double v = (m.alpha_l + m.beta_l * pf + m.gamma_l / pf) * double(latency1);
  return std::max<int64_t>(1, int64_t(std::ceil(v - 1e-9)));
}

int64_t est_node_latency(const CostModelParams& p, const DfgNode& n, int64_t latency1,
                         int pf) {
  if (n.kind == OpKind::Source || n.kind == OpKind::Sink) return latency1;
  return predict_latency(p, n.kind, latency1, pf);
}

int predict_lut(const CostModelParams& p, OpKind kind, int lut1, int pf) {
  const auto& m = p.model(kind);
  double v = (m.alpha_lut + m.beta_lut * pf) * double(lut1);
  return std::max(0, int(std::ceil(v - 1e-9)));
}

int predict_dsp(const CostModelParams& p, OpKind kind, int pf) {
  return p.model(kind).alpha_dsp * pf;
}

namespace {

std::string dims_key(const std::vector<TensorType>& dims) {
  std::string key;
  for (const auto& d : dims) {
    if (!key.empty()) key += "|";
    if (d.rank == 0) key += "s";
    else if (d.rank == 1) key += std::to_string(d.rows());
    else key += std::to_string(d.rows()) + "x" + std::to_string(d.cols());
  }
  return key;
}

TensorType dims_from_token(const std::string& tok) {
  if (tok == "s") return TensorType::scalar();
  auto x = tok.find('x');
  if (x == std::string::npos) return TensorType::vector(std::stoi(tok));
  return TensorType::matrix(std::stoi(tok.substr(0, x)), std::stoi(tok.substr(x + 1)));
}

}  // namespace

CostModelParams fit(const std::vector<TrainingSample>& samples, const CostTable& table) {
  // group by kind, then by dimension set; the pf=1 sample of each set is
  // the normalization base
  std::map<OpKind, std::map<std::string, std::vector<const TrainingSample*>>> groups;
  for (const auto& s : samples) groups[s.kind][dims_key(s.dims)].push_back(&s);

  CostModelParams out;
  for (auto& [kind, by_dims] : groups) {
    std::vector<double> pfs, lat_ratio, lut_ratio;
    std::set<int> distinct_pf;
    for (auto& [key, set] : by_dims) {
      const TrainingSample* base = nullptr;
      for (const auto* s : set)
        if (s->pf == 1) base = s;
      if (!base)
        throw MatforgeError("dimension set " + key + " for " +
                            std::string(op_kind_name(kind)) + " lacks a pf=1 sample");
      for (const auto* s : set) {
        pfs.push_back(double(s->pf));
        distinct_pf.insert(s->pf);
        lat_ratio.push_back(double(s->latency) / double(base->latency));
        lut_ratio.push_back(double(s->lut) / double(base->lut));
      }
    }
    int n = int(pfs.size());
    Eigen::MatrixXd latX(n, 3), lutX(n, 2);
    Eigen::VectorXd latY(n), lutY(n);
    for (int i = 0; i < n; ++i) {
      latX(i, 0) = 1.0;
      latX(i, 1) = pfs[i];
      latX(i, 2) = 1.0 / pfs[i];
      lutX(i, 0) = 1.0;
      lutX(i, 1) = pfs[i];
      latY(i) = lat_ratio[i];
      lutY(i) = lut_ratio[i];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> latQr(latX);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> lutQr(lutX);
    latQr.setThreshold(1e-8);
    lutQr.setThreshold(1e-8);
    if (latQr.rank() < 3 || lutQr.rank() < 2)
      throw RankDeficient("need more distinct PF values to fit " +
                          std::string(op_kind_name(kind)) + " (have " +
                          std::to_string(distinct_pf.size()) + ")");
    Eigen::Vector3d lc = latQr.solve(latY);
    Eigen::Vector2d uc = lutQr.solve(lutY);
    OpModel m;
    m.alpha_l = lc(0);
    m.beta_l = lc(1);
    m.gamma_l = lc(2);
    m.alpha_lut = uc(0);
    m.beta_lut = uc(1);
    m.alpha_dsp = table.tpl(kind).dsp_per_pe;
    out.models[kind] = m;
  }
  // kinds without samples (scalar combinational ops, boundary nodes) fall
  // back to the template descriptor's static coefficients
  for (const auto& [kind, tp] : table.templates) {
    if (out.models.count(kind)) continue;
    OpModel m;
    m.alpha_l = 0;
    m.beta_l = 0;
    m.gamma_l = 1;
    m.alpha_lut = tp.lut_alpha;
    m.beta_lut = tp.lut_beta;
    m.alpha_dsp = tp.dsp_per_pe;
    out.models[kind] = m;
  }
  return out;
}

std::string CostModelParams::to_json_string() const {
  nlohmann::json j;
  j["schema_version"] = 1;
  for (const auto& [kind, m] : models) {
    j["models"][std::string(op_kind_name(kind))] = {
        {"alpha_l", m.alpha_l},   {"beta_l", m.beta_l},
        {"gamma_l", m.gamma_l},   {"alpha_lut", m.alpha_lut},
        {"beta_lut", m.beta_lut}, {"alpha_dsp", m.alpha_dsp}};
  }
  return j.dump(2);
}

CostModelParams CostModelParams::from_json_string(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  CostModelParams p;
  for (auto& [name, jm] : j.at("models").items()) {
    auto kind = op_kind_from_name(name);
    if (!kind) throw MatforgeError("unknown op kind in cost model file: " + name);
    OpModel m;
    m.alpha_l = jm.at("alpha_l").get<double>();
    m.beta_l = jm.at("beta_l").get<double>();
    m.gamma_l = jm.at("gamma_l").get<double>();
    m.alpha_lut = jm.at("alpha_lut").get<double>();
    m.beta_lut = jm.at("beta_lut").get<double>();
    m.alpha_dsp = jm.at("alpha_dsp").get<int>();
    p.models[*kind] = m;
  }
  return p;
}

std::string training_samples_to_csv(const std::vector<TrainingSample>& samples) {
  std::ostringstream os;
  os << "kind,dims,pf,latency,lut\n";
  for (const auto& s : samples)
    os << op_kind_name(s.kind) << "," << dims_key(s.dims) << "," << s.pf << ","
       << s.latency << "," << s.lut << "\n";
  return os.str();
}

std::vector<TrainingSample> training_samples_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);  // header
  std::vector<TrainingSample> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind_s, dims_s, pf_s, lat_s, lut_s;
    std::getline(ls, kind_s, ',');
    std::getline(ls, dims_s, ',');
    std::getline(ls, pf_s, ',');
    std::getline(ls, lat_s, ',');
    std::getline(ls, lut_s, ',');
    TrainingSample s;
    auto kind = op_kind_from_name(kind_s);
    if (!kind) throw MatforgeError("bad kind in training CSV: " + kind_s);
    s.kind = *kind;
    std::istringstream ds(dims_s);
    std::string tok;
    while (std::getline(ds, tok, '|')) s.dims.push_back(dims_from_token(tok));
    s.pf = std::stoi(pf_s);
    s.latency = std::stoll(lat_s);
    s.lut = std::stoi(lut_s);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace matforge
