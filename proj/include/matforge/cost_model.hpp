#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "matforge/cost_table.hpp"
#include "matforge/dfg.hpp"

namespace matforge {

// Regression coefficients per operation:
//   Latency[pf] = (alpha_l + beta_l*pf + gamma_l/pf) * Latency[1]
//   LUT[pf]     = (alpha_lut + beta_lut*pf) * LUT[1]
//   DSP[pf]     = alpha_dsp * pf
// alpha_dsp comes from the template descriptor, not from fitting.
struct OpModel {
  double alpha_l = 0, beta_l = 0, gamma_l = 1;
  double alpha_lut = 1, beta_lut = 0;
  int alpha_dsp = 0;
};

struct CostModelParams {
  std::map<OpKind, OpModel> models;

  const OpModel& model(OpKind k) const;
  std::string to_json_string() const;
  static CostModelParams from_json_string(const std::string& text);
};

struct TrainingSample {
  OpKind kind;
  std::vector<TensorType> dims;
  int pf = 1;
  int64_t latency = 0;
  int lut = 0;
};

// latency1/lut1 measured at PF=1, by node id.
struct Profile1Entry {
  int64_t latency1 = 0;
  int lut1 = 0;
};
using Profile1 = std::map<NodeId, Profile1Entry>;

int64_t predict_latency(const CostModelParams& p, OpKind kind, int64_t latency1, int pf);

// Source/Sink boundary nodes have fixed latency; everything else goes
// through the regression model.
int64_t est_node_latency(const CostModelParams& p, const DfgNode& n, int64_t latency1,
                         int pf);
int predict_lut(const CostModelParams& p, OpKind kind, int lut1, int pf);
int predict_dsp(const CostModelParams& p, OpKind kind, int pf);

struct RankDeficient : MatforgeError {
  using MatforgeError::MatforgeError;
};

// Least squares on normalized ratios: latency/latency1 against [1, pf, 1/pf]
// and lut/lut1 against [1, pf]. The PF=1 sample of each dimension set
// provides the normalization base. alpha_dsp is copied from `table`.
CostModelParams fit(const std::vector<TrainingSample>& samples, const CostTable& table);

// CSV round trip: kind,dims,pf,latency,lut
std::string training_samples_to_csv(const std::vector<TrainingSample>& samples);
std::vector<TrainingSample> training_samples_from_csv(const std::string& text);

}  // namespace matforge
