#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "matforge/cost_model.hpp"
#include "matforge/cost_table.hpp"
#include "matforge/optimizer.hpp"
#include "matforge/simulator.hpp"
#include "matforge/suite.hpp"

using namespace matforge;

namespace {

DfgNode make_node(OpKind k, std::vector<TensorType> in_dims, TensorType out,
                  std::optional<int> nnz = std::nullopt) {
  DfgNode n;
  n.id = 0;
  n.kind = k;
  n.in_dims = std::move(in_dims);
  n.out_dim = out;
  n.nnz = nnz;
  return n;
}

}  // namespace

TEST_CASE("builtin cost table equals the shipped costs.json") {
  auto builtin = CostTable::builtin();
  auto loaded = CostTable::load(std::string(MATFORGE_DEFAULT_TEMPLATES_DIR) +
                                "/costs.json");
  CHECK(builtin == loaded);
}

TEST_CASE("ground-truth latency formulas") {
  auto table = CostTable::builtin();
  auto v = TensorType::vector;
  auto m = TensorType::matrix;

  // elementwise: ceil(E/p) + 4
  auto add88 = make_node(OpKind::MatAdd, {m(8, 8), m(8, 8)}, m(8, 8));
  CHECK(table.latency_at(add88, 1) == 68);
  auto add64 = make_node(OpKind::MatAdd, {v(64), v(64)}, v(64));
  CHECK(table.latency_at(add64, 1) == 68);
  CHECK(table.latency_at(add64, 2) == 36);
  CHECK(table.latency_at(add64, 4) == 20);
  CHECK(table.latency_at(add64, 8) == 12);

  // SpMV: ceil(nnz/p) + rows + 4
  auto spmv = make_node(OpKind::SpMV, {m(16, 16), v(16)}, v(16), 40);
  CHECK(table.latency_at(spmv, 1) == 60);

  // MatMul: ceil(out/p) * inner + 4
  auto mm = make_node(OpKind::MatMul, {m(4, 4), m(4, 4)}, m(4, 4));
  CHECK(table.latency_at(mm, 1) == 68);

  // DotProduct: ceil(N/p) + p + 4
  auto dot = make_node(OpKind::DotProduct, {v(8), v(8)}, TensorType::scalar());
  CHECK(table.latency_at(dot, 4) == 10);

  // pipelined super-node: ceil(E/p) + k*d_stage + c_setup
  CHECK(table.supernode_latency(64, 3, 4) == 26);
}

TEST_CASE("lut table monotone nondecreasing in pf") {
  auto table = CostTable::builtin();
  auto add = make_node(OpKind::MatAdd, {TensorType::vector(64), TensorType::vector(64)},
                       TensorType::vector(64));
  auto mm = make_node(OpKind::MatMul,
                      {TensorType::matrix(8, 8), TensorType::matrix(8, 8)},
                      TensorType::matrix(8, 8));
  for (const auto& n : {add, mm}) {
    int prev = 0;
    for (int pf = 1; pf <= 16; ++pf) {
      int cur = table.lut_at(n, pf);
      CHECK(cur >= prev);
      prev = cur;
    }
  }
}

TEST_CASE("predict_latency basics") {
  CostModelParams p;
  p.models[OpKind::MatAdd] = {0, 0, 1, 1, 0, 0};
  CHECK(predict_latency(p, OpKind::MatAdd, 64, 4) == 16);
  CHECK(predict_latency(p, OpKind::MatAdd, 64, 1) == 64);
}

TEST_CASE("predict_lut and predict_dsp basics") {
  CostModelParams p;
  p.models[OpKind::MatMul] = {0, 0, 1, 0.5, 0.5, 2};
  CHECK(predict_lut(p, OpKind::MatMul, 200, 3) == 400);
  CHECK(predict_dsp(p, OpKind::MatMul, 5) == 10);
  // exact linearity in pf
  for (int a = 1; a < 6; ++a)
    for (int b = 1; b < 6; ++b)
      CHECK(predict_dsp(p, OpKind::MatMul, a + b) ==
            predict_dsp(p, OpKind::MatMul, a) + predict_dsp(p, OpKind::MatMul, b));
}

TEST_CASE("fit recovers exact multiplicative coefficients") {
  // latency = (0.1 + 0.05 pf + 0.85/pf) * 8000 and lut = (0.6 + 0.4 pf) * 1000,
  // integer-valued on this pf set, so the samples carry zero rounding noise
  std::vector<TrainingSample> samples;
  for (int pf : {1, 2, 4, 5, 10, 20}) {
    TrainingSample s;
    s.kind = OpKind::MatAdd;
    s.dims = {TensorType::vector(8000), TensorType::vector(8000)};
    s.pf = pf;
    s.latency = 800 + 400 * int64_t(pf) + 6800 / pf;
    s.lut = 600 + 400 * pf;
    samples.push_back(s);
  }
  auto params = fit(samples, CostTable::builtin());
  const auto& m = params.model(OpKind::MatAdd);
  CHECK(std::abs(m.alpha_l - 0.1) < 1e-9);
  CHECK(std::abs(m.beta_l - 0.05) < 1e-9);
  CHECK(std::abs(m.gamma_l - 0.85) < 1e-9);
  CHECK(std::abs(m.alpha_lut - 0.6) < 1e-9);
  CHECK(std::abs(m.beta_lut - 0.4) < 1e-9);
}

// Prediction error is measured against the PF=1 baseline that anchors the
// model (|pred - lat| / Latency[1]): the multiplicative family scales
// Latency[1], so errors in the small absolute tail at high PF are only
// meaningful relative to that anchor.
TEST_CASE("fit on oracle MatAdd grids predicts within 10%") {
  std::vector<TrainingSpec> specs = {
      {OpKind::MatAdd, {TensorType::vector(64), TensorType::vector(64)}, std::nullopt},
      {OpKind::MatAdd, {TensorType::vector(256), TensorType::vector(256)},
       std::nullopt},
  };
  std::vector<int> grid;
  for (int p = 1; p <= 16; ++p) grid.push_back(p);
  auto table = CostTable::builtin();
  auto samples = gen_training_data(specs, grid, table);
  auto params = fit(samples, table);
  std::map<std::string, int64_t> lat1;
  for (const auto& s : samples)
    if (s.pf == 1) lat1[std::to_string(s.dims[0].rows())] = s.latency;
  for (const auto& s : samples) {
    int64_t pred = predict_latency(params, s.kind,
                                   lat1.at(std::to_string(s.dims[0].rows())), s.pf);
    double rel = std::abs(double(pred - s.latency)) /
                 double(lat1.at(std::to_string(s.dims[0].rows())));
    CHECK(rel <= 0.10);
  }
  const auto& m = params.model(OpKind::MatAdd);
  CHECK(m.alpha_l + m.beta_l + m.gamma_l >= 0.8);
  CHECK(m.alpha_l + m.beta_l + m.gamma_l <= 1.2);
}

TEST_CASE("fit with a single pf value is rank deficient") {
  std::vector<TrainingSample> samples;
  TrainingSample s;
  s.kind = OpKind::MatAdd;
  s.dims = {TensorType::vector(64), TensorType::vector(64)};
  s.pf = 1;
  s.latency = 68;
  s.lut = 104;
  samples.push_back(s);
  CHECK_THROWS_AS(fit(samples, CostTable::builtin()), RankDeficient);
}

TEST_CASE("fit is order independent") {
  auto table = CostTable::builtin();
  auto samples = gen_training_data(default_training_specs(), default_pf_grid(), table);
  auto a = fit(samples, table);
  std::mt19937_64 rng(7);
  std::shuffle(samples.begin(), samples.end(), rng);
  auto b = fit(samples, table);
  for (const auto& [kind, ma] : a.models) {
    const auto& mb = b.model(kind);
    CHECK(ma.alpha_l == doctest::Approx(mb.alpha_l).epsilon(1e-12));
    CHECK(ma.beta_l == doctest::Approx(mb.beta_l).epsilon(1e-12));
    CHECK(ma.gamma_l == doctest::Approx(mb.gamma_l).epsilon(1e-12));
    CHECK(ma.alpha_lut == doctest::Approx(mb.alpha_lut).epsilon(1e-12));
    CHECK(ma.beta_lut == doctest::Approx(mb.beta_lut).epsilon(1e-12));
    CHECK(ma.alpha_dsp == mb.alpha_dsp);
  }
}

TEST_CASE("fit backfills kinds without samples from the descriptor") {
  std::vector<TrainingSample> samples;
  for (int pf : {1, 2, 4, 8}) {
    TrainingSample s;
    s.kind = OpKind::MatAdd;
    s.dims = {TensorType::vector(64), TensorType::vector(64)};
    s.pf = pf;
    s.latency = 64 / pf + 4;
    s.lut = 100;
    samples.push_back(s);
  }
  auto table = CostTable::builtin();
  auto params = fit(samples, table);
  for (OpKind k : {OpKind::Sgn, OpKind::Geq, OpKind::Source, OpKind::Sink}) {
    const auto& m = params.model(k);
    CHECK(m.alpha_l + m.beta_l + m.gamma_l == doctest::Approx(1.0));
    CHECK(m.alpha_lut == doctest::Approx(table.tpl(k).lut_alpha));
  }
}

TEST_CASE("training sample CSV round trip") {
  auto table = CostTable::builtin();
  std::vector<TrainingSpec> specs = {
      {OpKind::SpMV, {TensorType::matrix(16, 32), TensorType::vector(32)}, 128},
      {OpKind::DotProduct, {TensorType::vector(64), TensorType::vector(64)},
       std::nullopt},
  };
  auto samples = gen_training_data(specs, {1, 2, 4, 8}, table);
  auto parsed = training_samples_from_csv(training_samples_to_csv(samples));
  REQUIRE(parsed.size() == samples.size());
  for (size_t i = 0; i < samples.size(); ++i) {
    CHECK(parsed[i].kind == samples[i].kind);
    CHECK(parsed[i].dims == samples[i].dims);
    CHECK(parsed[i].pf == samples[i].pf);
    CHECK(parsed[i].latency == samples[i].latency);
    CHECK(parsed[i].lut == samples[i].lut);
  }
}

TEST_CASE("model JSON round trip") {
  auto table = CostTable::builtin();
  auto params =
      fit(gen_training_data(default_training_specs(), default_pf_grid(), table), table);
  auto back = CostModelParams::from_json_string(params.to_json_string());
  REQUIRE(back.models.size() == params.models.size());
  for (const auto& [kind, m] : params.models) {
    const auto& b = back.model(kind);
    CHECK(b.gamma_l == doctest::Approx(m.gamma_l).epsilon(1e-12));
    CHECK(b.alpha_dsp == m.alpha_dsp);
  }
}

TEST_CASE("predict_latency monotone down to the analytic minimum") {
  auto table = CostTable::builtin();
  auto params =
      fit(gen_training_data(default_training_specs(), default_pf_grid(), table), table);
  const auto& m = params.model(OpKind::DotProduct);
  if (m.beta_l > 1e-12) {
    int pf_star = std::max(1, int(std::sqrt(m.gamma_l / m.beta_l)));
    int64_t prev = predict_latency(params, OpKind::DotProduct, 4096, 1);
    for (int pf = 2; pf <= pf_star; ++pf) {
      int64_t cur = predict_latency(params, OpKind::DotProduct, 4096, pf);
      CHECK(cur <= prev);
      prev = cur;
    }
  }
}
