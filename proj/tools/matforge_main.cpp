// matforge command line: compile, train, build, bench.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "matforge/codegen.hpp"
#include "matforge/cost_model.hpp"
#include "matforge/dfg_json.hpp"
#include "matforge/frontend.hpp"
#include "matforge/optimizer.hpp"
#include "matforge/scheduler.hpp"
#include "matforge/simulator.hpp"
#include "matforge/suite.hpp"

namespace fs = std::filesystem;
using namespace matforge;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MatforgeError("cannot open " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw MatforgeError("cannot write " + path);
  out << text;
}

std::string templates_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv("MATFORGE_TEMPLATES")) return env;
  return MATFORGE_DEFAULT_TEMPLATES_DIR;
}

struct BuildFlags {
  int64_t budget_lut = 20800;
  int64_t budget_dsp = 90;
  std::string optimizer = "greedy";
  std::string metric = "latency-per-lut";
  bool no_pipeline = false;
  bool pf1_only = false;
  bool round_nearest = false;
  uint64_t seed = 1;
  int width = 16;
  std::string templates;
  std::string model_path;
  bool retrain = false;
};

void add_build_flags(CLI::App* cmd, BuildFlags* f) {
  cmd->add_option("--budget-lut", f->budget_lut, "LUT budget");
  cmd->add_option("--budget-dsp", f->budget_dsp, "DSP budget");
  cmd->add_option("--optimizer", f->optimizer, "greedy|blackbox")
      ->check(CLI::IsMember({"greedy", "blackbox"}));
  cmd->add_option("--metric", f->metric, "latency|latency-per-lut")
      ->check(CLI::IsMember({"latency", "latency-per-lut"}));
  cmd->add_flag("--no-pipeline", f->no_pipeline, "disable super-node fusion");
  cmd->add_flag("--pf1-only", f->pf1_only, "skip optimization, keep all PFs 1");
  cmd->add_flag("--round-nearest", f->round_nearest,
                "black-box rounding to nearest instead of down");
  cmd->add_option("--seed", f->seed, "RNG seed");
  cmd->add_option("--width", f->width, "data word width");
  cmd->add_option("--templates", f->templates,
                  "template dir (default: MATFORGE_TEMPLATES env or built-in)");
  cmd->add_option("--model", f->model_path, "trained cost-model JSON");
  cmd->add_flag("--train", f->retrain, "(re)train the cost model");
}

CostModelParams obtain_model(const BuildFlags& f, const CostTable& table) {
  if (!f.model_path.empty() && !f.retrain) {
    if (!fs::exists(f.model_path))
      throw MatforgeError("cost model file missing: " + f.model_path +
                          " (pass --train to regenerate)");
    return CostModelParams::from_json_string(read_file(f.model_path));
  }
  auto samples = gen_training_data(default_training_specs(), default_pf_grid(), table);
  auto params = fit(samples, table);
  if (!f.model_path.empty()) write_file(f.model_path, params.to_json_string());
  return params;
}

struct CaseResult {
  std::string name;
  bool ok = false;
  std::string error;
  int64_t pf1_sim = 0;
  int64_t greedy_est = 0, greedy_sim = 0;
  int64_t blackbox_est = 0, blackbox_sim = 0;
  double greedy_wall = 0, blackbox_wall = 0;
};

int64_t simulate_makespan(const MatrixDfg& dfg, const PfAssignment& a,
                          bool pipelining, const CostTable& table, uint64_t seed) {
  auto schedule = build_schedule(dfg, a, pipelining, table);
  auto rep = run(dfg, a, schedule, random_inputs(dfg, seed), table);
  return rep.total_cycles;
}

CaseResult run_case(const std::string& name, const MatrixDfg& dfg,
                    const CostModelParams& params, const CostTable& table,
                    const BuildFlags& f) {
  CaseResult r;
  r.name = name;
  try {
    ResourceBudget budget{f.budget_lut, f.budget_dsp};
    auto profile1 = profile_pf1(dfg, table, f.seed);
    BenefitMetric metric = f.metric == "latency" ? BenefitMetric::LatencyReduction
                                                 : BenefitMetric::LatencyPerLut;
    r.pf1_sim =
        simulate_makespan(dfg, PfAssignment::ones(dfg), !f.no_pipeline, table, f.seed);
    auto greedy = greedy_optimize(dfg, params, profile1, budget, metric, table);
    r.greedy_est = greedy.est_latency;
    r.greedy_wall = greedy.wall_time_sec;
    r.greedy_sim =
        simulate_makespan(dfg, greedy.assignment, !f.no_pipeline, table, f.seed);
    BlackboxOptions bopts;
    bopts.seed = f.seed;
    bopts.round_to_nearest = f.round_nearest;
    auto bb = blackbox_optimize(dfg, params, profile1, budget, table, bopts);
    r.blackbox_est = bb.est_latency;
    r.blackbox_wall = bb.wall_time_sec;
    r.blackbox_sim =
        simulate_makespan(dfg, bb.assignment, !f.no_pipeline, table, f.seed);
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  return r;
}

int cmd_compile(const std::string& src, const std::string& out, bool dump_ast) {
  auto ast = parse(read_file(src));
  if (dump_ast) std::cout << pretty_print(ast);
  auto symbols = type_check(ast);
  auto dfg = lower_to_dfg(ast, symbols);
  dfg.validate();
  std::string path = out;
  if (path.empty()) path = fs::path(src).stem().string() + ".dfg.json";
  write_file(path, dfg_to_json(dfg).dump(2) + "\n");
  std::cout << "wrote " << path << " (" << dfg.nodes.size() << " nodes, "
            << dfg.edges.size() << " edges)\n";
  return 0;
}

int cmd_train(const std::string& out, const std::string& csv,
              const std::string& tdir) {
  auto lib = TemplateLibrary::load(templates_dir(tdir));
  auto samples = gen_training_data(default_training_specs(), default_pf_grid(),
                                   lib.costs);
  if (!csv.empty()) write_file(csv, training_samples_to_csv(samples));
  auto params = fit(samples, lib.costs);
  write_file(out, params.to_json_string());
  std::cout << "trained " << params.models.size() << " op models from "
            << samples.size() << " samples -> " << out << "\n";
  return 0;
}

int cmd_build(const std::string& src, const BuildFlags& f,
              const std::string& emit_dir, const std::string& report_path) {
  auto stage = [](const std::string& s) { return "[" + s + "] "; };
  MatrixDfg dfg;
  try {
    auto ast = parse(read_file(src));
    auto symbols = type_check(ast);
    dfg = lower_to_dfg(ast, symbols);
    dfg.validate();
  } catch (const std::exception& e) {
    throw MatforgeError(stage("frontend") + e.what());
  }

  auto lib = TemplateLibrary::load(templates_dir(f.templates));
  CostModelParams params;
  try {
    params = obtain_model(f, lib.costs);
  } catch (const std::exception& e) {
    throw MatforgeError(stage("cost-model") + e.what());
  }

  Profile1 profile1;
  OptimizerResult opt;
  try {
    profile1 = profile_pf1(dfg, lib.costs, f.seed);
    ResourceBudget budget{f.budget_lut, f.budget_dsp};
    if (f.pf1_only) {
      opt.assignment = PfAssignment::ones(dfg);
      opt.est_latency = est_total_latency(dfg, params, profile1, opt.assignment);
      opt.usage = usage(dfg, params, profile1, opt.assignment, lib.costs);
    } else if (f.optimizer == "blackbox") {
      BlackboxOptions bopts;
      bopts.seed = f.seed;
      bopts.round_to_nearest = f.round_nearest;
      opt = blackbox_optimize(dfg, params, profile1, budget, lib.costs, bopts);
    } else {
      BenefitMetric metric = f.metric == "latency"
                                 ? BenefitMetric::LatencyReduction
                                 : BenefitMetric::LatencyPerLut;
      opt = greedy_optimize(dfg, params, profile1, budget, metric, lib.costs);
    }
  } catch (const std::exception& e) {
    throw MatforgeError(stage("optimize") + e.what());
  }

  Schedule schedule;
  VerilogDesign design;
  try {
    schedule = build_schedule(dfg, opt.assignment, !f.no_pipeline, lib.costs);
    design = emit(dfg, opt.assignment, schedule, lib, f.width, &params, &profile1);
  } catch (const std::exception& e) {
    throw MatforgeError(stage("emit") + e.what());
  }

  auto structural = structural_check(design, dfg, opt.assignment);
  if (!structural.ok()) {
    for (const auto& v : structural.violations)
      std::cerr << stage("structural") << v << "\n";
    return 1;
  }

  SimReport sim;
  try {
    sim = run(dfg, opt.assignment, schedule, random_inputs(dfg, f.seed), lib.costs);
  } catch (const std::exception& e) {
    throw MatforgeError(stage("simulate") + e.what());
  }

  fs::path dir = emit_dir.empty() ? fs::path(".") : fs::path(emit_dir);
  fs::create_directories(dir);
  std::string base = fs::path(src).stem().string();
  write_file((dir / (base + ".v")).string(), design.text);
  write_file((dir / (base + ".manifest.json")).string(),
             manifest_to_json(design, dfg).dump(2) + "\n");

  nlohmann::json report;
  report["schema_version"] = 1;
  report["source"] = src;
  report["est_latency"] = opt.est_latency;
  report["sim_latency"] = sim.total_cycles;
  report["usage"] = {{"lut", opt.usage.lut}, {"dsp", opt.usage.dsp}};
  report["budget"] = {{"lut", f.budget_lut}, {"dsp", f.budget_dsp}};
  report["optimizer"] = f.pf1_only ? "pf1" : f.optimizer;
  report["wall_time_sec"] = opt.wall_time_sec;
  report["iterations"] = opt.iterations;
  nlohmann::json pfs = nlohmann::json::array();
  for (const auto& n : dfg.nodes)
    pfs.push_back({{"node", n.id},
                   {"name", n.name},
                   {"kind", op_kind_name(n.kind)},
                   {"pf", opt.assignment.epf[size_t(n.id)]}});
  report["pf_table"] = pfs;
  std::string rpath = report_path.empty() ? (dir / (base + ".report.json")).string()
                                          : report_path;
  write_file(rpath, report.dump(2) + "\n");
  std::cout << "est " << opt.est_latency << " cycles, simulated "
            << sim.total_cycles << " cycles, usage " << opt.usage.lut << " LUT / "
            << opt.usage.dsp << " DSP\n";
  return 0;
}

int cmd_bench(const std::string& suite_dir, const BuildFlags& f,
              const std::string& out_csv) {
  auto lib = TemplateLibrary::load(templates_dir(f.templates));
  auto params = obtain_model(f, lib.costs);

  std::vector<SuiteCase> cases;
  if (suite_dir.empty()) {
    cases = benchmark_suite();
  } else {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(suite_dir))
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    if (files.empty())
      throw MatforgeError("no DFG JSON files in suite dir: " + suite_dir);
    for (const auto& p : files) {
      auto doc = dfg_from_json(nlohmann::json::parse(read_file(p.string())));
      cases.push_back({p.stem().string(), std::move(doc.dfg)});
    }
  }

  std::ostringstream csv;
  csv << "name,ok,pf1_sim,greedy_est,greedy_sim,greedy_wall_sec,"
      << "blackbox_est,blackbox_sim,blackbox_wall_sec,speedup_vs_pf1\n";
  double log_greedy = 0, log_bb = 0, log_speedup = 0;
  int ok_count = 0;
  for (const auto& c : cases) {
    auto r = run_case(c.name, c.dfg, params, lib.costs, f);
    if (!r.ok) {
      csv << r.name << ",error(" << r.error << "),,,,,,,,\n";
      continue;
    }
    double speedup = double(r.pf1_sim) / double(r.greedy_sim);
    csv << r.name << ",ok," << r.pf1_sim << "," << r.greedy_est << ","
        << r.greedy_sim << "," << r.greedy_wall << "," << r.blackbox_est << ","
        << r.blackbox_sim << "," << r.blackbox_wall << "," << speedup << "\n";
    log_greedy += std::log(double(r.greedy_sim));
    log_bb += std::log(double(r.blackbox_sim));
    log_speedup += std::log(speedup);
    ++ok_count;
  }
  if (ok_count > 0) {
    csv << "geomean,," << "," << "," << std::exp(log_greedy / ok_count) << ",,"
        << "," << std::exp(log_bb / ok_count) << ","
        << "," << std::exp(log_speedup / ok_count) << "\n";
  }
  if (out_csv.empty())
    std::cout << csv.str();
  else
    write_file(out_csv, csv.str());
  return ok_count == int(cases.size()) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matforge: matrix DSL to parallelized Verilog"};
  app.require_subcommand(1);

  std::string src, out, csv, emit_dir, report_path, suite_dir;
  bool dump_ast = false;
  BuildFlags flags;

  auto* compile = app.add_subcommand("compile", "DSL source -> DFG JSON");
  compile->add_option("src", src, "input .mfd source")->required();
  compile->add_option("-o,--output", out, "output dfg.json path");
  compile->add_flag("--dump-ast", dump_ast, "print the parsed program");

  auto* train = app.add_subcommand("train", "fit the PF cost model");
  train->add_option("-o,--output", out, "model JSON path")
      ->default_val("matforge_model.json");
  train->add_option("--csv", csv, "also dump training samples as CSV");
  train->add_option("--templates", flags.templates, "template dir");

  auto* build = app.add_subcommand("build", "full pipeline: source -> Verilog");
  build->add_option("src", src, "input .mfd source")->required();
  add_build_flags(build, &flags);
  build->add_option("--emit-dir", emit_dir, "output directory");
  build->add_option("--report", report_path, "report JSON path");

  auto* bench = app.add_subcommand("bench", "run the benchmark suite");
  bench->add_option("suite", suite_dir, "directory of DFG JSON files "
                                        "(default: built-in synthetic suite)");
  add_build_flags(bench, &flags);
  std::string bench_csv;
  bench->add_option("-o,--output", bench_csv, "summary CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (compile->parsed()) return cmd_compile(src, out, dump_ast);
    if (train->parsed()) return cmd_train(out, csv, flags.templates);
    if (build->parsed()) return cmd_build(src, flags, emit_dir, report_path);
    if (bench->parsed()) return cmd_bench(suite_dir, flags, bench_csv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
