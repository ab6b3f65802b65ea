#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matforge/dfg.hpp"
#include "matforge/simulator.hpp"

namespace matforge {

struct SuiteCase {
  std::string name;
  MatrixDfg dfg;
};

// Tree-score pipeline: SpMV projection -> small matmuls -> tanh -> hadamard
// -> argmax.
MatrixDfg bonsai_dfg(int features, int proj, int classes, int nnz);

// Distance kernel: matvec -> elementwise -> exp -> accumulate -> argmax.
MatrixDfg protonn_dfg(int features, int proj, int prototypes);

// Long chain of same-shape elementwise stages (pipelining stress).
MatrixDfg lt_chain_dfg(int elems, int stages);

// The shipped 20-case synthetic benchmark suite.
std::vector<SuiteCase> benchmark_suite();

// Family with increasing SpMV nonzero share, same downstream structure.
std::vector<SuiteCase> spmv_sweep();

// Small random DFG for property campaigns; shape-valid by construction.
MatrixDfg random_dfg(uint64_t seed, int max_ops = 5, int max_dim = 8);

// Shipped training configuration: >= 3 dimension sets per trainable kind,
// PF grid 1..32.
std::vector<TrainingSpec> default_training_specs();
std::vector<int> default_pf_grid();

}  // namespace matforge
