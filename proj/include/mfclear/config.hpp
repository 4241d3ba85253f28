// Copyright 2026 The mfclear Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MFCLEAR_CONFIG_HPP_
#define MFCLEAR_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "mfclear/model.hpp"
#include "mfclear/scenarios.hpp"
#include "mfclear/solver.hpp"

namespace mfclear {

struct SimulationConfig {
  int paths = 512;
  uint64_t seed = 1;
  double max_cells = 2e8;
};

struct MeanFieldConfig {
  int K1 = 1000;
  int K2 = 1000;
  int path_batch = 16;  // common-noise paths held in memory at once
};

struct ExperimentConfig {
  // optimality
  int perturbations = 50;
  double epsilon = 0.1;
  uint64_t perturbation_seed = 7;
  // convergence
  std::vector<int> ladder = {4, 8, 16, 32, 64};
  int convergence_paths = 64;
  // delta sweep and monotonicity fit
  std::vector<double> deltas = {1.0 / 64, 1.0 / 32, 1.0 / 16, 1.0 / 8, 1.0 / 4, 1.0 / 2, 1.0};
  int sweep_N1 = 4;
  int sweep_paths = 16;
  int monotonicity_pairs = 10000;
  int monotonicity_N2 = 128;
};

struct Config {
  MarketParams market;
  CostSpec costs;
  InitialLaws laws;
  SolverConfig solver;
  SimulationConfig sim;
  MeanFieldConfig meanfield;
  ExperimentConfig experiments;
};

// Parses a YAML document. Matrices accept a scalar (times the identity, or
// on the leading diagonal when not square) or a list of rows; vectors accept a
// scalar (filled) or a list. Throws ConfigError naming the key and line.
Config parse_config(const std::string& text);
Config load_config(const std::string& file);

// Seed from the MFCLEAR_SEED environment variable when set.
uint64_t seed_override(uint64_t configured);

// Copy of `c` with population sizes (N1, N2); delta follows.
MarketParams with_populations(const MarketParams& p, int N1, int N2);

}  // namespace mfclear

#endif  // MFCLEAR_CONFIG_HPP_
