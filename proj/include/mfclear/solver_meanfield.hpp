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

#ifndef MFCLEAR_SOLVER_MEANFIELD_HPP_
#define MFCLEAR_SOLVER_MEANFIELD_HPP_

#include <vector>

#include "mfclear/solver.hpp"

namespace mfclear {

// Cloud averages on one common-noise path, per node.
struct ConditionalMeans {
  std::vector<VecX> X, x, r, P, y, p;  // M + 1 nodes
  std::vector<VecX> beta;              // M nodes
};

// Particle approximation of the limit system. `cloud` holds K1 cooperative
// and K2 non-cooperative particles per common-noise path, with the price
// coefficient delta taken from the market.
struct MeanFieldSolution {
  EquilibriumSolution cloud;
  std::vector<ConditionalMeans> means;  // per path

  int K1() const { return cloud.layout.N1; }
  int K2() const { return cloud.layout.N2; }
  // price on path `path` at node k; identical for every particle
  const VecX& price(int path, int k) const { return cloud.paths[path].price[k]; }
};

// Cloud noise for common-noise paths [first_path, first_path + paths).
// Cooperative particle a draws the same streams as finite-market agent a under
// the same seed; non-cooperative particles use a separate stream family.
ScenarioSet cloud_scenarios(const MarketParams& params, const CostSpec& costs,
                            const InitialLaws& laws, int K1, int K2, uint64_t seed,
                            uint64_t first_path, int paths, double max_cells = 2e8);

MeanFieldSolution solve_meanfield(const MarketParams& params, const CostSpec& costs,
                                  const ScenarioSet& cloud, const SolverConfig& cfg);

ConditionalMeans conditional_means(const PathSolution& path);

// Control path of particle a on one common-noise path (M nodes).
std::vector<VecX> extract_representative_control(const MeanFieldSolution& sol, int path,
                                                 int particle);

// Mean-field controls of particles 0..N1-1 as inputs for a finite market of
// N1 cooperative agents, with forecasts of u = delta Lambda m1(beta) from the
// limit closed loop.
std::vector<ControlInput> subset_controls(const MarketParams& params, const CostSpec& costs,
                                          const ScenarioSet& cloud, const MeanFieldSolution& sol,
                                          int N1);

}  // namespace mfclear

#endif  // MFCLEAR_SOLVER_MEANFIELD_HPP_
