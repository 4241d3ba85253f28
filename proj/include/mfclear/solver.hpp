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

#ifndef MFCLEAR_SOLVER_HPP_
#define MFCLEAR_SOLVER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfclear/model.hpp"
#include "mfclear/scenarios.hpp"

namespace mfclear {

enum class CondExpKind { kAuto, kLqExact, kRegression };

CondExpKind parse_cond_exp(const std::string& name);
std::string to_string(CondExpKind kind);

struct SolverConfig {
  double rho_step = 0.1;  // continuation increment
  double damping = 0.5;   // weight of the new backward iterate
  int max_outer = 200;    // continuation attempts, retries included
  int max_inner = 500;    // Picard sweeps per stage
  double fixpoint_tol = 1e-10;
  double stage_tol = 1e-6;  // intermediate coupling strengths
  CondExpKind cond_exp = CondExpKind::kAuto;
  int regression_degree = 2;
  double minimizer_tol = 1e-10;
  int max_halvings = 5;
  double blowup = 1e10;
  double divergence_factor = 1e4;
  int threads = 1;
  // Seed each stage from the affine decoupling field (LQ-exact mode only).
  bool warm_start = true;
};

// Throws ConfigError on out-of-range values.
void check(const SolverConfig& cfg);

struct SolveStats {
  int outer_steps = 0;       // accepted continuation stages, over all path groups
  int inner_iterations = 0;  // Picard sweeps, over all path groups
  int halvings = 0;
  double rho_reached = 0.0;
  double fixpoint_residual = 0.0;  // worst final-stage residual
  double terminal_residual = 0.0;  // worst terminal-condition mismatch
  std::vector<double> residuals;   // final-stage history of the first group

  void merge(const SolveStats& other);
};

// Grid arrays of one Monte Carlo path. Blocks that a solve does not produce
// are left empty.
struct PathSolution {
  uint64_t id = 0;
  std::vector<MatX> X, x, r;  // M + 1 nodes
  std::vector<MatX> P, y, p;  // M + 1 nodes
  std::vector<MatX> beta;     // M nodes, n x N1
  std::vector<MatX> alpha;    // M nodes, n x N2
  std::vector<VecX> price;    // M nodes
};

struct EquilibriumSolution {
  ScenarioLayout layout;
  double delta = 1.0;  // price coefficient used by the solve
  std::vector<PathSolution> paths;
  SolveStats stats;
};

// Time-k forecasts of a future input: at[k][j] is the forecast of the input
// at node k + j made at node k, for k + j < M. at[k][0] is the realized value.
struct Forecasts {
  std::vector<std::vector<VecX>> at;
};

// Exogenous cooperative controls for one path.
struct ControlInput {
  std::vector<MatX> beta;  // M nodes, n x N1
  // Forecasts of u = delta Lambda m1(beta). When absent the controls are
  // treated as known in advance.
  std::optional<Forecasts> forecasts;
};

// Full coupled optimality system.
EquilibriumSolution solve_equilibrium_finite(const MarketParams& params, const CostSpec& costs,
                                             const ScenarioSet& scenarios,
                                             const SolverConfig& cfg);

// Non-cooperative response (x, y, alpha, price) to given cooperative controls.
EquilibriumSolution solve_noncoop_given_beta(const MarketParams& params, const CostSpec& costs,
                                             const ScenarioSet& scenarios,
                                             const std::vector<ControlInput>& beta,
                                             const SolverConfig& cfg);

// Non-cooperative response plus the cooperative inventories driven by the
// given controls at the resulting clearing price.
EquilibriumSolution solve_decentralized(const MarketParams& params, const CostSpec& costs,
                                        const ScenarioSet& scenarios,
                                        const std::vector<ControlInput>& beta_mf,
                                        const SolverConfig& cfg);

// Forecasts of u along a solved equilibrium: the realized value now, and the
// noise-free closed loop of the population-mean system afterwards.
std::vector<Forecasts> equilibrium_forecasts(const MarketParams& params, const CostSpec& costs,
                                             const ScenarioSet& scenarios,
                                             const EquilibriumSolution& sol);

CondExpKind resolve_cond_exp(const SolverConfig& cfg, const CostSpec& costs);

}  // namespace mfclear

#endif  // MFCLEAR_SOLVER_HPP_
