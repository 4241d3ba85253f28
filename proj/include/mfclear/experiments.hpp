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

#ifndef MFCLEAR_EXPERIMENTS_HPP_
#define MFCLEAR_EXPERIMENTS_HPP_

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "mfclear/config.hpp"
#include "mfclear/metrics.hpp"

namespace mfclear {

// All experiments take the market, paths, seed and thread count from `cfg`.

struct ClearingResult {
  std::vector<double> per_node;
  double max_residual = 0.0;
  SolveStats stats;
};

ClearingResult run_clearing(const Config& cfg);

struct PerturbationRow {
  int index = 0;
  double epsilon = 0.0;
  Estimate delta_J;     // J1-sum(perturbed) - J1-sum(equilibrium), coupled paths
  double norm_sq = 0.0;  // E sum_i sum_k dt |Delta|^2
  double bound = 0.0;    // lambda_beta / 2 eps^2 norm_sq
  bool pass = false;     // delta_J >= bound - 3 se
};

struct OptimalityResult {
  Estimate base_cost;
  std::vector<PerturbationRow> rows;
  int violations = 0;
};

// Perturbations Delta^i_k = a_k + B_k xi^i with Gaussian a_k, B_k. Each is
// known at time zero given the initial inventories, so the non-cooperative
// side forecasts the perturbed input exactly.
OptimalityResult run_optimality(const Config& cfg);

struct LadderRow {
  int N1 = 0;
  int N2 = 0;
  double control_gap = 0.0;  // sqrt(E sum_k dt [mean_i |dbeta|^2 + |dprice|^2])
  Estimate cost_gap_equilibrium;    // mean_i |E J1^i(finite) - E J1^i(cloud)|
  Estimate cost_gap_decentralized;  // same with mean-field controls in the market
  double eps_N1 = 0.0;
};

struct ConvergenceResult {
  std::vector<LadderRow> rows;
  RateFit fit;
  int cost_gap_equilibrium_inversions = 0;
  int cost_gap_decentralized_inversions = 0;
};

// Finite markets N1 in the ladder with N2 = N1 / delta against one particle
// cloud; agent i and particle i draw the same noise.
ConvergenceResult run_convergence(const Config& cfg);

struct SweepRow {
  double delta = 0.0;
  int N1 = 0;
  int N2 = 0;
  bool converged = false;
  std::string failure;  // error kind when not converged
  SolveStats stats;
  double clearing = 0.0;
};

struct DeltaSweepResult {
  std::vector<SweepRow> rows;
  std::optional<double> first_failure;
  std::vector<MonotonicityFit> fits;
  double constant_spread = 0.0;  // max / min fitted constant across fits
};

DeltaSweepResult run_delta_sweep(const Config& cfg);

// max over min of the fitted constants; infinity when some fit is zero and
// another is not, 1 when all are zero.
double constant_spread(const std::vector<MonotonicityFit>& fits);

// CSV writers; each starts with a "# mfclear-<name> schema=N" line.
void write_clearing_csv(const ClearingResult& r, const TimeGrid& grid, std::ostream& os);
void write_optimality_csv(const OptimalityResult& r, std::ostream& os);
void write_convergence_csv(const ConvergenceResult& r, std::ostream& os);
void write_convergence_fit_csv(const ConvergenceResult& r, std::ostream& os);
void write_delta_sweep_csv(const DeltaSweepResult& r, std::ostream& os);
void write_monotonicity_csv(const DeltaSweepResult& r, std::ostream& os);

}  // namespace mfclear

#endif  // MFCLEAR_EXPERIMENTS_HPP_
