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

#ifndef MFCLEAR_METRICS_HPP_
#define MFCLEAR_METRICS_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mfclear/market.hpp"
#include "mfclear/solver.hpp"

namespace mfclear {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // Monte Carlo standard error over paths
};

// Sample mean and standard error of the mean; se = 0 for a single sample.
Estimate mean_se(const VecX& samples);

// Discrete cost functionals with left-endpoint sums over the solver grid.
struct CostReport {
  MatX J1_paths;  // paths x N1
  MatX J2_paths;  // paths x N2
  std::vector<Estimate> J1;  // per cooperative agent
  std::vector<Estimate> J2;  // per non-cooperative agent
  Estimate J1_sum;
  Estimate J2_sum;
  Estimate J1_avg;  // agent average; the representative cost on a cloud

  VecX J1_sum_paths() const { return J1_paths.rowwise().sum(); }
};

// Estimates from per-path costs; J1_paths may have zero columns.
CostReport cost_report(MatX J1_paths, MatX J2_paths);

// The cooperative mean is taken over the solution's own population, so a
// cloud solution gives the mean-field costs.
CostReport eval_costs(const EquilibriumSolution& sol, const ScenarioSet& scenarios,
                      const MarketParams& params, const CostSpec& costs);

// Per node, the max over paths of |sum beta + sum alpha|. On a cloud, where
// delta is a free coefficient, |delta mean(beta) + mean(alpha)| instead.
std::vector<double> clearing_residuals(const EquilibriumSolution& sol);

// max |beta - Proj(beta - d_beta H)| over nodes, agents and paths.
double stationarity_residual(const EquilibriumSolution& sol, const ScenarioSet& scenarios,
                             const MarketParams& params, const CostSpec& costs);

// Sorted coupling for equal-size samples on the line.
double wasserstein2_1d(const std::vector<double>& a, const std::vector<double>& b);
// Row vectors of an n x N block; n must be 1.
double wasserstein2_1d(const MatX& a, const MatX& b);
// Quantile coupling for samples of any sizes.
double wasserstein2_quantile(std::vector<double> a, std::vector<double> b);

// max(N1^(-1/2), sup_k E[W2(empirical_k, cloud_k)^2]^(1/2)) where the
// expectation runs over paths. Both arguments hold per-path node blocks.
double estimate_eps_N1(const std::vector<std::vector<MatX>>& finite,
                       const std::vector<std::vector<MatX>>& cloud, int N1);

// ---- monotonicity --------------------------------------------------------

struct MonotonicityRecord {
  double t = 0.0;
  double lhs = 0.0;    // pairing of drift and driver differences
  double bound = 0.0;  // -gamma_f A + delta C B
  bool pass = true;
  double terminal_lhs = 0.0;
  double terminal_bound = 0.0;  // gamma1g |dX|^2 + gamma2g (|dx|^2 + |dr|^2)
  bool terminal_pass = true;
  double forward_sq = 0.0;   // A
  double backward_sq = 0.0;  // B
};

// States u and v share the information part (c0, c1, c2); only differences
// enter, so affine terms cancel.
MonotonicityRecord monotonicity_check(const NodeState& u, const NodeState& v, double t,
                                      const MarketParams& params, const CostSpec& costs,
                                      double C);

struct MonotonicityFit {
  double delta = 0.0;
  int pairs = 0;
  double min_C = 0.0;       // smallest C making every sampled pair pass
  double worst_excess = 0;  // delta * min_C
  double worst_terminal_gap = 0.0;  // min over pairs of lhs - bound, terminal
};

// Random pairs built around the worst block-constant direction: backward
// blocks are drawn, forward blocks complete them to the maximizing
// combination, then each agent is perturbed by a relative factor `jitter`.
MonotonicityFit fit_monotonicity_constant(const MarketParams& params, const CostSpec& costs,
                                          int pairs, uint64_t seed, double jitter = 0.05);

// ---- convergence rate ----------------------------------------------------

struct RateFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 1.0;
};

// Least squares of log(error) on log(N1). Needs >= 4 points with positive
// errors and at least two distinct N1.
RateFit fit_convergence_rate(const std::vector<double>& N1, const std::vector<double>& error);

// ---- serialization -------------------------------------------------------

struct Diagnostics {
  bool meanfield = false;  // costs describe a particle cloud
  std::vector<double> clearing_residual;
  std::optional<double> stationarity_residual;
  std::optional<CostReport> costs;
  std::optional<double> eps_N1;
  std::vector<MonotonicityRecord> monotonicity;
  std::optional<RateFit> rate_fit;
  std::optional<SolveStats> stats;
};

std::string to_json(const Diagnostics& d);

}  // namespace mfclear

#endif  // MFCLEAR_METRICS_HPP_
