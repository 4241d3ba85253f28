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

#ifndef MFCLEAR_LQ_ORACLE_HPP_
#define MFCLEAR_LQ_ORACLE_HPP_

#include <vector>

#include "mfclear/market.hpp"
#include "mfclear/scenarios.hpp"

namespace mfclear {

// Linear forward-backward system on the time grid:
//   s' = s + dt rho (A s + Bm b + E c + e + Bu u) + noise
//   b_k = E_k[ b' + dt (rho (F s' + G b' + H c' + f + Hu u') + (1 - rho) gamma J s') ]
//   b_M = rho (Kt s + Lt c + mt) + (1 - rho) J s
//   c' = c + dt R (theta - c) + noise
// u is an optional exogenous input with known forecasts.
struct LinearFBSystem {
  MatX A, Bm, E, Bu;
  VecX e;
  MatX F, G, H, Hu;
  VecX f;
  MatX Kt, Lt;
  VecX mt;
  MatX J;
  MatX R;
  VecX theta;
  // control read-out beta = Cs s + Cb b + Cc c + cb (cooperative systems only)
  MatX Cs, Cb, Cc;
  VecX cb;

  int ns() const { return static_cast<int>(A.rows()); }
  int nb() const { return static_cast<int>(Bm.cols()); }
  int nc() const { return static_cast<int>(E.cols()); }
  int nu() const { return static_cast<int>(Bu.cols()); }
};

// Decoupling field b_k = K_k s_k + L_k c_k + m_k + sum_{k'>=k} Gamma_k[k'-k] E_k[u_k'].
// W, V, w give the pre-expectation quantity at node k >= 1:
//   Z_k = W_k s_k + V_k c_k + w_k + sum_{k'>=k} GammaT_k[k'-k] E_k[u_k'].
struct AffineGains {
  std::vector<MatX> K, L;
  std::vector<VecX> m;
  std::vector<MatX> W, V;
  std::vector<VecX> w;
  std::vector<std::vector<MatX>> Gamma, GammaT;
};

AffineGains affine_backward(const LinearFBSystem& sys, const TimeGrid& grid, double rho,
                            double gamma, double blowup = 1e10);

// Probed linearizations of the market kernel. The mean system acts on
// population means, the deviation systems on one agent's offset from them.
struct FullLinearization {
  LinearFBSystem mean;  // s = (X, x, r), b = (P, y, p), c = (c0, c1, c2)
  LinearFBSystem dev1;  // s = X, b = P, c = c1
  LinearFBSystem dev2;  // s = (x, r), b = (y, p), c = c2
};
struct NoncoopLinearization {
  LinearFBSystem mean;  // s = x, b = y, c = (c0, c2), u = delta Lambda m1(beta)
  LinearFBSystem dev;   // s = x, b = y, c = c2
};

FullLinearization linearize_full(const Market& market);
NoncoopLinearization linearize_noncoop(const Market& market);

// Noise-free closed loop of a cooperative system started at node k from (s, c)
// with gains at full coupling. Returns the control read-out at nodes k..M-1.
std::vector<VecX> predict_controls(const LinearFBSystem& sys, const AffineGains& gains,
                                   const TimeGrid& grid, int k, VecX s, VecX c);

// ---- deterministic reduction -------------------------------------------

struct OracleResult {
  std::vector<MatX> beta;   // M nodes, n x N1
  std::vector<MatX> alpha;  // M nodes, n x N2
  std::vector<MatX> X;      // M + 1 nodes
  std::vector<MatX> x;
  std::vector<MatX> y;
  std::vector<VecX> price;  // M nodes
  double cost = 0.0;        // sum over cooperative agents
  int iterations = 0;
  double residual = 0.0;
};

// Direct minimization of the discretized planner cost over all N1 n M
// control values. The non-cooperative response is a dense linear two-point
// boundary solve; the objective is assembled as an exact quadratic and
// minimized by projected gradient with exact line search.
OracleResult deterministic_oracle(const MarketParams& params, const CostSpec& costs,
                                  const ScenarioLayout& layout, const PathScenario& path,
                                  double tol = 1e-10, int max_iter = 200000);

// Non-cooperative response and planner cost for a given deterministic control.
struct OracleResponse {
  std::vector<MatX> x, y;
  std::vector<VecX> price;
  std::vector<MatX> X;
  double cost = 0.0;
};
OracleResponse oracle_response(const MarketParams& params, const CostSpec& costs,
                               const ScenarioLayout& layout, const PathScenario& path,
                               const std::vector<MatX>& beta);

}  // namespace mfclear

#endif  // MFCLEAR_LQ_ORACLE_HPP_
