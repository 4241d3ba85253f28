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

#ifndef MFCLEAR_MARKET_HPP_
#define MFCLEAR_MARKET_HPP_

#include "mfclear/hamiltonian.hpp"
#include "mfclear/model.hpp"

namespace mfclear {

// Everything the discrete system sees at one node of one path. Backward
// blocks at node k < M hold conditional expectations of next-node values.
struct NodeState {
  MatX X, x, r;  // forward: n x N1, n x N2, n x N2
  MatX P, y, p;  // backward
  VecX c0;       // m0
  MatX c1, c2;   // m1 x N1, m2 x N2
};

struct NodeControls {
  MatX beta;  // n x N1
  VecX price;
};

// The coupled cooperative / non-cooperative system evaluated node by node.
// Population sizes come from the blocks, so the same object serves finite
// markets and particle clouds.
class Market {
 public:
  Market(const MarketParams& params, const CostSpec& costs, double delta,
         double minimizer_tol = 1e-10);

  int n() const { return params_.n; }
  double delta() const { return coef_.delta; }
  const MarketParams& params() const { return params_; }
  const CostSpec& costs() const { return costs_; }
  const HamiltonianCoefficients<double>& coef() const { return coef_; }
  bool constrained() const { return coef_.boxed; }

  NodeControls controls(const NodeState& s) const;

  // Forward drifts (before homotopy scaling).
  void drifts(const NodeState& s, const NodeControls& u, MatX& dX, MatX& dx,
              MatX& dr) const;
  // Backward drivers: d_X H, d_x f2-bar - b phi, d_x H.
  void drivers(const NodeState& s, const NodeControls& u, MatX& gP, MatX& gy,
               MatX& gp) const;
  void terminal(const NodeState& s, MatX& P, MatX& y, MatX& p) const;

  // Non-cooperative subsystem driven by an exogenous u = delta Lambda m1(beta).
  VecX nc_price(const MatX& y, const VecX& u) const;
  MatX nc_drift(const MatX& y, const VecX& price, const VecX& c0, const MatX& c2) const;
  MatX nc_driver(const MatX& x, const VecX& price, const VecX& c0, const MatX& c2) const;
  MatX nc_terminal(const MatX& x, const VecX& c0, const MatX& c2) const;

  MatX alpha(const MatX& y, const VecX& price) const {
    return optimal_alpha<double>(y, price, coef_);
  }

 private:
  MarketParams params_;
  CostSpec costs_;
  HamiltonianCoefficients<double> coef_;
  double tol_;
};

}  // namespace mfclear

#endif  // MFCLEAR_MARKET_HPP_
