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

#include "mfclear/market.hpp"

namespace mfclear {

Market::Market(const MarketParams& params, const CostSpec& costs, double delta,
               double minimizer_tol)
    : params_(params),
      costs_(costs),
      coef_(HamiltonianCoefficients<double>::make(params, costs, delta)),
      tol_(minimizer_tol) {}

NodeControls Market::controls(const NodeState& s) const {
  AgentStateBlock<double> u;
  u.P = s.P;
  u.y = s.y;
  u.p = s.p;
  u.r = s.r;
  NodeControls out;
  out.beta = minimize_H_finite<double>(u, coef_, tol_);
  out.price = clearing_price<double>(s.y, out.beta, coef_);
  return out;
}

void Market::drifts(const NodeState& s, const NodeControls& u, MatX& dX, MatX& dx,
                    MatX& dr) const {
  const auto& k = coef_;
  const auto& c1 = costs_.pop1;
  dX = c1.order_flow.apply(s.c0, s.c1) + u.beta;
  dX.colwise() += k.rho1 * u.price;
  dx = costs_.pop2.order_flow.apply(s.c0, s.c2) - k.LambdaBar * s.y;
  dx.colwise() += (k.rho2 * u.price - k.LambdaBar * u.price);
  // -d_y H
  const VecX mP = col_mean(s.P), mp = col_mean(s.p), mr = col_mean(s.r);
  const VecX mb = col_mean(u.beta);
  const VecX common = k.delta * (k.lambda_phi * (u.price - k.phi_target) + k.trade * mb) +
                      k.delta * k.rho1 * mP + k.rho2 * mp - k.LambdaBar * mp + k.b * mr;
  dr = k.LambdaBar * s.p;
  dr.colwise() += common;
}

void Market::drivers(const NodeState& s, const NodeControls& u, MatX& gP, MatX& gy,
                     MatX& gp) const {
  const auto& k = coef_;
  const auto& c1 = costs_.pop1;
  const auto& c2 = costs_.pop2;
  gP = c1.q_x * s.X + c1.running_linear.apply(s.c0, s.c1);
  gP.colwise() -= c1.q_mu * col_mean(s.X);
  gy = c2.c_f * s.x + c2.h_f.apply(s.c0, s.c2);
  gy.colwise() -= k.b * u.price;
  gp = -(c2.c_f * s.r);
}

void Market::terminal(const NodeState& s, MatX& P, MatX& y, MatX& p) const {
  const auto& c1 = costs_.pop1;
  const auto& c2 = costs_.pop2;
  P = c1.q_g * s.X + c1.terminal_linear.apply(s.c0, s.c1);
  P.colwise() -= c1.q_g_mu * col_mean(s.X);
  y = c2.c_g * s.x + c2.h_g.apply(s.c0, s.c2);
  p = -(c2.c_g * s.r);
}

VecX Market::nc_price(const MatX& y, const VecX& u) const { return u - col_mean(y); }

MatX Market::nc_drift(const MatX& y, const VecX& price, const VecX& c0,
                      const MatX& c2) const {
  const auto& k = coef_;
  MatX dx = costs_.pop2.order_flow.apply(c0, c2) - k.LambdaBar * y;
  dx.colwise() += (k.rho2 * price - k.LambdaBar * price);
  return dx;
}

MatX Market::nc_driver(const MatX& x, const VecX& price, const VecX& c0,
                       const MatX& c2) const {
  MatX gy = costs_.pop2.c_f * x + costs_.pop2.h_f.apply(c0, c2);
  gy.colwise() -= coef_.b * price;
  return gy;
}

MatX Market::nc_terminal(const MatX& x, const VecX& c0, const MatX& c2) const {
  return costs_.pop2.c_g * x + costs_.pop2.h_g.apply(c0, c2);
}

}  // namespace mfclear
