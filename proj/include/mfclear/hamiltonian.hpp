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

#ifndef MFCLEAR_HAMILTONIAN_HPP_
#define MFCLEAR_HAMILTONIAN_HPP_

#include <algorithm>
#include <cmath>
#include <limits>

#include "mfclear/errors.hpp"
#include "mfclear/model.hpp"

namespace mfclear {

// Numeric coefficients of the cooperative Hamiltonian in scalar type S.
// `delta` is the population ratio entering the price; for a finite market it
// equals N1/N2, for a particle cloud it is a free coefficient.
template <class S>
struct HamiltonianCoefficients {
  int n = 1;
  S delta = S(1);
  Mat<S> Lambda, LambdaBar;
  S b = S(0), rho1 = S(0), rho2 = S(1);
  Mat<S> q_x;
  S q_mu = S(0);
  S lambda_beta = S(1), lambda_phi = S(1);
  Vec<S> phi_target;
  S trade = S(1);  // 1 when <beta, phi> is part of the running cost
  Mat<S> c_f;
  bool boxed = false;
  Vec<S> lo, hi;
  Mat<S> mean_matrix;  // lambda_beta I + 2 trade delta Lambda + delta^2 lambda_phi Lambda^2
  S lipschitz = S(1);  // gradient Lipschitz bound used as inverse step

  static HamiltonianCoefficients make(const MarketParams& p, const CostSpec& c,
                                      double delta) {
    HamiltonianCoefficients k;
    k.n = p.n;
    k.delta = S(delta);
    k.Lambda = p.Lambda.template cast<S>();
    k.LambdaBar = p.Lambda.inverse().template cast<S>();
    k.b = S(p.b);
    k.rho1 = S(p.rho1);
    k.rho2 = S(p.rho2);
    k.q_x = c.pop1.q_x.template cast<S>();
    k.q_mu = S(c.pop1.q_mu);
    k.lambda_beta = S(c.pop1.lambda_beta);
    k.lambda_phi = S(c.pop1.lambda_phi);
    k.phi_target = c.pop1.phi_target.template cast<S>();
    k.trade = c.pop1.include_trade_cost ? S(1) : S(0);
    k.c_f = c.pop2.c_f.template cast<S>();
    if (c.pop1.box) {
      k.boxed = true;
      k.lo = c.pop1.box->lo.template cast<S>();
      k.hi = c.pop1.box->hi.template cast<S>();
    }
    const Mat<S> I = Mat<S>::Identity(p.n, p.n);
    k.mean_matrix = k.lambda_beta * I + S(2) * k.trade * k.delta * k.Lambda +
                    k.delta * k.delta * k.lambda_phi * k.Lambda * k.Lambda;
    const S lam = S(p.Lambda.operatorNorm());
    k.lipschitz = k.lambda_beta + S(2) * k.trade * k.delta * lam +
                  k.lambda_phi * k.delta * k.delta * lam * lam;
    return k;
  }
};

// The tuple (X, x, y, P, p, r) at one instant; each block is n x N.
template <class S>
struct AgentStateBlock {
  Mat<S> X, P;     // cooperative, n x N1
  Mat<S> x, y, p, r;  // non-cooperative, n x N2
};

// Affine terms already evaluated at the information state.
template <class S>
struct AffineSlice {
  Mat<S> l1, a1;   // n x N1: order flow and running-linear term
  Mat<S> l2, h_f;  // n x N2
};

template <class S>
struct HamiltonianGradient {
  Mat<S> beta, X;  // n x N1
  Mat<S> x, y;     // n x N2
};

// phi = -m2(y) + delta Lambda m1(beta)
template <class S>
Vec<S> clearing_price(const Mat<S>& y, const Mat<S>& beta,
                      const HamiltonianCoefficients<S>& k) {
  if (y.cols() == 0 || beta.cols() == 0)
    throw DimensionMismatch("clearing_price needs non-empty populations");
  if (y.rows() != k.n || beta.rows() != k.n)
    throw DimensionMismatch("clearing_price: blocks must have n rows");
  return -col_mean(y) + k.delta * (k.Lambda * col_mean(beta));
}

template <class S>
Vec<S> mf_price(const Vec<S>& Ey, const Vec<S>& Ebeta,
                const HamiltonianCoefficients<S>& k) {
  if (Ey.size() != k.n || Ebeta.size() != k.n)
    throw DimensionMismatch("mf_price: means must have length n");
  return -Ey + k.delta * (k.Lambda * Ebeta);
}

// alpha = -LambdaBar (y + phi), column-wise.
template <class S>
Mat<S> optimal_alpha(const Mat<S>& y, const Vec<S>& phi,
                     const HamiltonianCoefficients<S>& k) {
  return -(k.LambdaBar * (y.colwise() + phi));
}

namespace detail {

// w1 * sum_i {<P, beta + rho1 phi + l1> + f1} + w2 * sum_j {<p, ...> + <r, ...>}
template <class S>
S weighted_hamiltonian(const AgentStateBlock<S>& u, const Mat<S>& beta,
                       const AffineSlice<S>& a, const HamiltonianCoefficients<S>& k,
                       S w1, S w2) {
  const Vec<S> phi = clearing_price(u.y, beta, k);
  const Vec<S> mX = col_mean(u.X);
  const Vec<S> dphi = phi - k.phi_target;
  S h1 = S(0);
  for (Eigen::Index i = 0; i < u.X.cols(); ++i) {
    const Vec<S> X = u.X.col(i), bi = beta.col(i);
    h1 += u.P.col(i).dot(bi + k.rho1 * phi + a.l1.col(i));
    h1 += S(0.5) * X.dot(k.q_x * X) - k.q_mu * X.dot(mX) +
          S(0.5) * k.q_mu * mX.squaredNorm() + S(0.5) * k.lambda_beta * bi.squaredNorm() +
          S(0.5) * k.lambda_phi * dphi.squaredNorm() + k.trade * bi.dot(phi) +
          a.a1.col(i).dot(X);
  }
  S h2 = S(0);
  for (Eigen::Index j = 0; j < u.y.cols(); ++j) {
    const Vec<S> drift = -(k.LambdaBar * (u.y.col(j) + phi)) + k.rho2 * phi + a.l2.col(j);
    h2 += u.p.col(j).dot(drift);
    h2 -= u.r.col(j).dot(k.c_f * u.x.col(j) + a.h_f.col(j) - k.b * phi);
  }
  return w1 * h1 + w2 * h2;
}

// Common part c of the beta-gradient: d_beta^i H = P^i + lambda_beta beta^i + c.
template <class S>
Vec<S> beta_common(const Vec<S>& mP, const Vec<S>& mp, const Vec<S>& mr,
                   const Vec<S>& mbeta, const Vec<S>& phi,
                   const HamiltonianCoefficients<S>& k) {
  const Mat<S> I = Mat<S>::Identity(k.n, k.n);
  return k.trade * phi +
         k.delta * (k.Lambda * (k.lambda_phi * (phi - k.phi_target) +
                                k.trade * mbeta + k.rho1 * mP)) +
         (k.rho2 * k.Lambda - I) * mp + k.b * (k.Lambda * mr);
}

}  // namespace detail

// Finite-population Hamiltonian (unit weights on both sums).
template <class S>
S hamiltonian(const AgentStateBlock<S>& u, const Mat<S>& beta, const AffineSlice<S>& a,
              const HamiltonianCoefficients<S>& k) {
  return detail::weighted_hamiltonian(u, beta, a, k, S(1), S(1));
}

// Cloud version of the lifted Hamiltonian: cooperative atoms weigh 1/K1,
// non-cooperative atoms 1/(delta K2).
template <class S>
S lifted_hamiltonian(const AgentStateBlock<S>& u, const Mat<S>& beta,
                     const AffineSlice<S>& a, const HamiltonianCoefficients<S>& k) {
  if (u.X.cols() == 0 || u.y.cols() == 0) throw EmptyCloud("lifted_hamiltonian: empty cloud");
  return detail::weighted_hamiltonian(u, beta, a, k, S(1) / S(u.X.cols()),
                                      S(1) / (k.delta * S(u.y.cols())));
}

template <class S>
HamiltonianGradient<S> grad_H_finite(const AgentStateBlock<S>& u, const Mat<S>& beta,
                                     const AffineSlice<S>& a,
                                     const HamiltonianCoefficients<S>& k) {
  const Vec<S> phi = clearing_price(u.y, beta, k);
  const Vec<S> mP = col_mean(u.P), mp = col_mean(u.p), mr = col_mean(u.r);
  const Vec<S> mb = col_mean(beta), mX = col_mean(u.X);
  HamiltonianGradient<S> g;
  const Vec<S> c = detail::beta_common(mP, mp, mr, mb, phi, k);
  g.beta = (u.P + k.lambda_beta * beta).colwise() + c;
  g.X = (k.q_x * u.X + a.a1).colwise() - k.q_mu * mX;
  g.x = -(k.c_f * u.r);
  const Vec<S> common = k.delta * (k.lambda_phi * (phi - k.phi_target) + k.trade * mb) +
                        k.delta * k.rho1 * mP + k.rho2 * mp - k.LambdaBar * mp + k.b * mr;
  g.y = -((k.LambdaBar * u.p).colwise() + common);
  return g;
}

// Frechet gradients of the lifted Hamiltonian over a cloud representing one
// common-noise atom. Cooperative gradients coincide with the finite form; the
// non-cooperative ones carry the 1/delta weight.
template <class S>
HamiltonianGradient<S> grad_lifted_H(const AgentStateBlock<S>& u, const Mat<S>& beta,
                                     const AffineSlice<S>& a,
                                     const HamiltonianCoefficients<S>& k) {
  if (u.X.cols() == 0 || u.y.cols() == 0) throw EmptyCloud("grad_lifted_H: empty cloud");
  HamiltonianGradient<S> g = grad_H_finite(u, beta, a, k);
  g.x /= k.delta;
  g.y /= k.delta;
  return g;
}

// Box projection; identity when unconstrained.
template <class S>
Mat<S> project_controls(const Mat<S>& beta, const HamiltonianCoefficients<S>& k) {
  if (!k.boxed) return beta;
  return beta.cwiseMax(k.lo.replicate(1, beta.cols())).cwiseMin(k.hi.replicate(1, beta.cols()));
}

// max-norm of beta - Proj(beta - d_beta H)
template <class S>
S stationarity_residual(const Mat<S>& beta, const Mat<S>& grad_beta,
                        const HamiltonianCoefficients<S>& k) {
  if (beta.size() == 0) return S(0);
  return (beta - project_controls<S>(beta - grad_beta, k)).cwiseAbs().maxCoeff();
}

// Unconstrained minimizer depends on the adjoints only through P^i and the
// means of (y, P, p, r); solved by one n x n system for the mean control.
template <class S>
Mat<S> minimize_unconstrained(const Mat<S>& P, const Vec<S>& my, const Vec<S>& mp,
                              const Vec<S>& mr, const HamiltonianCoefficients<S>& k) {
  const Mat<S> I = Mat<S>::Identity(k.n, k.n);
  const Vec<S> mP = col_mean(P);
  const Vec<S> rhs = (I + k.delta * k.rho1 * k.Lambda) * mP -
                     (k.trade * my + k.delta * k.lambda_phi * (k.Lambda * my)) -
                     k.delta * k.lambda_phi * (k.Lambda * k.phi_target) +
                     (k.rho2 * k.Lambda - I) * mp + k.b * (k.Lambda * mr);
  const Vec<S> mb = -k.mean_matrix.ldlt().solve(rhs);
  const Vec<S> phi = -my + k.delta * (k.Lambda * mb);
  const Vec<S> c = detail::beta_common(mP, mp, mr, mb, phi, k);
  return -((P.colwise() + c) / k.lambda_beta);
}

template <class S>
Mat<S> minimize_H_finite(const AgentStateBlock<S>& u, const HamiltonianCoefficients<S>& k,
                         S tol = S(1e-10), int max_iter = 100000) {
  if (u.P.cols() == 0 || u.y.cols() == 0)
    throw DimensionMismatch("minimize_H_finite needs non-empty populations");
  const Vec<S> my = col_mean(u.y), mp = col_mean(u.p), mr = col_mean(u.r);
  Mat<S> beta = minimize_unconstrained<S>(u.P, my, mp, mr, k);
  if (!k.boxed) return beta;
  const Mat<S> I = Mat<S>::Identity(k.n, k.n);
  const Vec<S> mP = col_mean(u.P);
  beta = project_controls<S>(beta, k);
  const S step = S(1) / k.lipschitz;
  S res = S(0);
  for (int it = 0; it < max_iter; ++it) {
    const Vec<S> mb = col_mean(beta);
    const Vec<S> phi = -my + k.delta * (k.Lambda * mb);
    const Vec<S> c = detail::beta_common(mP, mp, mr, mb, phi, k);
    const Mat<S> g = (u.P + k.lambda_beta * beta).colwise() + c;
    res = stationarity_residual<S>(beta, g, k);
    if (res < tol) return beta;
    beta = project_controls<S>(beta - step * g, k);
  }
  throw NoConvergence("projected minimizer", max_iter, static_cast<double>(res));
}

// The lifted Hamiltonian is a positive multiple of the cloud Hamiltonian in
// beta, so the minimizer is shared.
template <class S>
Mat<S> minimize_lifted_H(const AgentStateBlock<S>& cloud, const HamiltonianCoefficients<S>& k,
                         S tol = S(1e-10), int max_iter = 100000) {
  if (cloud.P.cols() == 0 || cloud.y.cols() == 0) throw EmptyCloud("minimize_lifted_H: empty cloud");
  return minimize_H_finite(cloud, k, tol, max_iter);
}

}  // namespace mfclear

#endif  // MFCLEAR_HAMILTONIAN_HPP_
