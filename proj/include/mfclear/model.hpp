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

#ifndef MFCLEAR_MODEL_HPP_
#define MFCLEAR_MODEL_HPP_

#include <algorithm>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfclear/types.hpp"

namespace mfclear {

struct MarketParams {
  int n = 1;
  int N1 = 1;
  int N2 = 1;
  double delta = 1.0;  // N1 / N2
  double T = 1.0;
  int M = 1;
  MatX Lambda;
  double b = 0.0;
  double rho1 = 0.0;
  double rho2 = 1.0;
  int d0 = 1;  // common Brownian dimension
  int d1 = 1;  // cooperative idiosyncratic
  int d2 = 1;  // non-cooperative idiosyncratic
};

// offset + on_common * c0 + on_own * c_own, evaluated per agent.
struct AffineMap {
  VecX offset;
  MatX on_common;  // n x m0
  MatX on_own;     // n x m_own

  // c_own holds one column per agent; returns n x N.
  MatX apply(const VecX& c0, const MatX& c_own) const {
    MatX out = on_own * c_own;
    out.colwise() += offset + on_common * c0;
    return out;
  }
  bool is_zero() const {
    return offset.isZero(0) && on_common.isZero(0) && on_own.isZero(0);
  }
};

// dc = rate (mean - c) dt + vol dW, c(0) = init.
struct InfoProcess {
  VecX init;
  MatX rate;
  VecX mean;
  MatX vol;
  int dim() const { return static_cast<int>(init.size()); }
};

struct GaussianLaw {
  VecX mean;
  MatX cov;
};

struct Box {
  VecX lo;
  VecX hi;
};

struct Pop1Cost {
  MatX q_x;
  double q_mu = 0.0;
  double lambda_beta = 1.0;
  double lambda_phi = 1.0;
  VecX phi_target;
  bool include_trade_cost = true;
  MatX q_g;
  double q_g_mu = 0.0;
  AffineMap running_linear;   // linear-in-x running term
  AffineMap terminal_linear;  // linear-in-x terminal term
  AffineMap order_flow;
  MatX sigma0;  // n x d0
  MatX sigma;   // n x d1
  std::optional<Box> box;
};

struct Pop2Cost {
  MatX c_f;
  AffineMap h_f;
  MatX c_g;
  AffineMap h_g;
  AffineMap order_flow;
  MatX sigma0;  // n x d0
  MatX sigma;   // n x d2
};

struct InfoSpec {
  InfoProcess common;
  InfoProcess pop1;
  InfoProcess pop2;
};

struct CostSpec {
  Pop1Cost pop1;
  Pop2Cost pop2;
  InfoSpec info;
};

struct TimeGrid {
  double T = 1.0;
  int M = 1;
  double dt() const { return T / M; }
  double t(int k) const { return k == M ? T : k * dt(); }
};

// Convexity and monotonicity constants of a validated cost specification.
struct ModelConstants {
  double gamma1f = 0.0;  // min eig(q_x - q_mu I)
  double gamma1g = 0.0;  // min eig(q_g - q_g_mu I)
  double gamma2f = 0.0;  // min eig(c_f)
  double gamma2g = 0.0;  // min eig(c_g)
  double lambda_beta_eff = 0.0;
  double lambda_phi_eff = 0.0;
  // -gamma_f bound weight used by the monotonicity diagnostic
  double gamma_f() const { return std::min(gamma1f / 2.0, gamma2f / 3.0); }
  // homotopy weight in the decoupled system
  double homotopy_gamma() const {
    return std::min({gamma1f / 2.0, gamma2f / 3.0, gamma1g, gamma2g});
  }
};

ModelConstants model_constants(const CostSpec& costs);

struct ValidationCheck {
  std::string clause;
  std::string detail;
  double margin = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool ok() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
  std::string to_string() const;
};

// Pure; never throws on assumption failures.
ValidationReport validate(const MarketParams& params, const CostSpec& costs);
// Throws the typed error of the first failing check.
void require_valid(const MarketParams& params, const CostSpec& costs);

double min_eigenvalue(const MatX& sym);

// ---- cooperative running and terminal cost -------------------------------
//
// f1 = 1/2 <x, q_x x> - q_mu <x, m> + q_mu/2 |m|^2 + lambda_beta/2 |beta|^2
//      + lambda_phi/2 |phi - phi_target|^2 + [<beta, phi>] + <a1, x>
// where m is the mean of the cooperative inventory law and a1 the evaluated
// running_linear term.

template <class S>
S f1_eval(const Pop1Cost& c, const Vec<S>& x, const Vec<S>& m,
          const Vec<S>& phi, const Vec<S>& beta, const Vec<S>& a1) {
  const Mat<S> qx = c.q_x.template cast<S>();
  const S qmu = S(c.q_mu);
  const Vec<S> dphi = phi - c.phi_target.template cast<S>();
  S v = S(0.5) * x.dot(qx * x) - qmu * x.dot(m) + S(0.5) * qmu * m.squaredNorm() +
        S(0.5) * S(c.lambda_beta) * beta.squaredNorm() +
        S(0.5) * S(c.lambda_phi) * dphi.squaredNorm() + a1.dot(x);
  if (c.include_trade_cost) v += beta.dot(phi);
  return v;
}

template <class S>
Vec<S> f1_grad_x(const Pop1Cost& c, const Vec<S>& x, const Vec<S>& m,
                 const Vec<S>& a1) {
  return c.q_x.template cast<S>() * x - S(c.q_mu) * m + a1;
}

// Derivative in the measure argument, evaluated at point v. Only the mean
// enters, so the result does not depend on v.
template <class S>
Vec<S> f1_grad_mu_at(const Pop1Cost& c, const Vec<S>& x, const Vec<S>& m,
                     const Vec<S>& /*v*/) {
  return S(c.q_mu) * (m - x);
}

template <class S>
Vec<S> f1_grad_phi(const Pop1Cost& c, const Vec<S>& phi, const Vec<S>& beta) {
  Vec<S> g = S(c.lambda_phi) * (phi - c.phi_target.template cast<S>());
  if (c.include_trade_cost) g += beta;
  return g;
}

template <class S>
Vec<S> f1_grad_beta(const Pop1Cost& c, const Vec<S>& phi, const Vec<S>& beta) {
  Vec<S> g = S(c.lambda_beta) * beta;
  if (c.include_trade_cost) g += phi;
  return g;
}

template <class S>
S g1_eval(const Pop1Cost& c, const Vec<S>& x, const Vec<S>& m, const Vec<S>& ag) {
  const S qmu = S(c.q_g_mu);
  return S(0.5) * x.dot(c.q_g.template cast<S>() * x) - qmu * x.dot(m) +
         S(0.5) * qmu * m.squaredNorm() + ag.dot(x);
}

template <class S>
Vec<S> g1_grad_x(const Pop1Cost& c, const Vec<S>& x, const Vec<S>& m,
                 const Vec<S>& ag) {
  return c.q_g.template cast<S>() * x - S(c.q_g_mu) * m + ag;
}

// Non-cooperative running cost
// f2 = <alpha, phi> + 1/2 <alpha, Lambda alpha> - b <x, phi> + 1/2 <x, c_f x> + <h_f, x>.
double f2_eval(const MarketParams& p, const Pop2Cost& c, const VecX& x,
               const VecX& phi, const VecX& alpha, const VecX& hf);
double g2_eval(const Pop2Cost& c, const VecX& x, const VecX& hg);

}  // namespace mfclear

#endif  // MFCLEAR_MODEL_HPP_
