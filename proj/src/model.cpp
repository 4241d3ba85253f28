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

#include "mfclear/model.hpp"

#include <cmath>
#include <sstream>

#include "mfclear/errors.hpp"

namespace mfclear {

double min_eigenvalue(const MatX& sym) {
  if (sym.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<MatX> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

ModelConstants model_constants(const CostSpec& costs) {
  const auto& c1 = costs.pop1;
  const int n = static_cast<int>(c1.q_x.rows());
  ModelConstants k;
  k.gamma1f = min_eigenvalue(c1.q_x - c1.q_mu * MatX::Identity(n, n));
  k.gamma1g = min_eigenvalue(c1.q_g - c1.q_g_mu * MatX::Identity(n, n));
  k.gamma2f = min_eigenvalue(costs.pop2.c_f);
  k.gamma2g = min_eigenvalue(costs.pop2.c_g);
  if (c1.include_trade_cost) {
    // smallest eigenvalue of [[lb, 1], [1, lp]]
    const double lb = c1.lambda_beta, lp = c1.lambda_phi;
    const double e = 0.5 * ((lb + lp) - std::sqrt((lb - lp) * (lb - lp) + 4.0));
    k.lambda_beta_eff = e;
    k.lambda_phi_eff = e;
  } else {
    k.lambda_beta_eff = c1.lambda_beta;
    k.lambda_phi_eff = c1.lambda_phi;
  }
  return k;
}

namespace {

enum class Kind { kSpd, kRho2, kConvex, kDim };

struct Check {
  Kind kind;
  ValidationCheck rec;
};

bool symmetric(const MatX& m) {
  return m.rows() == m.cols() && (m - m.transpose()).cwiseAbs().maxCoeff() <=
                                     1e-12 * (1.0 + m.cwiseAbs().maxCoeff());
}

void spd_check(std::vector<Check>& out, const std::string& name, const MatX& m,
               int n) {
  Check c{Kind::kSpd, {}};
  c.rec.clause = name + " must be a symmetric positive-definite " +
                 std::to_string(n) + "x" + std::to_string(n) + " matrix";
  if (m.rows() != n || m.cols() != n || !symmetric(m)) {
    c.rec.detail = "shape or symmetry";
    c.rec.margin = -1.0;
    c.rec.pass = false;
  } else {
    c.rec.margin = min_eigenvalue(m);
    c.rec.detail = "min eigenvalue";
    c.rec.pass = c.rec.margin > 0.0;
  }
  out.push_back(c);
}

void dim_check(std::vector<Check>& out, const std::string& what, bool ok) {
  out.push_back({Kind::kDim, {what, "dimension", ok ? 0.0 : -1.0, ok}});
}

void affine_dims(std::vector<Check>& out, const std::string& name,
                 const AffineMap& a, int n, int m0, int mown) {
  dim_check(out, name + " offset has length n", a.offset.size() == n);
  dim_check(out, name + " common loading is n x m_common",
            a.on_common.rows() == n && a.on_common.cols() == m0);
  dim_check(out, name + " own loading is n x m_own",
            a.on_own.rows() == n && a.on_own.cols() == mown);
}

std::vector<Check> run_checks(const MarketParams& p, const CostSpec& costs) {
  std::vector<Check> out;
  const int n = p.n;
  const auto& c1 = costs.pop1;
  const auto& c2 = costs.pop2;
  const int m0 = costs.info.common.dim();
  const int m1 = costs.info.pop1.dim();
  const int m2 = costs.info.pop2.dim();

  dim_check(out, "population sizes N1, N2 must be positive", p.N1 > 0 && p.N2 > 0);
  dim_check(out, "ratio delta must equal N1/N2",
            p.N2 > 0 && std::abs(p.delta * p.N2 - p.N1) <= 1e-12 * p.N1);
  dim_check(out, "grid needs T > 0 and M >= 1", p.T > 0.0 && p.M >= 1);
  dim_check(out, "phi_target has length n", c1.phi_target.size() == n);
  dim_check(out, "cooperative loadings are n x d0 and n x d1",
            c1.sigma0.rows() == n && c1.sigma0.cols() == p.d0 &&
                c1.sigma.rows() == n && c1.sigma.cols() == p.d1);
  dim_check(out, "non-cooperative loadings are n x d0 and n x d2",
            c2.sigma0.rows() == n && c2.sigma0.cols() == p.d0 &&
                c2.sigma.rows() == n && c2.sigma.cols() == p.d2);
  affine_dims(out, "cooperative running_linear", c1.running_linear, n, m0, m1);
  affine_dims(out, "cooperative terminal_linear", c1.terminal_linear, n, m0, m1);
  affine_dims(out, "cooperative order_flow", c1.order_flow, n, m0, m1);
  affine_dims(out, "non-cooperative h_f", c2.h_f, n, m0, m2);
  affine_dims(out, "non-cooperative h_g", c2.h_g, n, m0, m2);
  affine_dims(out, "non-cooperative order_flow", c2.order_flow, n, m0, m2);
  const auto info_ok = [](const InfoProcess& ip, int d) {
    const int m = ip.dim();
    return ip.rate.rows() == m && ip.rate.cols() == m && ip.mean.size() == m &&
           ip.vol.rows() == m && ip.vol.cols() == d;
  };
  dim_check(out, "common information process dimensions", info_ok(costs.info.common, p.d0));
  dim_check(out, "cooperative information process dimensions", info_ok(costs.info.pop1, p.d1));
  dim_check(out, "non-cooperative information process dimensions", info_ok(costs.info.pop2, p.d2));
  if (c1.box) {
    const bool ok = c1.box->lo.size() == n && c1.box->hi.size() == n &&
                    (c1.box->lo.array() <= c1.box->hi.array()).all();
    dim_check(out, "control box has lo <= hi in every coordinate", ok);
  }
  for (const auto& c : out)
    if (!c.rec.pass) return out;  // later checks need consistent shapes

  spd_check(out, "Lambda", p.Lambda, n);
  spd_check(out, "c_f", c2.c_f, n);
  spd_check(out, "c_g", c2.c_g, n);
  spd_check(out, "q_x", c1.q_x, n);
  spd_check(out, "q_g", c1.q_g, n);
  for (const auto& c : out)
    if (!c.rec.pass) return out;

  const ModelConstants k = model_constants(costs);
  out.push_back({Kind::kConvex,
                 {"mean-attraction weight q_mu must be non-negative", "q_mu",
                  c1.q_mu, c1.q_mu >= 0.0}});
  out.push_back({Kind::kConvex,
                 {"q_g_mu must be non-negative", "q_g_mu", c1.q_g_mu, c1.q_g_mu >= 0.0}});
  out.push_back({Kind::kConvex,
                 {"cooperative running cost strictly convex in inventory: "
                  "q_x - q_mu I positive definite",
                  "min eigenvalue", k.gamma1f, k.gamma1f > 0.0}});
  out.push_back({Kind::kConvex,
                 {"cooperative terminal cost strictly convex in inventory: "
                  "q_g - q_g_mu I positive definite",
                  "min eigenvalue", k.gamma1g, k.gamma1g > 0.0}});
  out.push_back({Kind::kConvex,
                 {"trade-rate penalty lambda_beta must be positive", "lambda_beta",
                  c1.lambda_beta, c1.lambda_beta > 0.0}});
  out.push_back({Kind::kConvex,
                 {"price-deviation penalty lambda_phi must be positive", "lambda_phi",
                  c1.lambda_phi, c1.lambda_phi > 0.0}});
  if (c1.include_trade_cost) {
    const double m = c1.lambda_beta * c1.lambda_phi - 1.0;
    out.push_back({Kind::kConvex,
                   {"cooperative running cost jointly convex in (beta, price): "
                    "lambda_beta * lambda_phi > 1",
                    "lambda_beta * lambda_phi - 1", m, m > 0.0}});
  }
  out.push_back({Kind::kRho2,
                 {"mark-to-market discount b must be non-negative", "b", p.b, p.b >= 0.0}});
  {
    const double need = std::max({0.0, p.b * p.b / (2.0 * k.gamma2f),
                                  2.0 * p.b * p.b / k.gamma2f});
    const double m = p.rho2 - need;
    out.push_back({Kind::kRho2,
                   {"non-cooperative price response rho2 must be positive and at "
                    "least max(b^2/(2 gamma2f), 2 b^2/gamma2f)",
                    "rho2 slack", m, p.rho2 > 0.0 && m >= 0.0}});
  }
  return out;
}

}  // namespace

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& c : checks)
    os << (c.pass ? "pass  " : "FAIL  ") << c.clause << "  [" << c.detail
       << " = " << c.margin << "]\n";
  return os.str();
}

ValidationReport validate(const MarketParams& params, const CostSpec& costs) {
  ValidationReport r;
  for (auto& c : run_checks(params, costs)) r.checks.push_back(c.rec);
  return r;
}

void require_valid(const MarketParams& params, const CostSpec& costs) {
  for (const auto& c : run_checks(params, costs)) {
    if (c.rec.pass) continue;
    const std::string why = c.rec.detail + " = " + std::to_string(c.rec.margin);
    switch (c.kind) {
      case Kind::kSpd: throw NonSPDMatrix(c.rec.clause, why);
      case Kind::kRho2: throw Rho2TooSmall(c.rec.clause, why);
      case Kind::kConvex: throw ConvexityViolated(c.rec.clause, why);
      case Kind::kDim: throw DimensionMismatch(c.rec.clause);
    }
  }
}

double f2_eval(const MarketParams& p, const Pop2Cost& c, const VecX& x,
               const VecX& phi, const VecX& alpha, const VecX& hf) {
  return alpha.dot(phi) + 0.5 * alpha.dot(p.Lambda * alpha) - p.b * x.dot(phi) +
         0.5 * x.dot(c.c_f * x) + hf.dot(x);
}

double g2_eval(const Pop2Cost& c, const VecX& x, const VecX& hg) {
  return 0.5 * x.dot(c.c_g * x) + hg.dot(x);
}

}  // namespace mfclear
