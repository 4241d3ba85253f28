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

#include "mfclear/lq_oracle.hpp"

#include <cmath>

#include "mfclear/errors.hpp"

namespace mfclear {

namespace {

MatX block_diag(const std::vector<const MatX*>& blocks) {
  Eigen::Index r = 0, c = 0;
  for (const MatX* b : blocks) {
    r += b->rows();
    c += b->cols();
  }
  MatX out = MatX::Zero(r, c);
  r = c = 0;
  for (const MatX* b : blocks) {
    out.block(r, c, b->rows(), b->cols()) = *b;
    r += b->rows();
    c += b->cols();
  }
  return out;
}

void check_norm(const MatX& m, double bound, const char* what, int k) {
  const double v = m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
  if (!std::isfinite(v) || v > bound)
    throw RecursionBlowup(std::string(what) + " gain exceeds " + std::to_string(bound) +
                          " at node " + std::to_string(k));
}

// Kernel outputs of one probe, stacked in system order.
struct Probe {
  VecX drift, driver, terminal, beta;
};

template <class Eval>
void fill_system(LinearFBSystem& sys, int ns, int nb, int nc, int nu, int nbeta,
                 const Eval& eval) {
  const VecX zs = VecX::Zero(ns), zb = VecX::Zero(nb), zc = VecX::Zero(nc), zu = VecX::Zero(nu);
  const Probe p0 = eval(zs, zb, zc, zu);
  sys.e = p0.drift;
  sys.f = p0.driver;
  sys.mt = p0.terminal;
  sys.cb = p0.beta;
  sys.A.resize(ns, ns);
  sys.F.resize(nb, ns);
  sys.Kt.resize(nb, ns);
  sys.Cs.resize(nbeta, ns);
  for (int a = 0; a < ns; ++a) {
    VecX v = zs;
    v(a) = 1.0;
    const Probe p = eval(v, zb, zc, zu);
    sys.A.col(a) = p.drift - p0.drift;
    sys.F.col(a) = p.driver - p0.driver;
    sys.Kt.col(a) = p.terminal - p0.terminal;
    if (nbeta) sys.Cs.col(a) = p.beta - p0.beta;
  }
  sys.Bm.resize(ns, nb);
  sys.G.resize(nb, nb);
  sys.Cb.resize(nbeta, nb);
  for (int a = 0; a < nb; ++a) {
    VecX v = zb;
    v(a) = 1.0;
    const Probe p = eval(zs, v, zc, zu);
    sys.Bm.col(a) = p.drift - p0.drift;
    sys.G.col(a) = p.driver - p0.driver;
    if (nbeta) sys.Cb.col(a) = p.beta - p0.beta;
  }
  sys.E.resize(ns, nc);
  sys.H.resize(nb, nc);
  sys.Lt.resize(nb, nc);
  sys.Cc.resize(nbeta, nc);
  for (int a = 0; a < nc; ++a) {
    VecX v = zc;
    v(a) = 1.0;
    const Probe p = eval(zs, zb, v, zu);
    sys.E.col(a) = p.drift - p0.drift;
    sys.H.col(a) = p.driver - p0.driver;
    sys.Lt.col(a) = p.terminal - p0.terminal;
    if (nbeta) sys.Cc.col(a) = p.beta - p0.beta;
  }
  sys.Bu.resize(ns, nu);
  sys.Hu.resize(nb, nu);
  for (int a = 0; a < nu; ++a) {
    VecX v = zu;
    v(a) = 1.0;
    const Probe p = eval(zs, zb, zc, v);
    sys.Bu.col(a) = p.drift - p0.drift;
    sys.Hu.col(a) = p.driver - p0.driver;
  }
}

// Deviation systems act on offsets from the means, so constant terms vanish.
void drop_offsets(LinearFBSystem& sys) {
  sys.e.setZero();
  sys.f.setZero();
  sys.mt.setZero();
  sys.cb.setZero();
}

VecX stack(std::initializer_list<const MatX*> parts, int col) {
  Eigen::Index len = 0;
  for (const MatX* m : parts) len += m->rows();
  VecX out(len);
  Eigen::Index at = 0;
  for (const MatX* m : parts) {
    out.segment(at, m->rows()) = m->col(col);
    at += m->rows();
  }
  return out;
}

NodeState empty_node(int n, int N1, int N2, int m0, int m1, int m2) {
  NodeState s;
  s.X = MatX::Zero(n, N1);
  s.P = MatX::Zero(n, N1);
  s.x = MatX::Zero(n, N2);
  s.y = MatX::Zero(n, N2);
  s.p = MatX::Zero(n, N2);
  s.r = MatX::Zero(n, N2);
  s.c0 = VecX::Zero(m0);
  s.c1 = MatX::Zero(m1, N1);
  s.c2 = MatX::Zero(m2, N2);
  return s;
}

// Sets column 0 to v and column 1 to -v.
template <class Seg>
void antisym(MatX& m, const Seg& v) {
  m.col(0) = v;
  m.col(1) = -v;
}

}  // namespace

AffineGains affine_backward(const LinearFBSystem& s, const TimeGrid& grid, double rho,
                            double gamma, double blowup) {
  const int M = grid.M;
  const double dt = grid.dt();
  const int ns = s.ns(), nb = s.nb(), nc = s.nc(), nu = s.nu();
  const MatX Ib = MatX::Identity(nb, nb);
  const MatX Is = MatX::Identity(ns, ns);
  const MatX Ic = MatX::Identity(nc, nc);
  AffineGains g;
  g.K.resize(M + 1);
  g.L.resize(M + 1);
  g.m.resize(M + 1);
  g.W.resize(M + 1);
  g.V.resize(M + 1);
  g.w.resize(M + 1);
  g.Gamma.resize(M + 1);
  g.GammaT.resize(M + 1);

  g.K[M] = rho * s.Kt + (1.0 - rho) * s.J;
  g.L[M] = rho * s.Lt;
  g.m[M] = rho * s.mt;
  const MatX IG = Ib + dt * rho * s.G;
  const MatX Fh = dt * (rho * s.F + (1.0 - rho) * gamma * s.J);
  const MatX Step = Is + dt * rho * s.A;
  const MatX Cdecay = Ic - dt * s.R;
  const VecX Cdrift = dt * (s.R * s.theta);

  for (int k = M - 1; k >= 0; --k) {
    const int k1 = k + 1;
    if (k1 == M) {
      g.W[k1] = g.K[k1];
      g.V[k1] = g.L[k1];
      g.w[k1] = g.m[k1];
    } else {
      g.W[k1] = IG * g.K[k1] + Fh;
      g.V[k1] = IG * g.L[k1] + dt * rho * s.H;
      g.w[k1] = IG * g.m[k1] + dt * rho * s.f;
      if (nu > 0) {
        const auto& Gm = g.Gamma[k1];
        auto& GT = g.GammaT[k1];
        GT.resize(Gm.size());
        for (size_t j = 0; j < Gm.size(); ++j) GT[j] = IG * Gm[j];
        GT[0] += dt * rho * s.Hu;
      }
    }
    const MatX& W = g.W[k1];
    const MatX& V = g.V[k1];
    const MatX N = Ib - dt * rho * W * s.Bm;
    Eigen::PartialPivLU<MatX> lu(N);
    if (!std::isfinite(N.norm()) || std::abs(lu.determinant()) < 1e-300)
      throw RecursionBlowup("singular step matrix at node " + std::to_string(k));
    g.K[k] = lu.solve(W * Step);
    g.L[k] = lu.solve(dt * rho * W * s.E + V * Cdecay);
    g.m[k] = lu.solve(dt * rho * W * s.e + V * Cdrift + g.w[k1]);
    check_norm(g.K[k], blowup, "state", k);
    check_norm(g.L[k], blowup, "information", k);
    if (nu > 0) {
      auto& Gm = g.Gamma[k];
      Gm.resize(static_cast<size_t>(M - k));
      Gm[0] = lu.solve(dt * rho * W * s.Bu);
      for (int j = 1; j < M - k; ++j) Gm[static_cast<size_t>(j)] = lu.solve(g.GammaT[k1][static_cast<size_t>(j - 1)]);
      for (const auto& G : Gm) check_norm(G, blowup, "input", k);
    }
  }
  return g;
}

FullLinearization linearize_full(const Market& market) {
  const int n = market.n();
  const CostSpec& costs = market.costs();
  const int m0 = costs.info.common.dim(), m1 = costs.info.pop1.dim(), m2 = costs.info.pop2.dim();
  FullLinearization lin;

  // mean system: one agent per population carrying the means
  fill_system(lin.mean, 3 * n, 3 * n, m0 + m1 + m2, 0, n,
              [&](const VecX& s, const VecX& b, const VecX& c, const VecX&) {
                NodeState st = empty_node(n, 1, 1, m0, m1, m2);
                st.X.col(0) = s.segment(0, n);
                st.x.col(0) = s.segment(n, n);
                st.r.col(0) = s.segment(2 * n, n);
                st.P.col(0) = b.segment(0, n);
                st.y.col(0) = b.segment(n, n);
                st.p.col(0) = b.segment(2 * n, n);
                st.c0 = c.segment(0, m0);
                st.c1.col(0) = c.segment(m0, m1);
                st.c2.col(0) = c.segment(m0 + m1, m2);
                const NodeControls u = market.controls(st);
                MatX dX, dx, dr, gP, gy, gp, tP, ty, tp;
                market.drifts(st, u, dX, dx, dr);
                market.drivers(st, u, gP, gy, gp);
                market.terminal(st, tP, ty, tp);
                return Probe{stack({&dX, &dx, &dr}, 0), stack({&gP, &gy, &gp}, 0),
                             stack({&tP, &ty, &tp}, 0), u.beta.col(0)};
              });
  {
    const MatX I = MatX::Identity(n, n), mI = -I;
    lin.mean.J = block_diag({&I, &I, &mI});
    lin.mean.R = block_diag({&costs.info.common.rate, &costs.info.pop1.rate, &costs.info.pop2.rate});
    lin.mean.theta.resize(m0 + m1 + m2);
    lin.mean.theta << costs.info.common.mean, costs.info.pop1.mean, costs.info.pop2.mean;
  }

  // cooperative deviation: antisymmetric pair, means vanish
  fill_system(lin.dev1, n, n, m1, 0, n,
              [&](const VecX& s, const VecX& b, const VecX& c, const VecX&) {
                NodeState st = empty_node(n, 2, 1, m0, m1, m2);
                antisym(st.X, s);
                antisym(st.P, b);
                antisym(st.c1, c);
                const NodeControls u = market.controls(st);
                MatX dX, dx, dr, gP, gy, gp, tP, ty, tp;
                market.drifts(st, u, dX, dx, dr);
                market.drivers(st, u, gP, gy, gp);
                market.terminal(st, tP, ty, tp);
                return Probe{dX.col(0), gP.col(0), tP.col(0), u.beta.col(0)};
              });
  drop_offsets(lin.dev1);
  lin.dev1.J = MatX::Identity(n, n);
  lin.dev1.R = costs.info.pop1.rate;
  lin.dev1.theta = VecX::Zero(m1);

  fill_system(lin.dev2, 2 * n, 2 * n, m2, 0, 0,
              [&](const VecX& s, const VecX& b, const VecX& c, const VecX&) {
                NodeState st = empty_node(n, 1, 2, m0, m1, m2);
                antisym(st.x, s.segment(0, n));
                antisym(st.r, s.segment(n, n));
                antisym(st.y, b.segment(0, n));
                antisym(st.p, b.segment(n, n));
                antisym(st.c2, c);
                const NodeControls u = market.controls(st);
                MatX dX, dx, dr, gP, gy, gp, tP, ty, tp;
                market.drifts(st, u, dX, dx, dr);
                market.drivers(st, u, gP, gy, gp);
                market.terminal(st, tP, ty, tp);
                return Probe{stack({&dx, &dr}, 0), stack({&gy, &gp}, 0), stack({&ty, &tp}, 0),
                             VecX()};
              });
  drop_offsets(lin.dev2);
  {
    const MatX I = MatX::Identity(n, n), mI = -I;
    lin.dev2.J = block_diag({&I, &mI});
  }
  lin.dev2.R = costs.info.pop2.rate;
  lin.dev2.theta = VecX::Zero(m2);
  return lin;
}

NoncoopLinearization linearize_noncoop(const Market& market) {
  const int n = market.n();
  const CostSpec& costs = market.costs();
  const int m0 = costs.info.common.dim(), m2 = costs.info.pop2.dim();
  NoncoopLinearization lin;
  fill_system(lin.mean, n, n, m0 + m2, n, 0,
              [&](const VecX& s, const VecX& b, const VecX& c, const VecX& u) {
                const MatX x = s, y = b;
                const VecX c0 = c.segment(0, m0);
                const MatX c2 = c.segment(m0, m2);
                const VecX price = market.nc_price(y, u);
                return Probe{market.nc_drift(y, price, c0, c2).col(0),
                             market.nc_driver(x, price, c0, c2).col(0),
                             market.nc_terminal(x, c0, c2).col(0), VecX()};
              });
  lin.mean.J = MatX::Identity(n, n);
  lin.mean.R = block_diag({&costs.info.common.rate, &costs.info.pop2.rate});
  lin.mean.theta.resize(m0 + m2);
  lin.mean.theta << costs.info.common.mean, costs.info.pop2.mean;

  fill_system(lin.dev, n, n, m2, 0, 0,
              [&](const VecX& s, const VecX& b, const VecX& c, const VecX&) {
                MatX x(n, 2), y(n, 2), c2(m2, 2);
                antisym(x, s);
                antisym(y, b);
                antisym(c2, c);
                const VecX c0 = VecX::Zero(m0);
                const VecX price = market.nc_price(y, VecX::Zero(n));
                return Probe{market.nc_drift(y, price, c0, c2).col(0),
                             market.nc_driver(x, price, c0, c2).col(0),
                             market.nc_terminal(x, c0, c2).col(0), VecX()};
              });
  drop_offsets(lin.dev);
  lin.dev.J = MatX::Identity(n, n);
  lin.dev.R = costs.info.pop2.rate;
  lin.dev.theta = VecX::Zero(m2);
  return lin;
}

std::vector<VecX> predict_controls(const LinearFBSystem& sys, const AffineGains& g,
                                   const TimeGrid& grid, int k, VecX s, VecX c) {
  const double dt = grid.dt();
  std::vector<VecX> out;
  out.reserve(static_cast<size_t>(grid.M - k));
  for (int j = k; j < grid.M; ++j) {
    const VecX b = g.K[j] * s + g.L[j] * c + g.m[j];
    out.push_back(sys.Cs * s + sys.Cb * b + sys.Cc * c + sys.cb);
    s += dt * (sys.A * s + sys.Bm * b + sys.E * c + sys.e);
    c += dt * (sys.R * (sys.theta - c));
  }
  return out;
}

// ---- deterministic oracle ----------------------------------------------

namespace {

bool all_zero(const MatX& m) { return m.size() == 0 || m.isZero(0); }

// Dense two-point boundary system of the non-cooperative population. The
// right-hand side is affine in u_k = delta Lambda m1(beta_k).
class NoncoopTpbvp {
 public:
  NoncoopTpbvp(const MarketParams& p, const CostSpec& c, const ScenarioLayout& l,
               const PathScenario& path)
      : n_(p.n), N2_(l.N2), M_(p.M) {
    const double dt = p.T / p.M;
    const int n = n_, M = M_;
    const int per = (2 * M + 1) * n;
    const int dim = N2_ * per;
    const MatX I = MatX::Identity(n, n);
    const MatX Lb = p.Lambda.inverse();
    const MatX LbR = Lb - p.rho2 * I;
    MatX A = MatX::Zero(dim, dim);
    base_ = VecX::Zero(dim);
    u_coef_ = MatX::Zero(dim, M * n);
    const auto xi = [&](int j, int k) { return j * per + (k - 1) * n; };  // k >= 1
    const auto yi = [&](int j, int k) { return j * per + (M + k) * n; };
    int row = 0;
    for (int j = 0; j < N2_; ++j) {
      for (int k = 0; k < M; ++k) {
        const VecX c0 = path.c0.col(k);
        const MatX c2 = path.c2.col(static_cast<Eigen::Index>(k) * N2_ + j);
        const VecX l2 = c.pop2.order_flow.apply(c0, c2).col(0);
        // x_{k+1} - x_k + dt LambdaBar y_k - dt (LambdaBar - rho2) m2(y_k) = dt l2 - dt (LambdaBar - rho2) u_k
        A.block(row, xi(j, k + 1), n, n) += I;
        if (k > 0) A.block(row, xi(j, k), n, n) -= I;
        A.block(row, yi(j, k), n, n) += dt * Lb;
        for (int jj = 0; jj < N2_; ++jj) A.block(row, yi(jj, k), n, n) -= (dt / N2_) * LbR;
        base_.segment(row, n) = dt * l2;
        if (k == 0) base_.segment(row, n) += path.eta.col(j);
        u_coef_.block(row, k * n, n, n) = -dt * LbR;
        row += n;
      }
      for (int k = 0; k < M; ++k) {
        // y_k - y_{k+1} - dt [k+1<M] (c_f x_{k+1} + b m2(y_{k+1})) = dt [k+1<M] (h_f - b u_{k+1})
        A.block(row, yi(j, k), n, n) += I;
        A.block(row, yi(j, k + 1), n, n) -= I;
        if (k + 1 < M) {
          const VecX c0 = path.c0.col(k + 1);
          const MatX c2 = path.c2.col(static_cast<Eigen::Index>(k + 1) * N2_ + j);
          A.block(row, xi(j, k + 1), n, n) -= dt * c.pop2.c_f;
          for (int jj = 0; jj < N2_; ++jj) A.block(row, yi(jj, k + 1), n, n) -= (dt * p.b / N2_) * I;
          base_.segment(row, n) = dt * c.pop2.h_f.apply(c0, c2).col(0);
          u_coef_.block(row, (k + 1) * n, n, n) = -dt * p.b * I;
        }
        row += n;
      }
      {
        const VecX c0 = path.c0.col(M);
        const MatX c2 = path.c2.col(static_cast<Eigen::Index>(M) * N2_ + j);
        A.block(row, yi(j, M), n, n) += I;
        A.block(row, xi(j, M), n, n) -= c.pop2.c_g;
        base_.segment(row, n) = c.pop2.h_g.apply(c0, c2).col(0);
        row += n;
      }
    }
    lu_.compute(A);
    MatX rhs(dim, M * n + 1);
    rhs.col(0) = base_;
    rhs.rightCols(M * n) = u_coef_;
    sol_ = lu_.solve(rhs);
    // mean of y_k over agents, affine in u
    ymean_.setZero(M * n, M * n + 1);
    for (int k = 0; k < M; ++k)
      for (int j = 0; j < N2_; ++j)
        ymean_.middleRows(k * n, n) += sol_.middleRows(yi(j, k), n) / N2_;
  }

  // Mean y at nodes 0..M-1 stacked, for stacked u.
  VecX mean_y(const VecX& u) const {
    return ymean_.col(0) + ymean_.rightCols(u.size()) * u;
  }

  void full(const VecX& u, std::vector<MatX>& x, std::vector<MatX>& y,
            const MatX& eta) const {
    const VecX s = sol_.col(0) + sol_.rightCols(u.size()) * u;
    const int n = n_, M = M_, per = (2 * M + 1) * n;
    x.assign(M + 1, MatX(n, N2_));
    y.assign(M + 1, MatX(n, N2_));
    for (int j = 0; j < N2_; ++j) {
      x[0].col(j) = eta.col(j);
      for (int k = 1; k <= M; ++k) x[k].col(j) = s.segment(j * per + (k - 1) * n, n);
      for (int k = 0; k <= M; ++k) y[k].col(j) = s.segment(j * per + (M + k) * n, n);
    }
  }

 private:
  int n_, N2_, M_;
  Eigen::PartialPivLU<MatX> lu_;
  VecX base_;
  MatX u_coef_;
  MatX sol_;
  MatX ymean_;
};

struct PlannerCost {
  const MarketParams& p;
  const CostSpec& c;
  const ScenarioLayout& l;
  const PathScenario& path;
  const NoncoopTpbvp& tp;

  // beta stacked as (k, i, coordinate); returns the cost and optional paths
  double operator()(const VecX& beta, std::vector<MatX>* Xout = nullptr,
                    std::vector<VecX>* price_out = nullptr) const {
    const int n = p.n, N1 = l.N1, M = p.M;
    const double dt = p.T / M;
    VecX u(M * n);
    for (int k = 0; k < M; ++k) {
      VecX mb = VecX::Zero(n);
      for (int i = 0; i < N1; ++i) mb += beta.segment((k * N1 + i) * n, n);
      u.segment(k * n, n) = (p.N1 > 0 ? p.delta : 0.0) * (p.Lambda * (mb / N1));
    }
    const VecX my = tp.mean_y(u);
    MatX X = path.xi;
    double J = 0.0;
    if (Xout) Xout->assign(1, X);
    if (price_out) price_out->clear();
    for (int k = 0; k < M; ++k) {
      const VecX phi = u.segment(k * n, n) - my.segment(k * n, n);
      const VecX c0 = path.c0.col(k);
      const MatX c1 = path.c1.middleCols(static_cast<Eigen::Index>(k) * N1, N1);
      const MatX a1 = c.pop1.running_linear.apply(c0, c1);
      const MatX l1 = c.pop1.order_flow.apply(c0, c1);
      const VecX m = X.rowwise().mean();
      MatX Xn = X;
      for (int i = 0; i < N1; ++i) {
        const VecX b = beta.segment((k * N1 + i) * n, n);
        J += dt * f1_eval<double>(c.pop1, X.col(i), m, phi, b, a1.col(i));
        Xn.col(i) = X.col(i) + dt * (b + p.rho1 * phi + l1.col(i));
      }
      X = Xn;
      if (Xout) Xout->push_back(X);
      if (price_out) price_out->push_back(phi);
    }
    const VecX c0 = path.c0.col(M);
    const MatX c1 = path.c1.middleCols(static_cast<Eigen::Index>(M) * N1, N1);
    const MatX ag = c.pop1.terminal_linear.apply(c0, c1);
    const VecX m = X.rowwise().mean();
    for (int i = 0; i < N1; ++i) J += g1_eval<double>(c.pop1, X.col(i), m, ag.col(i));
    return J;
  }
};

void require_deterministic(const MarketParams& p, const CostSpec& c) {
  (void)p;
  if (!all_zero(c.pop1.sigma0) || !all_zero(c.pop1.sigma) || !all_zero(c.pop2.sigma0) ||
      !all_zero(c.pop2.sigma) || !all_zero(c.info.common.vol) || !all_zero(c.info.pop1.vol) ||
      !all_zero(c.info.pop2.vol))
    throw Error("deterministic_oracle requires every volatility to be zero");
}

}  // namespace

OracleResponse oracle_response(const MarketParams& p, const CostSpec& c,
                               const ScenarioLayout& l, const PathScenario& path,
                               const std::vector<MatX>& beta) {
  const NoncoopTpbvp tp(p, c, l, path);
  const PlannerCost cost{p, c, l, path, tp};
  const int n = p.n, N1 = l.N1, M = p.M;
  VecX b(static_cast<Eigen::Index>(M) * N1 * n);
  VecX u(M * n);
  for (int k = 0; k < M; ++k) {
    for (int i = 0; i < N1; ++i) b.segment((k * N1 + i) * n, n) = beta[k].col(i);
    u.segment(k * n, n) = p.delta * (p.Lambda * beta[k].rowwise().mean());
  }
  OracleResponse r;
  r.cost = cost(b, &r.X, &r.price);
  tp.full(u, r.x, r.y, path.eta);
  return r;
}

OracleResult deterministic_oracle(const MarketParams& p, const CostSpec& c,
                                  const ScenarioLayout& l, const PathScenario& path,
                                  double tol, int max_iter) {
  require_deterministic(p, c);
  const NoncoopTpbvp tp(p, c, l, path);
  const PlannerCost cost{p, c, l, path, tp};
  const int n = p.n, N1 = l.N1, M = p.M;
  const int D = M * N1 * n;

  // exact quadratic: J(b) = J0 + g'b + b'Hb/2
  const double J0 = cost(VecX::Zero(D));
  VecX g(D), Jp(D), Jm(D);
  MatX H(D, D);
  for (int a = 0; a < D; ++a) {
    VecX e = VecX::Zero(D);
    e(a) = 1.0;
    Jp(a) = cost(e);
    Jm(a) = cost(-e);
    g(a) = 0.5 * (Jp(a) - Jm(a));
    H(a, a) = Jp(a) + Jm(a) - 2.0 * J0;
  }
  for (int a = 0; a < D; ++a)
    for (int b = a + 1; b < D; ++b) {
      VecX e = VecX::Zero(D);
      e(a) = 1.0;
      e(b) = 1.0;
      H(a, b) = H(b, a) = cost(e) - Jp(a) - Jp(b) + J0;
    }

  VecX lo = VecX::Constant(D, -std::numeric_limits<double>::infinity());
  VecX hi = VecX::Constant(D, std::numeric_limits<double>::infinity());
  if (c.pop1.box)
    for (int a = 0; a < D; ++a) {
      lo(a) = c.pop1.box->lo(a % n);
      hi(a) = c.pop1.box->hi(a % n);
    }
  const auto proj = [&](const VecX& v) { return VecX(v.cwiseMax(lo).cwiseMin(hi)); };

  const double Lh = std::max(H.diagonal().maxCoeff(), 1e-300);
  VecX b = proj(VecX::Zero(D));
  OracleResult out;
  double res = 0.0;
  int it = 0;
  for (; it < max_iter; ++it) {
    const VecX grad = H * b + g;
    res = (b - proj(b - grad)).cwiseAbs().maxCoeff();
    if (res < tol) break;
    const VecX d = proj(b - grad / Lh) - b;
    const double curv = d.dot(H * d);
    if (!(curv > 0.0))
      throw LineSearchStall("non-positive curvature " + std::to_string(curv) +
                            " along the projected direction");
    const double step = std::clamp(-grad.dot(d) / curv, 0.0, 1.0);
    if (step == 0.0) throw LineSearchStall("zero step at residual " + std::to_string(res));
    b += step * d;
  }
  if (res >= tol) throw NoConvergence("deterministic oracle", it, res);
  out.iterations = it;
  out.residual = res;

  out.beta.assign(M, MatX(n, N1));
  VecX u(M * n);
  for (int k = 0; k < M; ++k) {
    for (int i = 0; i < N1; ++i) out.beta[k].col(i) = b.segment((k * N1 + i) * n, n);
    u.segment(k * n, n) = p.delta * (p.Lambda * out.beta[k].rowwise().mean());
  }
  out.cost = cost(b, &out.X, &out.price);
  tp.full(u, out.x, out.y, path.eta);
  const MatX Lb = p.Lambda.inverse();
  out.alpha.resize(M);
  for (int k = 0; k < M; ++k) out.alpha[k] = -(Lb * (out.y[k].colwise() + out.price[k]));
  return out;
}

}  // namespace mfclear
