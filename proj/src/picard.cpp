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

#include "picard.hpp"

#include <cmath>
#include <limits>

#include "mfclear/errors.hpp"

namespace mfclear::detail {

namespace {

bool zero_or_empty(const MatX& m) { return m.size() == 0 || m.isZero(0); }

MatX centered(const MatX& m) {
  MatX out = m;
  if (m.rows() && m.cols()) out.colwise() -= col_mean(m);
  return out;
}

VecX mean_or_empty(const MatX& m) {
  return m.cols() ? col_mean(m) : VecX::Zero(m.rows());
}

VecX concat(std::initializer_list<VecX> parts) {
  Eigen::Index len = 0;
  for (const VecX& v : parts) len += v.size();
  VecX out(len);
  Eigen::Index at = 0;
  for (const VecX& v : parts) {
    out.segment(at, v.size()) = v;
    at += v.size();
  }
  return out;
}

double max_abs_diff(const std::vector<MatX>& a, const std::vector<MatX>& b) {
  double m = 0.0;
  for (size_t k = 0; k < a.size(); ++k)
    if (a[k].size()) m = std::max(m, (a[k] - b[k]).cwiseAbs().maxCoeff());
  return m;
}

void relax(std::vector<MatX>& cur, const std::vector<MatX>& next, double theta) {
  for (size_t k = 0; k < cur.size(); ++k) cur[k] = theta * next[k] + (1.0 - theta) * cur[k];
}

int feature_count(int q, int degree) {
  return degree == 1 ? 1 + q : 1 + q + q * (q + 1) / 2;
}

void poly_features(const VecX& z, int degree, double* out) {
  const Eigen::Index q = z.size();
  int at = 0;
  out[at++] = 1.0;
  for (Eigen::Index a = 0; a < q; ++a) out[at++] = z(a);
  if (degree < 2) return;
  for (Eigen::Index a = 0; a < q; ++a)
    for (Eigen::Index b = a; b < q; ++b) out[at++] = z(a) * z(b);
}

// Least-squares projection of the rows of `target` on the span of `design`.
// Goes through an orthonormal basis of the column space; multiplying the
// design by fitted coefficients loses digits on near-collinear features.
MatX project(const MatX& design, const MatX& target) {
  Eigen::ColPivHouseholderQR<MatX> qr(design);
  const Eigen::Index r = qr.rank();
  MatX coef = MatX::Zero(design.rows(), target.cols());
  coef.topRows(r) = (qr.householderQ().transpose() * target).topRows(r);
  return qr.householderQ() * coef;
}

}  // namespace

Engine::Engine(const Market& market, const ScenarioLayout& layout, const SolverConfig& cfg,
               Mode mode)
    : market_(market), layout_(layout), cfg_(cfg), mode_(mode), grid_{layout.T, layout.M} {
  const CostSpec& c = market.costs();
  gamma_ = model_constants(c).homotopy_gamma();
  lq_ = resolve_cond_exp(cfg, c) == CondExpKind::kLqExact;
  if (lq_ && market.constrained())
    throw Error("lq_exact conditional expectation requires unconstrained controls");
  noiseless_ = zero_or_empty(c.pop1.sigma0) && zero_or_empty(c.pop1.sigma) &&
               zero_or_empty(c.pop2.sigma0) && zero_or_empty(c.pop2.sigma) &&
               zero_or_empty(c.info.common.vol) && zero_or_empty(c.info.pop1.vol) &&
               zero_or_empty(c.info.pop2.vol);
  if (lq_) {
    if (mode_ == Mode::kFull)
      full_ = linearize_full(market);
    else
      nc_ = linearize_noncoop(market);
  }
}

PathWork Engine::prepare(const PathScenario& s) const {
  const int n = layout_.n, N1 = layout_.N1, N2 = layout_.N2, M = layout_.M;
  const double dt = grid_.dt();
  const CostSpec& c = market_.costs();
  PathWork w;
  w.scen = &s;
  for (auto* v : {&w.X, &w.P}) v->assign(M + 1, MatX::Zero(n, N1));
  for (auto* v : {&w.x, &w.r, &w.y, &w.p}) v->assign(M + 1, MatX::Zero(n, N2));
  w.nX.resize(M);
  w.nx.resize(M);
  w.nc0.resize(M);
  w.nc1.resize(M);
  w.nc2.resize(M);
  const auto info_noise = [&](const InfoProcess& ip, const MatX& cp, int N, int k) {
    const MatX cur = cp.middleCols(static_cast<Eigen::Index>(k) * N, N);
    MatX drift = -(ip.rate * cur);
    drift.colwise() += ip.rate * ip.mean;
    return MatX(cp.middleCols(static_cast<Eigen::Index>(k + 1) * N, N) - cur - dt * drift);
  };
  for (int k = 0; k < M; ++k) {
    const VecX dW0 = s.dW0.col(k);
    w.nX[k] = c.pop1.sigma * s.dW1.middleCols(static_cast<Eigen::Index>(k) * N1, N1);
    w.nX[k].colwise() += c.pop1.sigma0 * dW0;
    w.nx[k] = c.pop2.sigma * s.dW2.middleCols(static_cast<Eigen::Index>(k) * N2, N2);
    w.nx[k].colwise() += c.pop2.sigma0 * dW0;
    w.nc0[k] = info_noise(c.info.common, s.c0, 1, k).col(0);
    w.nc1[k] = info_noise(c.info.pop1, s.c1, N1, k);
    w.nc2[k] = info_noise(c.info.pop2, s.c2, N2, k);
  }
  return w;
}

StageGains Engine::gains(double rho) const {
  StageGains g;
  if (mode_ == Mode::kFull) {
    g.mean = affine_backward(full_.mean, grid_, rho, gamma_, cfg_.blowup);
    g.dev1 = affine_backward(full_.dev1, grid_, rho, gamma_, cfg_.blowup);
    g.dev2 = affine_backward(full_.dev2, grid_, rho, gamma_, cfg_.blowup);
  } else {
    g.mean = affine_backward(nc_.mean, grid_, rho, gamma_, cfg_.blowup);
    g.dev1 = affine_backward(nc_.dev, grid_, rho, gamma_, cfg_.blowup);
  }
  return g;
}

NodeState Engine::node(const PathWork& w, int k, const MatX& P, const MatX& y,
                       const MatX& p) const {
  const int N1 = layout_.N1, N2 = layout_.N2;
  NodeState st;
  st.X = w.X[k];
  st.x = w.x[k];
  st.r = w.r[k];
  st.P = P;
  st.y = y;
  st.p = p;
  st.c0 = w.scen->c0.col(k);
  st.c1 = w.scen->c1.middleCols(static_cast<Eigen::Index>(k) * N1, N1);
  st.c2 = w.scen->c2.middleCols(static_cast<Eigen::Index>(k) * N2, N2);
  return st;
}

void Engine::set_affine(PathWork& w, int k, const StageGains& g) const {
  const int n = layout_.n, N1 = layout_.N1, N2 = layout_.N2;
  const VecX c0 = w.scen->c0.col(k);
  const MatX c2 = w.scen->c2.middleCols(static_cast<Eigen::Index>(k) * N2, N2);
  if (mode_ == Mode::kFull) {
    const MatX c1 = w.scen->c1.middleCols(static_cast<Eigen::Index>(k) * N1, N1);
    const VecX s = concat({col_mean(w.X[k]), col_mean(w.x[k]), col_mean(w.r[k])});
    const VecX c = concat({c0, mean_or_empty(c1), mean_or_empty(c2)});
    const VecX bm = g.mean.K[k] * s + g.mean.L[k] * c + g.mean.m[k];
    const MatX d1 = g.dev1.K[k] * centered(w.X[k]) + g.dev1.L[k] * centered(c1);
    MatX ds(2 * n, N2);
    ds << centered(w.x[k]), centered(w.r[k]);
    const MatX d2 = g.dev2.K[k] * ds + g.dev2.L[k] * centered(c2);
    w.P[k] = d1.colwise() + bm.segment(0, n);
    w.y[k] = d2.topRows(n).colwise() + bm.segment(n, n);
    w.p[k] = d2.bottomRows(n).colwise() + bm.segment(2 * n, n);
  } else {
    const VecX s = col_mean(w.x[k]);
    const VecX c = concat({c0, mean_or_empty(c2)});
    VecX bm = g.mean.K[k] * s + g.mean.L[k] * c + g.mean.m[k];
    if (k < layout_.M)
      for (size_t j = 0; j < g.mean.Gamma[k].size(); ++j) bm += g.mean.Gamma[k][j] * w.fc.at[k][j];
    const MatX d = g.dev1.K[k] * centered(w.x[k]) + g.dev1.L[k] * centered(c2);
    w.y[k] = d.colwise() + bm;
  }
}

void Engine::forward(PathWork& w, double rho, const StageGains* affine) const {
  const int M = layout_.M, N2 = layout_.N2;
  const double h = grid_.dt() * rho;
  w.x[0] = w.scen->eta;
  if (mode_ == Mode::kFull) {
    w.X[0] = w.scen->xi;
    w.r[0].setZero();
    MatX dX, dx, dr;
    for (int k = 0; k < M; ++k) {
      if (affine) set_affine(w, k, *affine);
      const NodeState st = node(w, k, w.P[k], w.y[k], w.p[k]);
      const NodeControls u = market_.controls(st);
      market_.drifts(st, u, dX, dx, dr);
      w.X[k + 1] = w.X[k] + h * dX + w.nX[k];
      w.x[k + 1] = w.x[k] + h * dx + w.nx[k];
      w.r[k + 1] = w.r[k] + h * dr;
    }
  } else {
    for (int k = 0; k < M; ++k) {
      if (affine) set_affine(w, k, *affine);
      const VecX c0 = w.scen->c0.col(k);
      const MatX c2 = w.scen->c2.middleCols(static_cast<Eigen::Index>(k) * N2, N2);
      const VecX price = market_.nc_price(w.y[k], w.u[k]);
      w.x[k + 1] = w.x[k] + h * market_.nc_drift(w.y[k], price, c0, c2) + w.nx[k];
    }
  }
  if (affine) set_affine(w, M, *affine);
}

Engine::Backward Engine::backward(const std::vector<PathWork>& group, double rho,
                                  const StageGains* g) const {
  const int M = layout_.M, N2 = layout_.N2;
  const double dt = grid_.dt();
  const double hom = (1.0 - rho) * gamma_;
  const bool full = mode_ == Mode::kFull;
  const size_t G = group.size();
  Backward b;
  b.P.resize(G);
  b.y.resize(G);
  b.p.resize(G);
  for (size_t gi = 0; gi < G; ++gi) {
    const PathWork& w = group[gi];
    b.y[gi].resize(M + 1);
    const VecX c0 = w.scen->c0.col(M);
    const MatX c2 = w.scen->c2.middleCols(static_cast<Eigen::Index>(M) * N2, N2);
    if (full) {
      b.P[gi].resize(M + 1);
      b.p[gi].resize(M + 1);
      MatX tP, ty, tp;
      market_.terminal(node(w, M, w.P[M], w.y[M], w.p[M]), tP, ty, tp);
      b.P[gi][M] = rho * tP + (1.0 - rho) * w.X[M];
      b.y[gi][M] = rho * ty + (1.0 - rho) * w.x[M];
      b.p[gi][M] = rho * tp - (1.0 - rho) * w.r[M];
    } else {
      b.y[gi][M] = rho * market_.nc_terminal(w.x[M], c0, c2) + (1.0 - rho) * w.x[M];
    }
  }
  for (int k = M - 1; k >= 0; --k) {
    const int k1 = k + 1;
    for (size_t gi = 0; gi < G; ++gi) {
      const PathWork& w = group[gi];
      MatX& Zy = b.y[gi][k];
      Zy = b.y[gi][k1];
      if (full) {
        MatX& ZP = b.P[gi][k];
        MatX& Zp = b.p[gi][k];
        ZP = b.P[gi][k1];
        Zp = b.p[gi][k1];
        if (k1 < M) {
          const NodeState st = node(w, k1, b.P[gi][k1], b.y[gi][k1], b.p[gi][k1]);
          const NodeControls u = market_.controls(st);
          MatX gP, gy, gp;
          market_.drivers(st, u, gP, gy, gp);
          ZP += dt * (rho * gP + hom * w.X[k1]);
          Zy += dt * (rho * gy + hom * w.x[k1]);
          Zp += dt * (rho * gp - hom * w.r[k1]);
        }
        if (lq_) cond_exp_lq(w, k, *g, ZP, Zy, Zp);
      } else {
        if (k1 < M) {
          const VecX c0 = w.scen->c0.col(k1);
          const MatX c2 = w.scen->c2.middleCols(static_cast<Eigen::Index>(k1) * N2, N2);
          const VecX price = market_.nc_price(b.y[gi][k1], w.u[k1]);
          Zy += dt * (rho * market_.nc_driver(w.x[k1], price, c0, c2) + hom * w.x[k1]);
        }
        MatX none;
        if (lq_) cond_exp_lq(w, k, *g, none, Zy, none);
      }
    }
    if (!lq_ && !noiseless_) cond_exp_regression(group, k, b);
  }
  return b;
}

// Z at node k + 1 minus its exact loading on the noise of step k.
void Engine::cond_exp_lq(const PathWork& w, int k, const StageGains& g, MatX& P, MatX& y,
                         MatX& p) const {
  const int n = layout_.n;
  const int k1 = k + 1;
  if (mode_ == Mode::kFull) {
    const VecX sm = concat({col_mean(w.nX[k]), col_mean(w.nx[k]), VecX::Zero(n)});
    const VecX cm = concat({w.nc0[k], mean_or_empty(w.nc1[k]), mean_or_empty(w.nc2[k])});
    const VecX lm = g.mean.W[k1] * sm + g.mean.V[k1] * cm;
    const MatX l1 = g.dev1.W[k1] * centered(w.nX[k]) + g.dev1.V[k1] * centered(w.nc1[k]);
    MatX dn(2 * n, layout_.N2);
    dn << centered(w.nx[k]), MatX::Zero(n, layout_.N2);
    const MatX l2 = g.dev2.W[k1] * dn + g.dev2.V[k1] * centered(w.nc2[k]);
    P -= l1;
    P.colwise() -= lm.segment(0, n);
    y -= l2.topRows(n);
    y.colwise() -= lm.segment(n, n);
    p -= l2.bottomRows(n);
    p.colwise() -= lm.segment(2 * n, n);
  } else {
    VecX lm = g.mean.W[k1] * col_mean(w.nx[k]) +
              g.mean.V[k1] * concat({w.nc0[k], mean_or_empty(w.nc2[k])});
    if (k1 < layout_.M) {
      const auto& GT = g.mean.GammaT[k1];
      for (size_t j = 0; j < GT.size(); ++j) lm += GT[j] * (w.fc.at[k1][j] - w.fc.at[k][j + 1]);
    }
    y -= g.dev1.W[k1] * centered(w.nx[k]) + g.dev1.V[k1] * centered(w.nc2[k]);
    y.colwise() -= lm;
  }
}

// Pooled regression over all paths and agents of the group on polynomial
// features of the agent's own state and the population means at node k.
void Engine::cond_exp_regression(const std::vector<PathWork>& group, int k,
                                 Backward& b) const {
  const int n = layout_.n, N1 = layout_.N1, N2 = layout_.N2;
  const int deg = cfg_.regression_degree;
  const int G = static_cast<int>(group.size());
  const bool full = mode_ == Mode::kFull;

  std::vector<VecX> common(G);
  for (int gi = 0; gi < G; ++gi) {
    const PathWork& w = group[gi];
    const VecX c0 = w.scen->c0.col(k);
    const MatX c1 = w.scen->c1.middleCols(static_cast<Eigen::Index>(k) * N1, N1);
    const MatX c2 = w.scen->c2.middleCols(static_cast<Eigen::Index>(k) * N2, N2);
    if (full)
      common[gi] = concat({col_mean(w.X[k]), col_mean(w.x[k]), col_mean(w.r[k]), c0,
                           mean_or_empty(c1), mean_or_empty(c2)});
    else
      common[gi] = concat({col_mean(w.x[k]), c0, mean_or_empty(c2), w.u[k]});
  }

  if (full) {
    const int m1 = layout_.m1;
    const int q = n + m1 + static_cast<int>(common[0].size());
    MatX D(static_cast<Eigen::Index>(G) * N1, feature_count(q, deg));
    MatX T(D.rows(), n);
    VecX z(q), f(D.cols());
    for (int gi = 0; gi < G; ++gi) {
      const PathWork& w = group[gi];
      const MatX c1 = w.scen->c1.middleCols(static_cast<Eigen::Index>(k) * N1, N1);
      for (int i = 0; i < N1; ++i) {
        z << w.X[k].col(i), c1.col(i), common[gi];
        poly_features(z, deg, f.data());
        D.row(gi * N1 + i) = f.transpose();
        T.row(gi * N1 + i) = b.P[gi][k].col(i).transpose();
      }
    }
    const MatX fit = project(D, T);
    for (int gi = 0; gi < G; ++gi)
      b.P[gi][k] = fit.middleRows(static_cast<Eigen::Index>(gi) * N1, N1).transpose();
  }

  const int m2 = layout_.m2;
  const int own = (full ? 2 * n : n) + m2;
  const int q = own + static_cast<int>(common[0].size());
  const int width = full ? 2 * n : n;
  MatX D(static_cast<Eigen::Index>(G) * N2, feature_count(q, deg));
  MatX T(D.rows(), width);
  VecX z(q), f(D.cols());
  for (int gi = 0; gi < G; ++gi) {
    const PathWork& w = group[gi];
    const MatX c2 = w.scen->c2.middleCols(static_cast<Eigen::Index>(k) * N2, N2);
    for (int j = 0; j < N2; ++j) {
      if (full) {
        z << w.x[k].col(j), w.r[k].col(j), c2.col(j), common[gi];
        T.row(gi * N2 + j) << b.y[gi][k].col(j).transpose(), b.p[gi][k].col(j).transpose();
      } else {
        z << w.x[k].col(j), c2.col(j), common[gi];
        T.row(gi * N2 + j) = b.y[gi][k].col(j).transpose();
      }
      poly_features(z, deg, f.data());
      D.row(gi * N2 + j) = f.transpose();
    }
  }
  const MatX fit = project(D, T);
  for (int gi = 0; gi < G; ++gi) {
    const auto rows = fit.middleRows(static_cast<Eigen::Index>(gi) * N2, N2);
    b.y[gi][k] = rows.leftCols(n).transpose();
    if (full) b.p[gi][k] = rows.rightCols(n).transpose();
  }
}

bool Engine::run_stage(std::vector<PathWork>& group, double rho, double tol,
                       std::vector<double>& history, int& iterations) const {
  StageGains g;
  if (lq_) g = gains(rho);
  const StageGains* gp = lq_ ? &g : nullptr;
  if (lq_ && cfg_.warm_start)
    for (PathWork& w : group) forward(w, rho, gp);
  const bool full = mode_ == Mode::kFull;
  double best = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg_.max_inner; ++it) {
    for (PathWork& w : group) forward(w, rho, nullptr);
    Backward b = backward(group, rho, gp);
    double res = 0.0;
    for (size_t gi = 0; gi < group.size(); ++gi) {
      PathWork& w = group[gi];
      res = std::max(res, max_abs_diff(b.y[gi], w.y));
      if (full) res = std::max({res, max_abs_diff(b.P[gi], w.P), max_abs_diff(b.p[gi], w.p)});
      // NaN compares false above; catch it explicitly
      for (const MatX& m : b.y[gi])
        if (!m.allFinite()) res = std::numeric_limits<double>::infinity();
      relax(w.y, b.y[gi], cfg_.damping);
      if (full) {
        relax(w.P, b.P[gi], cfg_.damping);
        relax(w.p, b.p[gi], cfg_.damping);
      }
    }
    ++iterations;
    history.push_back(res);
    if (!std::isfinite(res)) return false;
    if (res < tol) return true;
    best = std::min(best, res);
    if (it >= 3 && res > cfg_.divergence_factor * best) return false;
  }
  return false;
}

SolveStats Engine::solve(std::vector<PathWork>& group) const {
  SolveStats st;
  std::vector<double> hist;
  if (!run_stage(group, 0.0, cfg_.stage_tol, hist, st.inner_iterations))
    throw ContractionFailure(0.0, hist);
  double rho = 0.0;
  double zeta = cfg_.rho_step;
  int halved = 0;
  int attempts = 0;
  while (rho < 1.0) {
    if (++attempts > cfg_.max_outer) throw ContractionFailure(rho, hist);
    double target = std::min(1.0, rho + zeta);
    if (1.0 - target < 1e-12) target = 1.0;
    const std::vector<PathWork> saved = group;
    hist.clear();
    const bool last = target == 1.0;
    if (run_stage(group, target, last ? cfg_.fixpoint_tol : cfg_.stage_tol, hist,
                  st.inner_iterations)) {
      rho = target;
      ++st.outer_steps;
      halved = 0;
    } else {
      group = saved;
      if (halved == cfg_.max_halvings) throw ContractionFailure(rho, hist);
      zeta /= 2.0;
      ++halved;
      ++st.halvings;
    }
  }
  st.rho_reached = 1.0;
  st.fixpoint_residual = hist.empty() ? 0.0 : hist.back();
  st.residuals = hist;

  const int M = layout_.M, N2 = layout_.N2;
  for (PathWork& w : group) {
    forward(w, 1.0, nullptr);
    const VecX c0 = w.scen->c0.col(M);
    const MatX c2 = w.scen->c2.middleCols(static_cast<Eigen::Index>(M) * N2, N2);
    double tr;
    if (mode_ == Mode::kFull) {
      MatX tP, ty, tp;
      market_.terminal(node(w, M, w.P[M], w.y[M], w.p[M]), tP, ty, tp);
      tr = std::max({(tP - w.P[M]).cwiseAbs().maxCoeff(), (ty - w.y[M]).cwiseAbs().maxCoeff(),
                     (tp - w.p[M]).cwiseAbs().maxCoeff()});
    } else {
      tr = (market_.nc_terminal(w.x[M], c0, c2) - w.y[M]).cwiseAbs().maxCoeff();
    }
    st.terminal_residual = std::max(st.terminal_residual, tr);
  }
  return st;
}

PathSolution Engine::extract(const PathWork& w) const {
  const int M = layout_.M;
  PathSolution s;
  s.id = w.scen->id;
  s.x = w.x;
  s.y = w.y;
  s.alpha.resize(M);
  s.price.resize(M);
  if (mode_ == Mode::kFull) {
    s.X = w.X;
    s.r = w.r;
    s.P = w.P;
    s.p = w.p;
    s.beta.resize(M);
    for (int k = 0; k < M; ++k) {
      const NodeControls u = market_.controls(node(w, k, w.P[k], w.y[k], w.p[k]));
      s.beta[k] = u.beta;
      s.price[k] = u.price;
      s.alpha[k] = market_.alpha(w.y[k], u.price);
    }
  } else {
    for (int k = 0; k < M; ++k) {
      s.price[k] = market_.nc_price(w.y[k], w.u[k]);
      s.alpha[k] = market_.alpha(w.y[k], s.price[k]);
    }
  }
  return s;
}

}  // namespace mfclear::detail
