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

#include "mfclear/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "mfclear/errors.hpp"
#include "mfclear/hamiltonian.hpp"
#include "mfclear/rng.hpp"
#include "mfclear/scenarios.hpp"

namespace mfclear {

Estimate mean_se(const VecX& v) {
  Estimate e;
  const Eigen::Index n = v.size();
  if (n == 0) return e;
  e.mean = v.mean();
  if (n > 1) e.se = std::sqrt((v.array() - e.mean).square().sum() / (n - 1) / n);
  return e;
}

namespace {

void check_aligned(const EquilibriumSolution& sol, const ScenarioSet& scen, const MarketParams& p) {
  if (!(sol.layout == scen.layout) || sol.paths.size() != scen.paths.size())
    throw MisalignedGrids("solution and scenarios differ in layout or path count");
  if (scen.layout.M != p.M || std::abs(scen.layout.T - p.T) > 1e-14 * std::max(1.0, p.T))
    throw MisalignedGrids("scenario grid does not match the market grid");
  for (size_t i = 0; i < sol.paths.size(); ++i)
    if (sol.paths[i].id != scen.paths[i].id)
      throw MisalignedGrids("solution path ids do not match the scenarios");
}

MatX block(const MatX& m, int k, int N) {
  return m.middleCols(static_cast<Eigen::Index>(k) * N, N);
}

double pair(const MatX& a, const MatX& b) { return (a.array() * b.array()).sum(); }

}  // namespace

CostReport cost_report(MatX J1_paths, MatX J2_paths) {
  CostReport rep;
  rep.J1_paths = std::move(J1_paths);
  rep.J2_paths = std::move(J2_paths);
  for (Eigen::Index i = 0; i < rep.J1_paths.cols(); ++i) rep.J1.push_back(mean_se(rep.J1_paths.col(i)));
  for (Eigen::Index j = 0; j < rep.J2_paths.cols(); ++j) rep.J2.push_back(mean_se(rep.J2_paths.col(j)));
  if (rep.J1_paths.cols() > 0) {
    rep.J1_sum = mean_se(rep.J1_paths.rowwise().sum());
    rep.J1_avg = mean_se(rep.J1_paths.rowwise().mean());
  }
  if (rep.J2_paths.cols() > 0) rep.J2_sum = mean_se(rep.J2_paths.rowwise().sum());
  return rep;
}

CostReport eval_costs(const EquilibriumSolution& sol, const ScenarioSet& scen,
                      const MarketParams& params, const CostSpec& costs) {
  check_aligned(sol, scen, params);
  const int P = scen.size(), N1 = scen.layout.N1, N2 = scen.layout.N2, M = params.M;
  const double dt = params.T / M;
  const Pop1Cost& c1 = costs.pop1;
  const Pop2Cost& c2 = costs.pop2;
  const bool coop = P > 0 && !sol.paths[0].X.empty();

  CostReport rep;
  rep.J1_paths = MatX::Zero(P, coop ? N1 : 0);
  rep.J2_paths = MatX::Zero(P, N2);
  for (int pi = 0; pi < P; ++pi) {
    const PathSolution& ps = sol.paths[pi];
    const PathScenario& s = scen.paths[pi];
    for (int k = 0; k <= M; ++k) {
      const VecX c0 = s.c0.col(k);
      const MatX cc2 = block(s.c2, k, N2);
      if (coop) {
        const MatX cc1 = block(s.c1, k, N1);
        const VecX m = col_mean(ps.X[k]);
        if (k < M) {
          const MatX a1 = c1.running_linear.apply(c0, cc1);
          for (int i = 0; i < N1; ++i)
            rep.J1_paths(pi, i) += dt * f1_eval<double>(c1, ps.X[k].col(i), m, ps.price[k],
                                                        ps.beta[k].col(i), a1.col(i));
        } else {
          const MatX ag = c1.terminal_linear.apply(c0, cc1);
          for (int i = 0; i < N1; ++i)
            rep.J1_paths(pi, i) += g1_eval<double>(c1, ps.X[k].col(i), m, ag.col(i));
        }
      }
      if (k < M) {
        const MatX hf = c2.h_f.apply(c0, cc2);
        for (int j = 0; j < N2; ++j)
          rep.J2_paths(pi, j) +=
              dt * f2_eval(params, c2, ps.x[k].col(j), ps.price[k], ps.alpha[k].col(j), hf.col(j));
      } else {
        const MatX hg = c2.h_g.apply(c0, cc2);
        for (int j = 0; j < N2; ++j) rep.J2_paths(pi, j) += g2_eval(c2, ps.x[k].col(j), hg.col(j));
      }
    }
  }
  return cost_report(std::move(rep.J1_paths), std::move(rep.J2_paths));
}

std::vector<double> clearing_residuals(const EquilibriumSolution& sol) {
  const ScenarioLayout& l = sol.layout;
  const bool finite = std::abs(l.N1 - sol.delta * l.N2) <= 1e-12 * l.N1;
  std::vector<double> out;
  for (const PathSolution& ps : sol.paths) {
    if (ps.beta.empty()) continue;
    out.resize(ps.beta.size(), 0.0);
    for (size_t k = 0; k < ps.beta.size(); ++k) {
      const VecX net = finite ? VecX(ps.beta[k].rowwise().sum() + ps.alpha[k].rowwise().sum())
                              : VecX(sol.delta * col_mean(ps.beta[k]) + col_mean(ps.alpha[k]));
      out[k] = std::max(out[k], net.cwiseAbs().maxCoeff());
    }
  }
  return out;
}

double stationarity_residual(const EquilibriumSolution& sol, const ScenarioSet& scen,
                             const MarketParams& params, const CostSpec& costs) {
  check_aligned(sol, scen, params);
  const auto coef = HamiltonianCoefficients<double>::make(params, costs, sol.delta);
  const int N1 = scen.layout.N1, N2 = scen.layout.N2;
  double res = 0.0;
  for (int pi = 0; pi < scen.size(); ++pi) {
    const PathSolution& ps = sol.paths[pi];
    const PathScenario& s = scen.paths[pi];
    if (ps.P.empty()) continue;
    for (size_t k = 0; k < ps.beta.size(); ++k) {
      const int kk = static_cast<int>(k);
      AgentStateBlock<double> u{ps.X[k], ps.P[k], ps.x[k], ps.y[k], ps.p[k], ps.r[k]};
      const VecX c0 = s.c0.col(kk);
      const MatX cc1 = block(s.c1, kk, N1), cc2 = block(s.c2, kk, N2);
      AffineSlice<double> a{costs.pop1.order_flow.apply(c0, cc1),
                            costs.pop1.running_linear.apply(c0, cc1),
                            costs.pop2.order_flow.apply(c0, cc2), costs.pop2.h_f.apply(c0, cc2)};
      const HamiltonianGradient<double> g = grad_H_finite<double>(u, ps.beta[k], a, coef);
      res = std::max(res, mfclear::stationarity_residual<double>(ps.beta[k], g.beta, coef));
    }
  }
  return res;
}

double wasserstein2_1d(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("wasserstein2_1d needs equal sample counts");
  if (a.empty()) return 0.0;
  std::vector<double> sa = a, sb = b;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double s = 0.0;
  for (size_t i = 0; i < sa.size(); ++i) s += (sa[i] - sb[i]) * (sa[i] - sb[i]);
  return std::sqrt(s / static_cast<double>(sa.size()));
}

double wasserstein2_1d(const MatX& a, const MatX& b) {
  if (a.rows() != 1 || b.rows() != 1)
    throw UnsupportedDimension("exact Wasserstein distance only on the line");
  return wasserstein2_1d(std::vector<double>(a.data(), a.data() + a.size()),
                         std::vector<double>(b.data(), b.data() + b.size()));
}

double wasserstein2_quantile(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DimensionMismatch("wasserstein2_quantile: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  size_t i = 0, j = 0;
  double level = 0.0, s = 0.0;
  while (i < a.size() && j < b.size()) {
    const double ea = (i + 1) / na, eb = (j + 1) / nb;
    const double next = std::min(ea, eb);
    s += (next - level) * (a[i] - b[j]) * (a[i] - b[j]);
    level = next;
    if (ea <= next) ++i;
    if (eb <= next) ++j;
  }
  return std::sqrt(s);
}

double estimate_eps_N1(const std::vector<std::vector<MatX>>& finite,
                       const std::vector<std::vector<MatX>>& cloud, int N1) {
  if (N1 < 1) throw DimensionMismatch("estimate_eps_N1: N1 must be positive");
  if (finite.size() != cloud.size() || finite.empty())
    throw MisalignedGrids("estimate_eps_N1: path counts differ");
  const size_t nodes = finite[0].size();
  double sup = 0.0;
  for (size_t k = 0; k < nodes; ++k) {
    double m2 = 0.0;
    for (size_t p = 0; p < finite.size(); ++p) {
      if (finite[p].size() != nodes || cloud[p].size() != nodes)
        throw MisalignedGrids("estimate_eps_N1: node counts differ");
      const MatX& a = finite[p][k];
      const MatX& b = cloud[p][k];
      if (a.rows() != 1 || b.rows() != 1)
        throw UnsupportedDimension("estimate_eps_N1 works on the line only");
      const double w = wasserstein2_quantile(std::vector<double>(a.data(), a.data() + a.size()),
                                             std::vector<double>(b.data(), b.data() + b.size()));
      m2 += w * w;
    }
    sup = std::max(sup, m2 / static_cast<double>(finite.size()));
  }
  return std::max(1.0 / std::sqrt(static_cast<double>(N1)), std::sqrt(sup));
}

MonotonicityRecord monotonicity_check(const NodeState& u, const NodeState& v, double t,
                                      const MarketParams& params, const CostSpec& costs,
                                      double C) {
  const Market market(params, costs, params.delta);
  const ModelConstants mc = model_constants(costs);
  MatX dXu, dxu, dru, dXv, dxv, drv, gPu, gyu, gpu, gPv, gyv, gpv;
  const NodeControls cu = market.controls(u), cv = market.controls(v);
  market.drifts(u, cu, dXu, dxu, dru);
  market.drifts(v, cv, dXv, dxv, drv);
  market.drivers(u, cu, gPu, gyu, gpu);
  market.drivers(v, cv, gPv, gyv, gpv);
  const MatX DX = u.X - v.X, Dx = u.x - v.x, Dr = u.r - v.r;
  const MatX DP = u.P - v.P, Dy = u.y - v.y, Dp = u.p - v.p;

  MonotonicityRecord rec;
  rec.t = t;
  // backward drift F = -driver
  rec.lhs = pair(dXu - dXv, DP) + pair(dxu - dxv, Dy) - pair(dru - drv, Dp) -
            pair(gPu - gPv, DX) - pair(gyu - gyv, Dx) + pair(gpu - gpv, Dr);
  rec.forward_sq = DX.squaredNorm() + Dx.squaredNorm() + Dr.squaredNorm();
  rec.backward_sq = DP.squaredNorm() + Dy.squaredNorm() + Dp.squaredNorm();
  rec.bound = -mc.gamma_f() * rec.forward_sq + params.delta * C * rec.backward_sq;
  const double scale = 1e-12 * std::max(1.0, rec.forward_sq + rec.backward_sq);
  rec.pass = rec.lhs <= rec.bound + scale;

  MatX Pu, yu, pu, Pv, yv, pv;
  market.terminal(u, Pu, yu, pu);
  market.terminal(v, Pv, yv, pv);
  rec.terminal_lhs = pair(Pu - Pv, DX) + pair(yu - yv, Dx) - pair(pu - pv, Dr);
  rec.terminal_bound =
      mc.gamma1g * DX.squaredNorm() + mc.gamma2g * (Dx.squaredNorm() + Dr.squaredNorm());
  rec.terminal_pass = rec.terminal_lhs >= rec.terminal_bound - scale;
  return rec;
}

namespace {

// Information part shared by both states of a pair.
NodeState base_state(const MarketParams& p, const CostSpec& c) {
  NodeState s;
  const int n = p.n, N1 = p.N1, N2 = p.N2;
  s.X = s.P = MatX::Zero(n, N1);
  s.x = s.y = s.p = s.r = MatX::Zero(n, N2);
  s.c0 = c.info.common.init;
  s.c1 = c.info.pop1.init.replicate(1, N1);
  s.c2 = c.info.pop2.init.replicate(1, N2);
  return s;
}

// blocks ordered X, x, r, P, y, p
std::array<MatX*, 6> blocks(NodeState& s) { return {&s.X, &s.x, &s.r, &s.P, &s.y, &s.p}; }

}  // namespace

MonotonicityFit fit_monotonicity_constant(const MarketParams& params, const CostSpec& costs,
                                          int pairs, uint64_t seed, double jitter) {
  if (pairs < 1) throw DimensionMismatch("fit_monotonicity_constant: need at least one pair");
  const int n = params.n;
  const int size[6] = {params.N1, params.N2, params.N2, params.N1, params.N2, params.N2};
  const NodeState zero = base_state(params, costs);
  const double gf = model_constants(costs).gamma_f();

  const auto make = [&](const VecX& v) {
    NodeState s = zero;
    auto b = blocks(s);
    for (int q = 0; q < 6; ++q) b[q]->colwise() += v.segment(q * n, n);
    return s;
  };
  const auto excess = [&](const NodeState& s) {
    const MonotonicityRecord r = monotonicity_check(s, zero, 0.0, params, costs, 0.0);
    return r.lhs + gf * r.forward_sq;
  };

  // Quadratic form of the excess on block-constant states, by polarization.
  const int d = 6 * n;
  MatX Q(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) {
      const VecX ea = VecX::Unit(d, a), eb = VecX::Unit(d, b);
      Q(a, b) = (excess(make(ea + eb)) - excess(make(ea - eb))) / 4.0;
    }
  const int h = 3 * n;
  const Eigen::PartialPivLU<MatX> ff(Q.topLeftCorner(h, h));
  const MatX fb = Q.topRightCorner(h, h);

  MonotonicityFit fit;
  fit.delta = params.delta;
  fit.pairs = pairs;
  fit.worst_terminal_gap = std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (int s = 0; s < pairs; ++s) {
    const NormalStream rng(seed, static_cast<uint32_t>(s),
                           static_cast<uint32_t>(Stream::kMonotonicitySampler), 0);
    uint64_t draw = 0;
    VecX v(d);
    for (int q = 3; q < 6; ++q)
      for (int i = 0; i < n; ++i) v(q * n + i) = rng(draw++) / std::sqrt(double(size[q]));
    v.head(h) = -ff.solve(fb * v.tail(h));
    NodeState st = zero;
    auto b = blocks(st);
    for (int q = 0; q < 6; ++q)
      for (Eigen::Index j = 0; j < b[q]->cols(); ++j)
        for (int i = 0; i < n; ++i) (*b[q])(i, j) = v(q * n + i) * (1.0 + jitter * rng(draw++));
    const MonotonicityRecord r = monotonicity_check(st, zero, 0.0, params, costs, 0.0);
    if (r.backward_sq > 0.0) worst = std::max(worst, (r.lhs + gf * r.forward_sq) / r.backward_sq);
    fit.worst_terminal_gap = std::min(fit.worst_terminal_gap, r.terminal_lhs - r.terminal_bound);
  }
  fit.worst_excess = worst;
  fit.min_C = worst / params.delta;
  return fit;
}

RateFit fit_convergence_rate(const std::vector<double>& N1, const std::vector<double>& err) {
  if (N1.size() != err.size() || N1.size() < 4)
    throw DegenerateFit("rate fit needs at least four (N1, error) points");
  const Eigen::Index m = static_cast<Eigen::Index>(N1.size());
  VecX lx(m), ly(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(N1[i] > 0.0) || !(err[i] > 0.0) || !std::isfinite(err[i]))
      throw DegenerateFit("rate fit needs positive finite N1 and errors");
    lx(i) = std::log(N1[i]);
    ly(i) = std::log(err[i]);
  }
  const double mx = lx.mean(), my = ly.mean();
  const double sxx = (lx.array() - mx).square().sum();
  if (sxx <= 0.0) throw DegenerateFit("rate fit needs distinct N1 values");
  const double sxy = ((lx.array() - mx) * (ly.array() - my)).sum();
  const double syy = (ly.array() - my).square().sum();
  RateFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.r2 = syy > 0.0 ? std::clamp(sxy * sxy / (sxx * syy), 0.0, 1.0) : 1.0;
  return f;
}

namespace {

nlohmann::json est(const Estimate& e) { return {{"mean", e.mean}, {"se", e.se}}; }

}  // namespace

std::string to_json(const Diagnostics& d) {
  using nlohmann::json;
  json j;
  j["clearing_residual"] = d.clearing_residual;
  if (!d.clearing_residual.empty())
    j["clearing_residual_max"] =
        *std::max_element(d.clearing_residual.begin(), d.clearing_residual.end());
  if (d.stationarity_residual) j["stationarity_residual"] = *d.stationarity_residual;
  if (d.costs) {
    const CostReport& c = *d.costs;
    json j1 = json::array(), j2 = json::array();
    for (const Estimate& e : c.J1) j1.push_back(est(e));
    for (const Estimate& e : c.J2) j2.push_back(est(e));
    if (d.meanfield) {
      j["cost_calJ1"] = est(c.J1_avg);
      j["cost_calJ1_per_particle"] = j1;
    } else {
      j["cost_J1"] = {{"per_agent", j1}, {"sum", est(c.J1_sum)}, {"agent_average", est(c.J1_avg)}};
    }
    j["cost_J2"] = {{"per_agent", j2}, {"sum", est(c.J2_sum)}};
  }
  if (d.eps_N1) j["eps_N1"] = *d.eps_N1;
  if (!d.monotonicity.empty()) {
    json m = json::array();
    for (const MonotonicityRecord& r : d.monotonicity)
      m.push_back({{"t", r.t},
                   {"lhs", r.lhs},
                   {"bound", r.bound},
                   {"pass", r.pass},
                   {"terminal_lhs", r.terminal_lhs},
                   {"terminal_bound", r.terminal_bound},
                   {"terminal_pass", r.terminal_pass}});
    j["monotonicity_records"] = m;
  }
  if (d.rate_fit)
    j["rate_fit"] = {{"slope", d.rate_fit->slope},
                     {"intercept", d.rate_fit->intercept},
                     {"r2", d.rate_fit->r2}};
  if (d.stats) {
    const SolveStats& s = *d.stats;
    j["solve_stats"] = {{"outer_steps", s.outer_steps},
                        {"inner_iterations", s.inner_iterations},
                        {"halvings", s.halvings},
                        {"rho_reached", s.rho_reached},
                        {"fixpoint_residual", s.fixpoint_residual},
                        {"terminal_residual", s.terminal_residual},
                        {"residuals", s.residuals}};
  }
  return j.dump(2);
}

}  // namespace mfclear
