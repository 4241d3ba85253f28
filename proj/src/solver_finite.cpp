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

#include <cmath>

#include "mfclear/errors.hpp"
#include "mfclear/solver.hpp"
#include "picard.hpp"

namespace mfclear {

CondExpKind parse_cond_exp(const std::string& name) {
  if (name == "auto") return CondExpKind::kAuto;
  if (name == "lq_exact") return CondExpKind::kLqExact;
  if (name == "regression") return CondExpKind::kRegression;
  throw ConfigError("solver.cond_exp", -1, "expected auto, lq_exact or regression, got " + name);
}

std::string to_string(CondExpKind kind) {
  switch (kind) {
    case CondExpKind::kAuto: return "auto";
    case CondExpKind::kLqExact: return "lq_exact";
    case CondExpKind::kRegression: return "regression";
  }
  return "auto";
}

void check(const SolverConfig& c) {
  const auto need = [](bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, -1, what);
  };
  need(c.rho_step > 0.0 && c.rho_step <= 1.0, "solver.rho_step", "must lie in (0, 1]");
  need(c.damping > 0.0 && c.damping <= 1.0, "solver.damping", "must lie in (0, 1]");
  need(c.max_outer > 0, "solver.max_outer", "must be positive");
  need(c.max_inner > 0, "solver.max_inner", "must be positive");
  need(c.fixpoint_tol > 0.0, "solver.fixpoint_tol", "must be positive");
  need(c.stage_tol > 0.0, "solver.stage_tol", "must be positive");
  need(c.minimizer_tol > 0.0, "solver.minimizer_tol", "must be positive");
  need(c.regression_degree == 1 || c.regression_degree == 2, "solver.regression_degree",
       "must be 1 or 2");
  need(c.max_halvings >= 0, "solver.max_halvings", "must be non-negative");
  need(c.blowup > 0.0, "solver.blowup", "must be positive");
  need(c.divergence_factor > 1.0, "solver.divergence_factor", "must exceed 1");
  need(c.threads > 0, "solver.threads", "must be positive");
}

void SolveStats::merge(const SolveStats& o) {
  if (outer_steps == 0 && inner_iterations == 0) residuals = o.residuals;
  outer_steps += o.outer_steps;
  inner_iterations += o.inner_iterations;
  halvings += o.halvings;
  rho_reached = std::max(rho_reached, o.rho_reached);
  fixpoint_residual = std::max(fixpoint_residual, o.fixpoint_residual);
  terminal_residual = std::max(terminal_residual, o.terminal_residual);
}

CondExpKind resolve_cond_exp(const SolverConfig& cfg, const CostSpec& costs) {
  if (cfg.cond_exp != CondExpKind::kAuto) return cfg.cond_exp;
  return costs.pop1.box ? CondExpKind::kRegression : CondExpKind::kLqExact;
}

namespace {

void check_layout(const MarketParams& p, const ScenarioLayout& l) {
  if (l.n != p.n || l.N1 != p.N1 || l.N2 != p.N2)
    throw DimensionMismatch("scenario populations do not match the market");
  if (l.M != p.M || std::abs(l.T - p.T) > 1e-14 * std::max(1.0, p.T))
    throw MisalignedGrids("scenario grid does not match the market grid");
}

void check_inputs(const MarketParams& p, const ScenarioSet& scen,
                  const std::vector<ControlInput>& beta) {
  if (static_cast<int>(beta.size()) != scen.size())
    throw DimensionMismatch("one control input per scenario path required");
  for (const ControlInput& c : beta) {
    if (static_cast<int>(c.beta.size()) != p.M)
      throw MisalignedGrids("control input must have M nodes");
    for (const MatX& b : c.beta)
      if (b.rows() != p.n || b.cols() != scen.layout.N1 || !b.allFinite())
        throw DimensionMismatch("control input blocks must be finite n x N1");
    if (c.forecasts) {
      if (static_cast<int>(c.forecasts->at.size()) != p.M)
        throw MisalignedGrids("forecasts must have M nodes");
      for (int k = 0; k < p.M; ++k)
        if (static_cast<int>(c.forecasts->at[k].size()) != p.M - k)
          throw MisalignedGrids("forecast at node k must cover nodes k..M-1");
    }
  }
}

}  // namespace

EquilibriumSolution solve_equilibrium_finite(const MarketParams& params, const CostSpec& costs,
                                             const ScenarioSet& scenarios,
                                             const SolverConfig& cfg) {
  check(cfg);
  require_valid(params, costs);
  check_layout(params, scenarios.layout);
  const Market market(params, costs, params.delta, cfg.minimizer_tol);
  const detail::Engine eng(market, scenarios.layout, cfg, detail::Mode::kFull);
  return detail::solve_groups(eng, scenarios, cfg, params.delta, [](int, detail::PathWork&) {});
}

EquilibriumSolution solve_noncoop_given_beta(const MarketParams& params, const CostSpec& costs,
                                             const ScenarioSet& scenarios,
                                             const std::vector<ControlInput>& beta,
                                             const SolverConfig& cfg) {
  check(cfg);
  require_valid(params, costs);
  check_layout(params, scenarios.layout);
  check_inputs(params, scenarios, beta);
  const Market market(params, costs, params.delta, cfg.minimizer_tol);
  const detail::Engine eng(market, scenarios.layout, cfg, detail::Mode::kGivenInput);
  const int M = params.M;
  return detail::solve_groups(eng, scenarios, cfg, params.delta, [&](int i, detail::PathWork& w) {
    const ControlInput& in = beta[i];
    w.u.resize(M);
    for (int k = 0; k < M; ++k) w.u[k] = params.delta * (params.Lambda * col_mean(in.beta[k]));
    if (in.forecasts) {
      w.fc = *in.forecasts;
    } else {
      w.fc.at.resize(M);
      for (int k = 0; k < M; ++k) w.fc.at[k].assign(w.u.begin() + k, w.u.end());
    }
  });
}

EquilibriumSolution solve_decentralized(const MarketParams& params, const CostSpec& costs,
                                        const ScenarioSet& scenarios,
                                        const std::vector<ControlInput>& beta_mf,
                                        const SolverConfig& cfg) {
  EquilibriumSolution sol = solve_noncoop_given_beta(params, costs, scenarios, beta_mf, cfg);
  const int M = params.M, N1 = params.N1;
  const double dt = params.T / M;
  const Pop1Cost& c1 = costs.pop1;
  for (int i = 0; i < scenarios.size(); ++i) {
    const PathScenario& s = scenarios.paths[i];
    PathSolution& ps = sol.paths[i];
    ps.beta = beta_mf[i].beta;
    ps.X.resize(M + 1);
    ps.X[0] = s.xi;
    for (int k = 0; k < M; ++k) {
      const MatX cc1 = s.c1.middleCols(static_cast<Eigen::Index>(k) * N1, N1);
      MatX drift = c1.order_flow.apply(s.c0.col(k), cc1) + ps.beta[k];
      drift.colwise() += params.rho1 * ps.price[k];
      MatX noise = c1.sigma * s.dW1.middleCols(static_cast<Eigen::Index>(k) * N1, N1);
      noise.colwise() += c1.sigma0 * s.dW0.col(k);
      ps.X[k + 1] = ps.X[k] + dt * drift + noise;
    }
  }
  return sol;
}

std::vector<Forecasts> equilibrium_forecasts(const MarketParams& params, const CostSpec& costs,
                                             const ScenarioSet& scenarios,
                                             const EquilibriumSolution& sol) {
  const Market market(params, costs, sol.delta);
  const FullLinearization lin = linearize_full(market);
  const TimeGrid grid{params.T, params.M};
  const AffineGains g = affine_backward(lin.mean, grid, 1.0, 0.0);
  const int M = params.M;
  const int N1 = scenarios.layout.N1, N2 = scenarios.layout.N2;
  std::vector<Forecasts> out(sol.paths.size());
  for (size_t pi = 0; pi < sol.paths.size(); ++pi) {
    const PathSolution& ps = sol.paths[pi];
    const PathScenario& s = scenarios.paths[pi];
    Forecasts& f = out[pi];
    f.at.resize(M);
    for (int k = 0; k < M; ++k) {
      const MatX c1 = s.c1.middleCols(static_cast<Eigen::Index>(k) * N1, N1);
      const MatX c2 = s.c2.middleCols(static_cast<Eigen::Index>(k) * N2, N2);
      VecX st(3 * params.n), c(lin.mean.nc());
      st << col_mean(ps.X[k]), col_mean(ps.x[k]), col_mean(ps.r[k]);
      c.head(s.c0.rows()) = s.c0.col(k);
      c.segment(s.c0.rows(), c1.rows()) = c1.rowwise().mean();
      c.tail(c2.rows()) = c2.rowwise().mean();
      const std::vector<VecX> mb = predict_controls(lin.mean, g, grid, k, st, c);
      f.at[k].resize(M - k);
      f.at[k][0] = sol.delta * (params.Lambda * col_mean(ps.beta[k]));
      for (int j = 1; j < M - k; ++j) f.at[k][j] = sol.delta * (params.Lambda * mb[j]);
    }
  }
  return out;
}

}  // namespace mfclear
