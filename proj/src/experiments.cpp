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

#include "mfclear/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mfclear/errors.hpp"
#include "mfclear/rng.hpp"
#include "mfclear/solver_meanfield.hpp"

namespace mfclear {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

ScenarioSet scenarios_for(const Config& cfg, const MarketParams& p, int paths) {
  return generate(p, cfg.costs, cfg.laws, paths, cfg.sim.seed, cfg.sim.max_cells);
}

// Counts strict increases in a sequence meant to decrease.
int inversions(const std::vector<double>& v) {
  int n = 0;
  for (size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) ++n;
  return n;
}

}  // namespace

ClearingResult run_clearing(const Config& cfg) {
  const ScenarioSet scen = scenarios_for(cfg, cfg.market, cfg.sim.paths);
  const EquilibriumSolution sol = solve_equilibrium_finite(cfg.market, cfg.costs, scen, cfg.solver);
  ClearingResult r;
  r.per_node = clearing_residuals(sol);
  for (double v : r.per_node) r.max_residual = std::max(r.max_residual, v);
  r.stats = sol.stats;
  return r;
}

OptimalityResult run_optimality(const Config& cfg) {
  const MarketParams& mp = cfg.market;
  const ExperimentConfig& ex = cfg.experiments;
  const ScenarioSet scen = scenarios_for(cfg, mp, cfg.sim.paths);
  const EquilibriumSolution sol = solve_equilibrium_finite(mp, cfg.costs, scen, cfg.solver);
  const std::vector<Forecasts> fc = equilibrium_forecasts(mp, cfg.costs, scen, sol);
  const int P = scen.size(), M = mp.M, n = mp.n;
  const double dt = mp.T / M, eps = ex.epsilon;

  std::vector<ControlInput> base(P);
  for (int i = 0; i < P; ++i) {
    base[i].beta = sol.paths[i].beta;
    base[i].forecasts = fc[i];
  }
  const VecX J0 =
      eval_costs(solve_decentralized(mp, cfg.costs, scen, base, cfg.solver), scen, mp, cfg.costs)
          .J1_sum_paths();

  OptimalityResult out;
  out.base_cost = mean_se(J0);
  for (int q = 0; q < ex.perturbations; ++q) {
    const NormalStream rng(ex.perturbation_seed, static_cast<uint32_t>(q),
                           static_cast<uint32_t>(Stream::kPerturbation), 0);
    uint64_t draw = 0;
    std::vector<VecX> a(M);
    std::vector<MatX> B(M);
    for (int k = 0; k < M; ++k) {
      a[k].resize(n);
      B[k].resize(n, n);
      for (int i = 0; i < n; ++i) a[k](i) = rng(draw++);
      for (Eigen::Index i = 0; i < B[k].size(); ++i) B[k].data()[i] = rng(draw++);
    }
    std::vector<ControlInput> in = base;
    VecX norm(P);
    for (int pi = 0; pi < P; ++pi) {
      const MatX& xi = scen.paths[pi].xi;
      std::vector<VecX> mean_shift(M);
      norm(pi) = 0.0;
      for (int k = 0; k < M; ++k) {
        MatX d = B[k] * xi;
        d.colwise() += a[k];
        in[pi].beta[k] += eps * d;
        mean_shift[k] = eps * mp.delta * (mp.Lambda * col_mean(d));
        norm(pi) += dt * d.squaredNorm();
      }
      Forecasts& f = *in[pi].forecasts;
      for (int k = 0; k < M; ++k)
        for (int j = 0; j < M - k; ++j) f.at[k][j] += mean_shift[k + j];
    }
    const VecX J =
        eval_costs(solve_decentralized(mp, cfg.costs, scen, in, cfg.solver), scen, mp, cfg.costs)
            .J1_sum_paths();
    PerturbationRow row;
    row.index = q;
    row.epsilon = eps;
    row.delta_J = mean_se(J - J0);
    row.norm_sq = norm.mean();
    row.bound = 0.5 * cfg.costs.pop1.lambda_beta * eps * eps * row.norm_sq;
    row.pass = row.delta_J.mean >= row.bound - 3.0 * row.delta_J.se;
    if (!row.pass) ++out.violations;
    out.rows.push_back(row);
  }
  return out;
}

ConvergenceResult run_convergence(const Config& cfg) {
  const MarketParams& mp = cfg.market;
  const ExperimentConfig& ex = cfg.experiments;
  const int P = ex.convergence_paths, M = mp.M;
  const double dt = mp.T / M;
  const int K1 = cfg.meanfield.K1, K2 = cfg.meanfield.K2;
  const int top = *std::max_element(ex.ladder.begin(), ex.ladder.end());
  if (top > K1) throw DimensionMismatch("ladder exceeds the cooperative cloud size");
  const size_t L = ex.ladder.size();

  // Cloud quantities kept per path: costs of the first `top` particles, their
  // controls, the price, the inventory cloud, and subset inputs per level.
  MatX cloud_J(P, top);
  std::vector<std::vector<MatX>> cloud_beta(P), cloud_X(P);
  std::vector<std::vector<VecX>> cloud_price(P);
  std::vector<std::vector<ControlInput>> subset(L, std::vector<ControlInput>(P));
  const int batch = std::max(1, cfg.meanfield.path_batch);
  for (int first = 0; first < P; first += batch) {
    const int count = std::min(batch, P - first);
    const ScenarioSet cloud = cloud_scenarios(mp, cfg.costs, cfg.laws, K1, K2, cfg.sim.seed,
                                              static_cast<uint64_t>(first), count,
                                              cfg.sim.max_cells);
    const MeanFieldSolution mf = solve_meanfield(mp, cfg.costs, cloud, cfg.solver);
    const CostReport cr = eval_costs(mf.cloud, cloud, mp, cfg.costs);
    for (int q = 0; q < count; ++q) {
      const PathSolution& ps = mf.cloud.paths[q];
      cloud_J.row(first + q) = cr.J1_paths.row(q).head(top);
      for (int k = 0; k < M; ++k) cloud_beta[first + q].push_back(ps.beta[k].leftCols(top));
      cloud_X[first + q] = ps.X;
      cloud_price[first + q] = ps.price;
    }
    for (size_t l = 0; l < L; ++l) {
      std::vector<ControlInput> s = subset_controls(mp, cfg.costs, cloud, mf, ex.ladder[l]);
      for (int q = 0; q < count; ++q) subset[l][first + q] = std::move(s[q]);
    }
  }

  ConvergenceResult out;
  std::vector<double> ns, gaps, ceq, cdec;
  for (size_t l = 0; l < L; ++l) {
    const int N1 = ex.ladder[l];
    const int N2 = static_cast<int>(std::lround(N1 / mp.delta));
    const MarketParams p = with_populations(mp, N1, N2);
    const ScenarioSet scen = scenarios_for(cfg, p, P);
    const EquilibriumSolution sol = solve_equilibrium_finite(p, cfg.costs, scen, cfg.solver);
    const MatX J = eval_costs(sol, scen, p, cfg.costs).J1_paths;
    const MatX Jd = eval_costs(solve_decentralized(p, cfg.costs, scen, subset[l], cfg.solver), scen,
                               p, cfg.costs)
                        .J1_paths;
    LadderRow row;
    row.N1 = N1;
    row.N2 = N2;
    double g2 = 0.0;
    std::vector<std::vector<MatX>> fin_X(P);
    for (int pi = 0; pi < P; ++pi) {
      const PathSolution& ps = sol.paths[pi];
      for (int k = 0; k < M; ++k) {
        g2 += dt * (ps.beta[k] - cloud_beta[pi][k].leftCols(N1)).squaredNorm() / N1;
        g2 += dt * (ps.price[k] - cloud_price[pi][k]).squaredNorm();
      }
      fin_X[pi] = ps.X;
    }
    row.control_gap = std::sqrt(g2 / P);
    const VecX de = (J - cloud_J.leftCols(N1)).rowwise().mean();
    const VecX dd = (Jd - cloud_J.leftCols(N1)).rowwise().mean();
    const Estimate e = mean_se(de), d = mean_se(dd);
    row.cost_gap_equilibrium = {std::abs(e.mean), e.se};
    row.cost_gap_decentralized = {std::abs(d.mean), d.se};
    if (mp.n == 1) row.eps_N1 = estimate_eps_N1(fin_X, cloud_X, N1);
    out.rows.push_back(row);
    ns.push_back(N1);
    gaps.push_back(row.control_gap);
    ceq.push_back(row.cost_gap_equilibrium.mean);
    cdec.push_back(row.cost_gap_decentralized.mean);
  }
  out.fit = fit_convergence_rate(ns, gaps);
  out.cost_gap_equilibrium_inversions = inversions(ceq);
  out.cost_gap_decentralized_inversions = inversions(cdec);
  return out;
}

double constant_spread(const std::vector<MonotonicityFit>& fits) {
  if (fits.empty()) return 1.0;
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (const MonotonicityFit& f : fits) {
    lo = std::min(lo, f.min_C);
    hi = std::max(hi, f.min_C);
  }
  if (hi == 0.0) return 1.0;
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

DeltaSweepResult run_delta_sweep(const Config& cfg) {
  const MarketParams& mp = cfg.market;
  const ExperimentConfig& ex = cfg.experiments;
  std::vector<double> deltas = ex.deltas;
  std::sort(deltas.begin(), deltas.end());
  DeltaSweepResult out;
  for (double d : deltas) {
    SweepRow row;
    row.delta = d;
    row.N1 = ex.sweep_N1;
    row.N2 = std::max(1, static_cast<int>(std::lround(ex.sweep_N1 / d)));
    const MarketParams p = with_populations(mp, row.N1, row.N2);
    try {
      const ScenarioSet scen = scenarios_for(cfg, p, ex.sweep_paths);
      const EquilibriumSolution sol = solve_equilibrium_finite(p, cfg.costs, scen, cfg.solver);
      row.converged = true;
      row.stats = sol.stats;
      for (double v : clearing_residuals(sol)) row.clearing = std::max(row.clearing, v);
    } catch (const ContractionFailure& e) {
      row.failure = "contraction";
      row.stats.rho_reached = e.rho_reached();
      row.stats.residuals = e.residuals();
    } catch (const RecursionBlowup&) {
      row.failure = "blowup";
    } catch (const NoConvergence& e) {
      row.failure = "no_convergence";
      row.stats.fixpoint_residual = e.residual();
    }
    if (!row.converged && !out.first_failure) out.first_failure = d;
    out.rows.push_back(row);
  }
  for (double d : deltas) {
    const int N2 = ex.monotonicity_N2;
    const int N1 = static_cast<int>(std::lround(d * N2));
    if (N1 < 1) continue;
    const MarketParams p = with_populations(mp, N1, N2);
    out.fits.push_back(fit_monotonicity_constant(p, cfg.costs, ex.monotonicity_pairs, cfg.sim.seed));
  }
  out.constant_spread = constant_spread(out.fits);
  return out;
}

void write_clearing_csv(const ClearingResult& r, const TimeGrid& grid, std::ostream& os) {
  os << "# mfclear-clearing schema=1\nt,max_abs_residual\n";
  for (size_t k = 0; k < r.per_node.size(); ++k)
    os << num(grid.t(static_cast<int>(k))) << ',' << num(r.per_node[k]) << '\n';
}

void write_optimality_csv(const OptimalityResult& r, std::ostream& os) {
  os << "# mfclear-optimality schema=1\nindex,epsilon,delta_J,se,norm_sq,bound,pass\n";
  for (const PerturbationRow& row : r.rows)
    os << row.index << ',' << num(row.epsilon) << ',' << num(row.delta_J.mean) << ','
       << num(row.delta_J.se) << ',' << num(row.norm_sq) << ',' << num(row.bound) << ','
       << (row.pass ? 1 : 0) << '\n';
}

void write_convergence_csv(const ConvergenceResult& r, std::ostream& os) {
  os << "# mfclear-convergence schema=1\n"
        "N1,N2,control_gap,cost_gap_equilibrium,cost_gap_equilibrium_se,"
        "cost_gap_decentralized,cost_gap_decentralized_se,eps_N1\n";
  for (const LadderRow& row : r.rows)
    os << row.N1 << ',' << row.N2 << ',' << num(row.control_gap) << ','
       << num(row.cost_gap_equilibrium.mean) << ',' << num(row.cost_gap_equilibrium.se) << ','
       << num(row.cost_gap_decentralized.mean) << ',' << num(row.cost_gap_decentralized.se) << ','
       << num(row.eps_N1) << '\n';
}

void write_convergence_fit_csv(const ConvergenceResult& r, std::ostream& os) {
  os << "# mfclear-convergence-fit schema=1\nslope,intercept,r2\n"
     << num(r.fit.slope) << ',' << num(r.fit.intercept) << ',' << num(r.fit.r2) << '\n';
}

void write_delta_sweep_csv(const DeltaSweepResult& r, std::ostream& os) {
  os << "# mfclear-delta-sweep schema=1\n"
        "delta,N1,N2,status,rho_reached,outer_steps,inner_iterations,halvings,"
        "fixpoint_residual,clearing_residual\n";
  for (const SweepRow& row : r.rows)
    os << num(row.delta) << ',' << row.N1 << ',' << row.N2 << ','
       << (row.converged ? "converged" : row.failure) << ',' << num(row.stats.rho_reached) << ','
       << row.stats.outer_steps << ',' << row.stats.inner_iterations << ','
       << row.stats.halvings << ',' << num(row.stats.fixpoint_residual) << ','
       << num(row.clearing) << '\n';
}

void write_monotonicity_csv(const DeltaSweepResult& r, std::ostream& os) {
  os << "# mfclear-monotonicity schema=1\n"
        "delta,pairs,min_C,worst_excess,worst_terminal_gap\n";
  for (const MonotonicityFit& f : r.fits)
    os << num(f.delta) << ',' << f.pairs << ',' << num(f.min_C) << ',' << num(f.worst_excess)
       << ',' << num(f.worst_terminal_gap) << '\n';
}

}  // namespace mfclear
