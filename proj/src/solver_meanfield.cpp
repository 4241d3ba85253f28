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

#include "mfclear/solver_meanfield.hpp"

#include "mfclear/errors.hpp"
#include "mfclear/lq_oracle.hpp"
#include "picard.hpp"

namespace mfclear {

ScenarioSet cloud_scenarios(const MarketParams& params, const CostSpec& costs,
                            const InitialLaws& laws, int K1, int K2, uint64_t seed,
                            uint64_t first_path, int paths, double max_cells) {
  ScenarioRequest req;
  req.N1 = K1;
  req.N2 = K2;
  req.seed = seed;
  req.first_path = first_path;
  req.paths = paths;
  req.max_cells = max_cells;
  req.separate_pop2 = true;
  return generate(params, costs, laws, req);
}

ConditionalMeans conditional_means(const PathSolution& ps) {
  ConditionalMeans m;
  const auto means = [](const std::vector<MatX>& v, std::vector<VecX>& out) {
    out.clear();
    for (const MatX& b : v) out.push_back(col_mean(b));
  };
  means(ps.X, m.X);
  means(ps.x, m.x);
  means(ps.r, m.r);
  means(ps.P, m.P);
  means(ps.y, m.y);
  means(ps.p, m.p);
  means(ps.beta, m.beta);
  return m;
}

MeanFieldSolution solve_meanfield(const MarketParams& params, const CostSpec& costs,
                                  const ScenarioSet& cloud, const SolverConfig& cfg) {
  check(cfg);
  require_valid(params, costs);
  const ScenarioLayout& l = cloud.layout;
  if (l.N1 < 2 || l.N2 < 2) throw EmptyCloud("mean-field clouds need at least two particles");
  if (l.n != params.n) throw DimensionMismatch("cloud dimension does not match the market");
  if (l.M != params.M || std::abs(l.T - params.T) > 1e-14 * std::max(1.0, params.T))
    throw MisalignedGrids("cloud grid does not match the market grid");
  // Population sizes come from the cloud; delta stays a coefficient.
  const Market market(params, costs, params.delta, cfg.minimizer_tol);
  const detail::Engine eng(market, l, cfg, detail::Mode::kFull);

  MeanFieldSolution out;
  out.cloud = detail::solve_groups(eng, cloud, cfg, params.delta, [](int, detail::PathWork&) {});
  for (const PathSolution& ps : out.cloud.paths) out.means.push_back(conditional_means(ps));
  return out;
}

std::vector<VecX> extract_representative_control(const MeanFieldSolution& sol, int path,
                                                 int particle) {
  const PathSolution& ps = sol.cloud.paths.at(static_cast<size_t>(path));
  if (particle < 0 || particle >= sol.K1())
    throw DimensionMismatch("particle index outside the cooperative cloud");
  std::vector<VecX> out;
  for (const MatX& b : ps.beta) out.push_back(b.col(particle));
  return out;
}

std::vector<ControlInput> subset_controls(const MarketParams& params, const CostSpec& costs,
                                          const ScenarioSet& cloud, const MeanFieldSolution& sol,
                                          int N1) {
  if (N1 < 1 || N1 > sol.K1()) throw DimensionMismatch("subset larger than the cloud");
  const Market market(params, costs, params.delta);
  const FullLinearization lin = linearize_full(market);
  const TimeGrid grid{params.T, params.M};
  const AffineGains gm = affine_backward(lin.mean, grid, 1.0, 0.0);
  const AffineGains gd = affine_backward(lin.dev1, grid, 1.0, 0.0);
  const int M = params.M, K1 = sol.K1(), K2 = sol.K2();
  std::vector<ControlInput> out(sol.cloud.paths.size());
  for (size_t pi = 0; pi < out.size(); ++pi) {
    const PathSolution& ps = sol.cloud.paths[pi];
    const PathScenario& s = cloud.paths[pi];
    ControlInput& in = out[pi];
    in.beta.resize(M);
    for (int k = 0; k < M; ++k) in.beta[k] = ps.beta[k].leftCols(N1);
    Forecasts f;
    f.at.resize(M);
    for (int k = 0; k < M; ++k) {
      const MatX c1 = s.c1.middleCols(static_cast<Eigen::Index>(k) * K1, K1);
      const MatX c2 = s.c2.middleCols(static_cast<Eigen::Index>(k) * K2, K2);
      VecX sm(3 * params.n), cm(lin.mean.nc());
      sm << col_mean(ps.X[k]), col_mean(ps.x[k]), col_mean(ps.r[k]);
      cm.head(s.c0.rows()) = s.c0.col(k);
      cm.segment(s.c0.rows(), c1.rows()) = c1.rowwise().mean();
      cm.tail(c2.rows()) = c2.rowwise().mean();
      const VecX sd = VecX(ps.X[k].leftCols(N1).rowwise().mean()) - col_mean(ps.X[k]);
      const VecX cd = VecX(c1.leftCols(N1).rowwise().mean()) - c1.rowwise().mean();
      const std::vector<VecX> mb = predict_controls(lin.mean, gm, grid, k, sm, cm);
      const std::vector<VecX> db = predict_controls(lin.dev1, gd, grid, k, sd, cd);
      f.at[k].resize(M - k);
      f.at[k][0] = params.delta * (params.Lambda * in.beta[k].rowwise().mean());
      for (int j = 1; j < M - k; ++j) f.at[k][j] = params.delta * (params.Lambda * (mb[j] + db[j]));
    }
    in.forecasts = std::move(f);
  }
  return out;
}

}  // namespace mfclear
