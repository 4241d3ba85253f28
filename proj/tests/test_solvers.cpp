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

#include "doctest.h"

#include <cmath>

#include "common.hpp"
#include "mfclear/errors.hpp"
#include "mfclear/metrics.hpp"
#include "mfclear/solver.hpp"
#include "mfclear/solver_meanfield.hpp"

using namespace mfclear;
using mfclear::testing::config_path;
using mfclear::testing::small_reference;

namespace {

double max_of(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

double max_gap(const std::vector<MatX>& a, const std::vector<MatX>& b) {
  double m = 0.0;
  for (size_t k = 0; k < a.size(); ++k) m = std::max(m, (a[k] - b[k]).cwiseAbs().maxCoeff());
  return m;
}

}  // namespace

TEST_CASE("finite equilibrium clears and is stationary") {
  const Config c = small_reference(4, 64, 8);
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 8, 3);
  const EquilibriumSolution e = solve_equilibrium_finite(c.market, c.costs, s, c.solver);
  REQUIRE(e.paths.size() == 8);
  CHECK(e.stats.rho_reached == 1.0);
  CHECK(e.stats.fixpoint_residual < c.solver.fixpoint_tol);
  CHECK(e.stats.terminal_residual < 1e-9);
  CHECK(max_of(clearing_residuals(e)) < 1e-12);
  CHECK(stationarity_residual(e, s, c.market, c.costs) < 1e-6);
  const PathSolution& p = e.paths[2];
  CHECK(p.id == 2);
  CHECK(p.X.size() == 9);
  CHECK(p.beta.size() == 8);
  CHECK(p.beta[0].cols() == 4);
  CHECK(p.alpha[0].cols() == 64);
  // inventories start from the drawn initial positions
  CHECK(p.X[0] == s.paths[2].xi);
  CHECK(p.x[0] == s.paths[2].eta);
}

TEST_CASE("results do not depend on the thread count") {
  Config c = small_reference(4, 64, 8);
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 6, 3);
  c.solver.threads = 1;
  const EquilibriumSolution a = solve_equilibrium_finite(c.market, c.costs, s, c.solver);
  c.solver.threads = 4;
  const EquilibriumSolution b = solve_equilibrium_finite(c.market, c.costs, s, c.solver);
  for (size_t i = 0; i < a.paths.size(); ++i) {
    CHECK(max_gap(a.paths[i].beta, b.paths[i].beta) == 0.0);
    CHECK(max_gap(a.paths[i].y, b.paths[i].y) == 0.0);
  }
}

TEST_CASE("non-cooperative response to equilibrium controls reproduces the equilibrium") {
  const Config c = small_reference(4, 64, 8);
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 4, 3);
  const EquilibriumSolution e = solve_equilibrium_finite(c.market, c.costs, s, c.solver);
  const std::vector<Forecasts> fc = equilibrium_forecasts(c.market, c.costs, s, e);
  std::vector<ControlInput> in(4);
  for (int i = 0; i < 4; ++i) {
    in[i].beta = e.paths[i].beta;
    in[i].forecasts = fc[i];
  }
  const EquilibriumSolution r = solve_noncoop_given_beta(c.market, c.costs, s, in, c.solver);
  for (int i = 0; i < 4; ++i) {
    CHECK(max_gap(r.paths[i].y, e.paths[i].y) < 1e-8);
    CHECK(max_gap(r.paths[i].alpha, e.paths[i].alpha) < 1e-8);
  }
  // decentralized run with the same inputs drives the same inventories
  const EquilibriumSolution d = solve_decentralized(c.market, c.costs, s, in, c.solver);
  CHECK(max_gap(d.paths[1].X, e.paths[1].X) < 1e-8);
  CHECK(max_of(clearing_residuals(d)) < 1e-12);
}

TEST_CASE("regression operator approaches the exact one") {
  std::string text = mfclear::testing::read_text(config_path("box.yaml"));
  mfclear::testing::replace_once(text, "  box: {lo: -0.15, hi: 0.15}\n", "");
  Config c = parse_config(text);
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 512, 4);
  c.solver.cond_exp = CondExpKind::kLqExact;
  const EquilibriumSolution exact = solve_equilibrium_finite(c.market, c.costs, s, c.solver);
  c.solver.cond_exp = CondExpKind::kRegression;
  const EquilibriumSolution reg = solve_equilibrium_finite(c.market, c.costs, s, c.solver);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < s.size(); ++i)
    for (int k = 0; k < c.market.M; ++k) {
      num += (reg.paths[i].beta[k] - exact.paths[i].beta[k]).squaredNorm();
      den += exact.paths[i].beta[k].squaredNorm();
    }
  CHECK(std::sqrt(num / den) < 0.05);
  CHECK(max_of(clearing_residuals(reg)) < 1e-12);
}

TEST_CASE("box-constrained market") {
  Config c = load_config(config_path("box.yaml"));
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 64, 4);
  const EquilibriumSolution e = solve_equilibrium_finite(c.market, c.costs, s, c.solver);
  int active = 0;
  for (const PathSolution& p : e.paths)
    for (const MatX& b : p.beta) {
      CHECK(b.cwiseAbs().maxCoeff() <= 0.15 + 1e-12);
      if (b.cwiseAbs().maxCoeff() > 0.15 - 1e-12) ++active;
    }
  CHECK(active > 0);
  CHECK(stationarity_residual(e, s, c.market, c.costs) < 1e-6);
  CHECK(max_of(clearing_residuals(e)) < 1e-12);
}

TEST_CASE("stalled continuation reports the coupling reached") {
  Config c = small_reference(2, 32, 8);
  c.solver.max_inner = 1;
  c.solver.max_halvings = 1;
  c.solver.warm_start = false;
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 1, 3);
  try {
    solve_equilibrium_finite(c.market, c.costs, s, c.solver);
    FAIL("expected ContractionFailure");
  } catch (const ContractionFailure& f) {
    CHECK(f.rho_reached() < 1.0);
    CHECK_FALSE(f.residuals().empty());
  }
}

TEST_CASE("particle cloud") {
  Config c = small_reference(4, 64, 8);
  const ScenarioSet cloud = cloud_scenarios(c.market, c.costs, c.laws, 200, 300, 3, 0, 3);
  const MeanFieldSolution mf = solve_meanfield(c.market, c.costs, cloud, c.solver);
  CHECK(mf.K1() == 200);
  CHECK(mf.K2() == 300);
  CHECK(mf.cloud.delta == doctest::Approx(1.0 / 16));
  CHECK(max_of(clearing_residuals(mf.cloud)) < 1e-12);
  REQUIRE(mf.means.size() == 3);
  const ConditionalMeans& m = mf.means[1];
  CHECK((m.beta[2] - col_mean(mf.cloud.paths[1].beta[2])).norm() < 1e-14);
  CHECK(mf.price(1, 2) == mf.cloud.paths[1].price[2]);
  const std::vector<VecX> rep = extract_representative_control(mf, 1, 7);
  REQUIRE(rep.size() == 8);
  CHECK(rep[3] == mf.cloud.paths[1].beta[3].col(7));
  CHECK(stationarity_residual(mf.cloud, cloud, c.market, c.costs) < 1e-6);

  // the first four particles driven into a finite market
  const ScenarioSet market = generate(c.market, c.costs, c.laws, 3, 3);
  const std::vector<ControlInput> in = subset_controls(c.market, c.costs, cloud, mf, 4);
  REQUIRE(in.size() == 3);
  CHECK(in[0].beta[0].cols() == 4);
  CHECK(in[0].beta[5] == mf.cloud.paths[0].beta[5].leftCols(4));
  const EquilibriumSolution d = solve_decentralized(c.market, c.costs, market, in, c.solver);
  CHECK(max_of(clearing_residuals(d)) < 1e-12);
}

TEST_CASE("empty cloud is rejected") {
  const Config c = small_reference(4, 64, 8);
  ScenarioSet cloud = cloud_scenarios(c.market, c.costs, c.laws, 10, 10, 3, 0, 1);
  cloud.layout.N1 = 0;
  CHECK_THROWS_AS(solve_meanfield(c.market, c.costs, cloud, c.solver), EmptyCloud);
}
