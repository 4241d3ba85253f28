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
#include "mfclear/lq_oracle.hpp"
#include "mfclear/metrics.hpp"
#include "mfclear/solver.hpp"

using namespace mfclear;

namespace {

// s' = s + dt (a s + bm b), b_k = E_k[b' + dt g b'], b_M = kt s; no information.
LinearFBSystem scalar_system(double a, double bm, double g, double kt) {
  LinearFBSystem s;
  const auto one = [](double v) { return MatX::Constant(1, 1, v); };
  s.A = one(a);
  s.Bm = one(bm);
  s.E = MatX(1, 0);
  s.Bu = MatX(1, 0);
  s.e = VecX::Zero(1);
  s.F = one(0.0);
  s.G = one(g);
  s.H = MatX(1, 0);
  s.Hu = MatX(1, 0);
  s.f = VecX::Zero(1);
  s.Kt = one(kt);
  s.Lt = MatX(1, 0);
  s.mt = VecX::Zero(1);
  s.J = one(1.0);
  s.R = MatX(0, 0);
  s.theta = VecX(0);
  return s;
}

}  // namespace

TEST_CASE("scalar decoupling field follows the closed-form recursion") {
  const TimeGrid grid{1.0, 10};
  const double a = -0.4, bm = -0.7, g = 0.3, kt = 1.5, dt = grid.dt();
  const AffineGains gains = affine_backward(scalar_system(a, bm, g, kt), grid, 1.0, 0.0);
  double K = kt;
  for (int k = grid.M - 1; k >= 0; --k) {
    const double W = k + 1 == grid.M ? K : (1 + dt * g) * K;
    K = W * (1 + dt * a) / (1 - dt * W * bm);
    CHECK(gains.K[k](0, 0) == doctest::Approx(K).epsilon(1e-13));
  }
}

TEST_CASE("decoupled end of the homotopy") {
  // at coupling 0 the terminal value is J s and the driver gamma J s'
  const TimeGrid grid{1.0, 4};
  const double gamma = 0.25, dt = grid.dt();
  const AffineGains gains = affine_backward(scalar_system(-0.4, -0.7, 0.3, 1.5), grid, 0.0, gamma);
  double K = 1.0;
  for (int k = grid.M - 1; k >= 0; --k) {
    K = k + 1 == grid.M ? K : K + dt * gamma;
    CHECK(gains.K[k](0, 0) == doctest::Approx(K));
  }
}

TEST_CASE("gain blowup is detected") {
  const TimeGrid grid{1.0, 10};
  CHECK_THROWS_AS(affine_backward(scalar_system(0.0, 9.99, 0.0, 1.0), grid, 1.0, 0.0, 50.0),
                  RecursionBlowup);
}

TEST_CASE("solver matches direct minimization on the noiseless market") {
  const Config c = load_config(mfclear::testing::config_path("deterministic.yaml"));
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 1, c.sim.seed);
  const OracleResult o = deterministic_oracle(c.market, c.costs, s.layout, s.paths[0]);
  const EquilibriumSolution e = solve_equilibrium_finite(c.market, c.costs, s, c.solver);
  const double dt = c.market.T / c.market.M;
  double gap = 0.0;
  for (int k = 0; k < c.market.M; ++k) gap += dt * (e.paths[0].beta[k] - o.beta[k]).squaredNorm();
  CHECK(std::sqrt(gap) < 1e-5);
  const OracleResponse r =
      oracle_response(c.market, c.costs, s.layout, s.paths[0], e.paths[0].beta);
  CHECK(std::abs(r.cost - o.cost) / std::abs(o.cost) < 1e-6);
  // the metrics module evaluates the same discrete functional
  const CostReport rep = eval_costs(e, s, c.market, c.costs);
  CHECK(rep.J1_sum.mean == doctest::Approx(r.cost).epsilon(1e-10));
  // prices agree too
  for (int k = 0; k < c.market.M; ++k)
    CHECK((e.paths[0].price[k] - o.price[k]).norm() < 1e-5);
}

TEST_CASE("oracle response reproduces the oracle cost") {
  const Config c = load_config(mfclear::testing::config_path("deterministic.yaml"));
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 1, c.sim.seed);
  const OracleResult o = deterministic_oracle(c.market, c.costs, s.layout, s.paths[0]);
  const OracleResponse r = oracle_response(c.market, c.costs, s.layout, s.paths[0], o.beta);
  CHECK(r.cost == doctest::Approx(o.cost).epsilon(1e-12));
  // any other control is worse
  std::vector<MatX> other = o.beta;
  for (MatX& b : other) b.array() += 0.01;
  CHECK(oracle_response(c.market, c.costs, s.layout, s.paths[0], other).cost > o.cost);
}

TEST_CASE("oracle respects a box") {
  Config c = load_config(mfclear::testing::config_path("deterministic.yaml"));
  Box b;
  b.lo = VecX::Constant(1, -0.1);
  b.hi = VecX::Constant(1, 0.1);
  c.costs.pop1.box = b;
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 1, c.sim.seed);
  const OracleResult o = deterministic_oracle(c.market, c.costs, s.layout, s.paths[0]);
  double lo = 0.0;
  for (const MatX& beta : o.beta) {
    CHECK(beta.cwiseAbs().maxCoeff() <= 0.1 + 1e-12);
    lo = std::min(lo, beta.minCoeff());
  }
  CHECK(lo == doctest::Approx(-0.1));
}
