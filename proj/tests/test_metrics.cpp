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
#include <limits>

#include "common.hpp"
#include "json.hpp"
#include "mfclear/errors.hpp"
#include "mfclear/experiments.hpp"
#include "mfclear/metrics.hpp"

using namespace mfclear;

TEST_CASE("mean and standard error") {
  VecX v(4);
  v << 1, 2, 3, 4;
  const Estimate e = mean_se(v);
  CHECK(e.mean == 2.5);
  CHECK(e.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(mean_se(VecX::Constant(1, 7.0)).se == 0.0);
}

TEST_CASE("cost report") {
  MatX J1(2, 3), J2(2, 1);
  J1 << 1, 2, 3, 3, 4, 5;
  J2 << 1, 1;
  const CostReport r = cost_report(J1, J2);
  CHECK(r.J1.size() == 3);
  CHECK(r.J1[1].mean == 3.0);
  CHECK(r.J1_sum.mean == 9.0);
  CHECK(r.J1_avg.mean == 3.0);
  CHECK(r.J1_sum.se == doctest::Approx(3.0));
  CHECK(r.J2_sum.se == 0.0);
  const CostReport none = cost_report(MatX(2, 0), J2);
  CHECK(none.J1.empty());
  CHECK(none.J1_sum.mean == 0.0);
}

TEST_CASE("one-dimensional Wasserstein distance") {
  CHECK(wasserstein2_1d(std::vector<double>{0, 1, 2}, std::vector<double>{2, 1, 0}) == 0.0);
  // a shift by c costs |c|
  CHECK(wasserstein2_1d(std::vector<double>{0, 1, 5}, std::vector<double>{2, 3, 7}) ==
        doctest::Approx(2.0));
  // sorted coupling: (0, 1) -> (1, 3) gives sqrt((1 + 4) / 2)
  CHECK(wasserstein2_1d(std::vector<double>{1, 0}, std::vector<double>{3, 1}) ==
        doctest::Approx(std::sqrt(2.5)));
  CHECK_THROWS_AS(wasserstein2_1d(std::vector<double>{1}, std::vector<double>{1, 2}),
                  DimensionMismatch);
  CHECK_THROWS_AS(wasserstein2_1d(MatX::Zero(2, 3), MatX::Zero(2, 3)), UnsupportedDimension);
  CHECK(wasserstein2_1d(MatX::Constant(1, 3, 1.0), MatX::Constant(1, 3, 4.0)) ==
        doctest::Approx(3.0));
  // quantile coupling of {0, 1} against {0, 0, 1, 1} is exact
  CHECK(wasserstein2_quantile({0, 1}, {0, 0, 1, 1}) == doctest::Approx(0.0));
  CHECK(wasserstein2_quantile({0}, {1, 3}) == doctest::Approx(std::sqrt(5.0)));
}

TEST_CASE("empirical-measure error estimate") {
  std::vector<std::vector<MatX>> finite(2), cloud(2);
  for (int p = 0; p < 2; ++p) {
    finite[p] = {MatX::Constant(1, 4, 0.0), MatX::Constant(1, 4, 1.0)};
    cloud[p] = {MatX::Constant(1, 8, 0.0), MatX::Constant(1, 8, 3.0)};
  }
  CHECK(estimate_eps_N1(finite, cloud, 4) == doctest::Approx(2.0));
  // floored at N1^(-1/2)
  cloud[0][1].setConstant(1.0);
  cloud[1][1].setConstant(1.0);
  CHECK(estimate_eps_N1(finite, cloud, 4) == doctest::Approx(0.5));
}

TEST_CASE("convergence-rate fit") {
  std::vector<double> N{4, 8, 16, 32, 64}, exact, flat(5, 0.3);
  for (double n : N) exact.push_back(1.0 / std::sqrt(n));
  const RateFit f = fit_convergence_rate(N, exact);
  CHECK(f.slope == doctest::Approx(-0.5));
  CHECK(f.intercept == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(f.r2 == doctest::Approx(1.0));
  const RateFit g = fit_convergence_rate(N, flat);
  CHECK(g.slope == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(fit_convergence_rate({4, 8, 16}, {1, 1, 1}), DegenerateFit);
  CHECK_THROWS_AS(fit_convergence_rate({4, 4, 4, 4}, {1, 2, 3, 4}), DegenerateFit);
  CHECK_THROWS_AS(fit_convergence_rate({4, 8, 16, 32}, {1, 0, 1, 1}), DegenerateFit);
}

TEST_CASE("monotonicity check on explicit states") {
  const Config c = load_config(mfclear::testing::config_path("monotonicity_stress.yaml"));
  std::mt19937_64 gen(2);
  const int N1 = c.market.N1, N2 = c.market.N2;
  NodeState u, v;
  for (NodeState* s : {&u, &v}) {
    s->X = mfclear::testing::gaussian(gen, 1, N1);
    s->x = mfclear::testing::gaussian(gen, 1, N2);
    s->r = mfclear::testing::gaussian(gen, 1, N2);
    s->P = mfclear::testing::gaussian(gen, 1, N1);
    s->y = mfclear::testing::gaussian(gen, 1, N2);
    s->p = mfclear::testing::gaussian(gen, 1, N2);
  }
  u.c0 = v.c0 = VecX(0);
  u.c1 = v.c1 = MatX(0, N1);
  u.c2 = v.c2 = MatX(0, N2);
  const MonotonicityRecord r = monotonicity_check(u, v, 0.5, c.market, c.costs, 0.0);
  CHECK(r.forward_sq > 0.0);
  CHECK(r.backward_sq > 0.0);
  CHECK(r.terminal_pass);
  CHECK(r.terminal_lhs >= r.terminal_bound - 1e-12);
  // identical states give zero on both sides
  const MonotonicityRecord z = monotonicity_check(u, u, 0.5, c.market, c.costs, 1.0);
  CHECK(z.lhs == 0.0);
  CHECK(z.pass);
  // a large enough constant always passes
  const MonotonicityRecord big = monotonicity_check(u, v, 0.5, c.market, c.costs, 1e6);
  CHECK(big.pass);
}

TEST_CASE("fitted monotonicity constant") {
  const Config c = load_config(mfclear::testing::config_path("monotonicity_stress.yaml"));
  const MarketParams p = with_populations(c.market, 4, 64);
  const MonotonicityFit f = fit_monotonicity_constant(p, c.costs, 500, 3);
  CHECK(f.pairs == 500);
  CHECK(f.delta == doctest::Approx(1.0 / 16));
  CHECK(f.min_C > 0.0);
  CHECK(f.worst_excess == doctest::Approx(f.delta * f.min_C));
  CHECK(f.worst_terminal_gap > -1e-10);
  // reproducible from the seed
  CHECK(fit_monotonicity_constant(p, c.costs, 500, 3).min_C == f.min_C);
}

TEST_CASE("spread of fitted constants") {
  std::vector<MonotonicityFit> f(3);
  f[0].min_C = 1.0;
  f[1].min_C = 1.5;
  f[2].min_C = 0.75;
  CHECK(constant_spread(f) == doctest::Approx(2.0));
  for (auto& x : f) x.min_C = 0.0;
  CHECK(constant_spread(f) == 1.0);
  f[1].min_C = 1.0;
  CHECK(constant_spread(f) == std::numeric_limits<double>::infinity());
}

TEST_CASE("diagnostics serialize") {
  Diagnostics d;
  d.clearing_residual = {1e-15, 3e-15};
  d.stationarity_residual = 1e-9;
  MatX J1(2, 2);
  J1 << 1, 2, 3, 4;
  d.costs = cost_report(J1, MatX::Ones(2, 3));
  d.rate_fit = RateFit{-0.5, 0.1, 0.99};
  const nlohmann::json j = nlohmann::json::parse(to_json(d));
  CHECK(j["clearing_residual_max"].get<double>() == 3e-15);
  CHECK(j["cost_J1"]["sum"]["mean"].get<double>() == 5.0);
  CHECK(j["rate_fit"]["slope"].get<double>() == -0.5);
  CHECK_FALSE(j.contains("cost_calJ1"));
  d.meanfield = true;
  const nlohmann::json m = nlohmann::json::parse(to_json(d));
  CHECK(m.contains("cost_calJ1"));
  CHECK_FALSE(m.contains("cost_J1"));
}
