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

#include <random>

#include "common.hpp"
#include "mfclear/errors.hpp"
#include "mfclear/hamiltonian.hpp"

using namespace mfclear;
using mfclear::testing::RandomPoint;
using mfclear::testing::random_point;
using Coef = HamiltonianCoefficients<double>;

TEST_CASE("finite Hamiltonian gradient matches central differences on 1000 points") {
  CHECK(mfclear::testing::worst_gradient_error(false, 1000, 11) < 1e-6);
}

TEST_CASE("lifted Hamiltonian gradient matches central differences on 1000 points") {
  CHECK(mfclear::testing::worst_gradient_error(true, 1000, 12) < 1e-6);
}

TEST_CASE("unconstrained minimizer zeroes the control gradient") {
  const Config cfg = mfclear::testing::two_asset_config(false);
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Coef k = Coef::make(cfg.market, cfg.costs, 3.0 / 7.0);
    RandomPoint pt = random_point(gen, 2, 3, 7);
    pt.beta = minimize_H_finite(pt.u, k);
    const HamiltonianGradient<double> g = grad_H_finite(pt.u, pt.beta, pt.a, k);
    CHECK(g.beta.cwiseAbs().maxCoeff() < 1e-10);
    // strict convexity: any other control costs more
    const double best = hamiltonian(pt.u, pt.beta, pt.a, k);
    MatX other = pt.beta + mfclear::testing::gaussian(gen, 2, 3, 0.1);
    CHECK(hamiltonian(pt.u, other, pt.a, k) > best);
  }
}

TEST_CASE("box minimizer satisfies the projected condition") {
  const Config cfg = mfclear::testing::two_asset_config(true);
  std::mt19937_64 gen(6);
  int active = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Coef k = Coef::make(cfg.market, cfg.costs, 0.5);
    RandomPoint pt = random_point(gen, 2, 4, 8);
    pt.beta = minimize_H_finite(pt.u, k, 1e-12);
    const HamiltonianGradient<double> g = grad_H_finite(pt.u, pt.beta, pt.a, k);
    CHECK(stationarity_residual<double>(pt.beta, g.beta, k) < 1e-10);
    CHECK((pt.beta.array() <= 0.3 + 1e-15).all());
    CHECK((pt.beta.row(1).array() >= -0.2 - 1e-15).all());
    if (g.beta.cwiseAbs().maxCoeff() > 1e-6) ++active;
  }
  CHECK(active > 0);
}

TEST_CASE("lifted minimizer coincides with the finite one") {
  const Config cfg = mfclear::testing::two_asset_config(false);
  std::mt19937_64 gen(7);
  const Coef k = Coef::make(cfg.market, cfg.costs, 0.1);
  const RandomPoint pt = random_point(gen, 2, 5, 9);
  CHECK((minimize_lifted_H(pt.u, k) - minimize_H_finite(pt.u, k)).norm() == 0.0);
}

TEST_CASE("clearing price and responses") {
  const Config cfg = load_config(mfclear::testing::config_path("reference.yaml"));
  const Coef k = Coef::make(cfg.market, cfg.costs, 0.25);
  MatX y(1, 2), beta(1, 1);
  y << 1.0, 3.0;
  beta << 2.0;
  const VecX phi = clearing_price(y, beta, k);
  CHECK(phi(0) == doctest::Approx(-2.0 + 0.5));
  CHECK(mf_price<double>(VecX::Constant(1, 2.0), VecX::Constant(1, 2.0), k)(0) ==
        doctest::Approx(-1.5));
  // alpha clears against beta at a finite-market delta
  const Coef fin = Coef::make(cfg.market, cfg.costs, 0.5);
  const VecX p2 = clearing_price(y, beta, fin);
  const MatX alpha = optimal_alpha(y, p2, fin);
  CHECK(alpha.sum() + beta.sum() == doctest::Approx(0.0));

  CHECK_THROWS_AS(clearing_price<double>(MatX(1, 0), beta, k), DimensionMismatch);
  CHECK_THROWS_AS(clearing_price<double>(MatX(2, 2), beta, k), DimensionMismatch);
  AgentStateBlock<double> empty;
  empty.X = MatX(1, 0);
  empty.y = MatX(1, 3);
  CHECK_THROWS_AS(lifted_hamiltonian<double>(empty, MatX(1, 0), AffineSlice<double>{}, k),
                  EmptyCloud);
}

TEST_CASE("gradients in long double agree with double") {
  const Config cfg = mfclear::testing::two_asset_config(false);
  std::mt19937_64 gen(8);
  const RandomPoint pt = random_point(gen, 2, 3, 5);
  const auto kd = Coef::make(cfg.market, cfg.costs, 0.6);
  const auto kl = HamiltonianCoefficients<long double>::make(cfg.market, cfg.costs, 0.6);
  AgentStateBlock<long double> ul{pt.u.X.cast<long double>(), pt.u.P.cast<long double>(),
                                  pt.u.x.cast<long double>(), pt.u.y.cast<long double>(),
                                  pt.u.p.cast<long double>(), pt.u.r.cast<long double>()};
  AffineSlice<long double> al{pt.a.l1.cast<long double>(), pt.a.a1.cast<long double>(),
                              pt.a.l2.cast<long double>(), pt.a.h_f.cast<long double>()};
  const auto gl = grad_H_finite<long double>(ul, pt.beta.cast<long double>(), al, kl);
  const auto gd = grad_H_finite(pt.u, pt.beta, pt.a, kd);
  CHECK((gl.y.cast<double>() - gd.y).norm() < 1e-12);
  CHECK((gl.beta.cast<double>() - gd.beta).norm() < 1e-12);
}
