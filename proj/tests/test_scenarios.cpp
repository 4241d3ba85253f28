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
#include <cstdio>
#include <filesystem>

#include "common.hpp"
#include "mfclear/errors.hpp"
#include "mfclear/rng.hpp"
#include "mfclear/scenarios.hpp"
#include "mfclear/solver_meanfield.hpp"

using namespace mfclear;

namespace {

bool same(const PathScenario& a, const PathScenario& b) {
  return a.id == b.id && a.dW0 == b.dW0 && a.dW1 == b.dW1 && a.dW2 == b.dW2 && a.xi == b.xi &&
         a.eta == b.eta && a.c0 == b.c0 && a.c1 == b.c1 && a.c2 == b.c2;
}

}  // namespace

TEST_CASE("normal stream moments and addressing") {
  const NormalStream s(42, 0, 0, 0);
  const int count = 200000;
  std::vector<double> v(count);
  s.fill(0, v.data(), count);
  double m = 0.0, q = 0.0;
  for (double x : v) m += x;
  m /= count;
  for (double x : v) q += (x - m) * (x - m);
  q /= count - 1;
  CHECK(std::abs(m) < 4.0 / std::sqrt(count));
  CHECK(q == doctest::Approx(1.0).epsilon(0.02));
  // random access agrees with sequential fill, including an odd start
  CHECK(s(12345) == v[12345]);
  std::vector<double> w(3);
  s.fill(7, w.data(), 3);
  CHECK(w[0] == v[7]);
  CHECK(w[2] == v[9]);
  CHECK(NormalStream(42, 0, 0, 1)(0) != v[0]);
  CHECK(NormalStream(43, 0, 0, 0)(0) != v[0]);
}

TEST_CASE("shapes and increments") {
  const Config c = load_config(mfclear::testing::config_path("reference.yaml"));
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 3, 9);
  REQUIRE(s.size() == 3);
  const ScenarioLayout& L = s.layout;
  CHECK(L.N1 == 16);
  CHECK(L.m0 == 1);
  const PathScenario& p = s.paths[1];
  CHECK(p.id == 1);
  CHECK(p.dW0.cols() == L.M);
  CHECK(p.dW1.cols() == L.M * L.N1);
  CHECK(p.dW2.cols() == L.M * L.N2);
  CHECK(p.xi.cols() == L.N1);
  CHECK(p.c0.cols() == L.M + 1);
  CHECK(p.c1.cols() == (L.M + 1) * L.N1);
  CHECK(p.c0(0, 0) == 0.0);
  // increments have variance dt
  const double var = p.dW2.squaredNorm() / static_cast<double>(p.dW2.size());
  CHECK(var == doctest::Approx(1.0 / L.M).epsilon(0.1));
  // Euler step of the common information process
  const double dt = 1.0 / L.M;
  const double c1 = p.c0(0, 0) + 1.0 * (0.0 - p.c0(0, 0)) * dt + 0.3 * p.dW0(0, 0);
  CHECK(p.c0(0, 1) == doctest::Approx(c1));
}

TEST_CASE("paths and agents draw from fixed streams") {
  const Config c = load_config(mfclear::testing::config_path("reference.yaml"));
  const ScenarioSet all = generate(c.market, c.costs, c.laws, 4, 9);

  ScenarioRequest req;
  req.N1 = c.market.N1;
  req.N2 = c.market.N2;
  req.seed = 9;
  req.first_path = 2;
  req.paths = 2;
  const ScenarioSet tail = generate(c.market, c.costs, c.laws, req);
  CHECK(same(all.paths[2], tail.paths[0]));
  CHECK(same(all.paths[3], tail.paths[1]));

  // enlarging a population keeps the existing agents
  req.first_path = 0;
  req.paths = 1;
  req.N1 = 40;
  const ScenarioSet big = generate(c.market, c.costs, c.laws, req);
  const PathScenario& a = all.paths[0];
  const PathScenario& b = big.paths[0];
  CHECK(a.dW0 == b.dW0);
  CHECK(a.xi == b.xi.leftCols(16));
  for (int k = 0; k < c.market.M; ++k)
    CHECK(a.dW1.middleCols(k * 16, 16) == b.dW1.middleCols(k * 40, 16));
  CHECK(a.dW2 == b.dW2);

  // a separate non-cooperative family changes those agents only
  req.N1 = 16;
  req.separate_pop2 = true;
  const ScenarioSet sep = generate(c.market, c.costs, c.laws, req);
  CHECK(sep.paths[0].dW1 == a.dW1);
  CHECK(sep.paths[0].dW0 == a.dW0);
  CHECK(sep.paths[0].dW2 != a.dW2);
}

TEST_CASE("cloud scenarios share cooperative streams with the market") {
  const Config c = load_config(mfclear::testing::config_path("reference.yaml"));
  const ScenarioSet market = generate(c.market, c.costs, c.laws, 2, 5);
  const ScenarioSet cloud = cloud_scenarios(c.market, c.costs, c.laws, 64, 64, 5, 0, 2);
  CHECK(cloud.layout.N1 == 64);
  CHECK(cloud.paths[1].dW0 == market.paths[1].dW0);
  CHECK(cloud.paths[1].xi.leftCols(16) == market.paths[1].xi);
  CHECK(cloud.paths[1].eta.leftCols(16) != market.paths[1].eta.leftCols(16));
}

TEST_CASE("antithetic flips increments") {
  const Config c = load_config(mfclear::testing::config_path("reference.yaml"));
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 2, 9);
  const ScenarioSet a = antithetic(s, c.costs);
  CHECK(a.paths[0].dW0 == -s.paths[0].dW0);
  CHECK(a.paths[1].dW2 == -s.paths[1].dW2);
  CHECK(a.paths[0].c0(0, 1) == doctest::Approx(-s.paths[0].c0(0, 1)));
}

TEST_CASE("memory budget") {
  const Config c = load_config(mfclear::testing::config_path("reference.yaml"));
  CHECK_THROWS_AS(generate(c.market, c.costs, c.laws, 1000, 1, 1e5), OutOfMemoryBudget);
}

TEST_CASE("scenario dump round trip") {
  const Config c = load_config(mfclear::testing::config_path("reference.yaml"));
  const ScenarioSet s = generate(c.market, c.costs, c.laws, 3, 9);
  const std::string file =
      (std::filesystem::temp_directory_path() / "mfclear_scenarios_test.bin").string();
  dump_scenarios(s, file);
  const ScenarioSet r = load_scenarios(file);
  std::remove(file.c_str());
  CHECK(r.layout == s.layout);
  CHECK(r.seed == 9);
  REQUIRE(r.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(same(r.paths[i], s.paths[i]));
}
