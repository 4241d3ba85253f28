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

#include <sstream>

#include "common.hpp"
#include "mfclear/experiments.hpp"

using namespace mfclear;

namespace {

std::string first_lines(const std::string& text, int count) {
  std::istringstream in(text);
  std::string out, l;
  for (int i = 0; i < count && std::getline(in, l); ++i) out += l + "\n";
  return out;
}

}  // namespace

TEST_CASE("clearing experiment") {
  Config c = mfclear::testing::small_reference(4, 64, 8);
  c.sim.paths = 4;
  const ClearingResult r = run_clearing(c);
  CHECK(r.per_node.size() == 8);
  CHECK(r.max_residual < 1e-12);
  std::ostringstream os;
  write_clearing_csv(r, TimeGrid{1.0, 8}, os);
  CHECK(first_lines(os.str(), 2) == "# mfclear-clearing schema=1\nt,max_abs_residual\n");
}

TEST_CASE("optimality experiment") {
  Config c = mfclear::testing::small_reference(4, 64, 8);
  c.sim.paths = 16;
  c.experiments.perturbations = 4;
  const OptimalityResult r = run_optimality(c);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.violations == 0);
  for (const PerturbationRow& row : r.rows) {
    CHECK(row.norm_sq > 0.0);
    CHECK(row.bound == doctest::Approx(0.5 * 2.0 * 0.01 * row.norm_sq));
    CHECK(row.delta_J.mean > 0.0);
    CHECK(row.pass);
  }
  std::ostringstream os;
  write_optimality_csv(r, os);
  CHECK(first_lines(os.str(), 2) ==
        "# mfclear-optimality schema=1\nindex,epsilon,delta_J,se,norm_sq,bound,pass\n");
}

TEST_CASE("convergence experiment on a short ladder") {
  Config c = mfclear::testing::small_reference(4, 64, 8);
  c.meanfield.K1 = 200;
  c.meanfield.K2 = 200;
  c.experiments.ladder = {2, 4, 8, 16};
  c.experiments.convergence_paths = 8;
  const ConvergenceResult r = run_convergence(c);
  REQUIRE(r.rows.size() == 4);
  CHECK(r.rows[2].N1 == 8);
  CHECK(r.rows[2].N2 == 128);
  CHECK(r.rows.front().control_gap > r.rows.back().control_gap);
  CHECK(r.fit.slope < 0.0);
  for (const LadderRow& row : r.rows) CHECK(row.eps_N1 >= 1.0 / std::sqrt(row.N1) - 1e-15);
  std::ostringstream os, fit;
  write_convergence_csv(r, os);
  write_convergence_fit_csv(r, fit);
  CHECK(first_lines(os.str(), 1) == "# mfclear-convergence schema=1\n");
  CHECK(first_lines(fit.str(), 2) == "# mfclear-convergence-fit schema=1\nslope,intercept,r2\n");
}

TEST_CASE("delta sweep records every level") {
  Config c = mfclear::testing::small_reference(4, 64, 8);
  c.experiments.deltas = {0.25, 0.5, 1.0};
  c.experiments.sweep_N1 = 2;
  c.experiments.sweep_paths = 2;
  c.experiments.monotonicity_pairs = 200;
  c.experiments.monotonicity_N2 = 16;
  const DeltaSweepResult r = run_delta_sweep(c);
  REQUIRE(r.rows.size() == 3);
  CHECK(r.rows[1].N2 == 4);
  for (const SweepRow& row : r.rows) {
    CHECK(row.converged);
    CHECK(row.clearing < 1e-12);
  }
  CHECK_FALSE(r.first_failure.has_value());
  CHECK(r.fits.size() == 3);
  CHECK(r.fits[0].delta == doctest::Approx(0.25));
  std::ostringstream sweep, mono;
  write_delta_sweep_csv(r, sweep);
  write_monotonicity_csv(r, mono);
  CHECK(first_lines(sweep.str(), 1) == "# mfclear-delta-sweep schema=1\n");
  CHECK(first_lines(mono.str(), 2) ==
        "# mfclear-monotonicity schema=1\ndelta,pairs,min_C,worst_excess,worst_terminal_gap\n");
}

TEST_CASE("a failing level is data, not an error") {
  Config c = mfclear::testing::small_reference(4, 64, 8);
  c.experiments.deltas = {0.5};
  c.experiments.sweep_N1 = 2;
  c.experiments.sweep_paths = 1;
  c.experiments.monotonicity_pairs = 10;
  c.experiments.monotonicity_N2 = 4;
  c.solver.max_inner = 1;
  c.solver.max_halvings = 0;
  c.solver.warm_start = false;
  const DeltaSweepResult r = run_delta_sweep(c);
  REQUIRE(r.rows.size() == 1);
  CHECK_FALSE(r.rows[0].converged);
  CHECK_FALSE(r.rows[0].failure.empty());
  REQUIRE(r.first_failure.has_value());
  CHECK(*r.first_failure == 0.5);
}
