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

// Acceptance run: one PASS/FAIL line per criterion at full size.
// Usage: mfclear_acceptance [configs_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include "common.hpp"
#include "mfclear/errors.hpp"
#include "mfclear/experiments.hpp"
#include "mfclear/io.hpp"
#include "mfclear/lq_oracle.hpp"
#include "mfclear/solver_meanfield.hpp"

using namespace mfclear;
namespace fs = std::filesystem;

namespace {

std::string dir = std::string(MFCLEAR_SOURCE_DIR) + "/configs/";
int failures = 0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

void report(const std::string& name, double seconds, double budget, const Outcome& o) {
  const bool in_time = budget <= 0 || seconds <= budget;
  const bool ok = o.pass && in_time;
  if (!ok) ++failures;
  std::printf("%s  %-28s %s  [%.1f s%s]\n", ok ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(),
              seconds, budget > 0 ? fmt(" / %.0f s", budget).c_str() : "");
  std::fflush(stdout);
}

void run(const std::string& name, double budget, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("error: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(name, s, budget, o);
}

std::string file_bytes(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc > 1) dir = std::string(argv[1]) + "/";
  const Config ref = load_config(dir + "reference.yaml");

  // shared by the clearing and stationarity lines
  EquilibriumSolution ref_sol;
  ScenarioSet ref_scen;

  run("market clearing", 120, [&] {
    ref_scen = generate(ref.market, ref.costs, ref.laws, ref.sim.paths, ref.sim.seed);
    ref_sol = solve_equilibrium_finite(ref.market, ref.costs, ref_scen, ref.solver);
    double worst = 0.0;
    for (double v : clearing_residuals(ref_sol)) worst = std::max(worst, v);
    return Outcome{worst < 1e-12, fmt("max |sum alpha + sum beta| = %.3g over %.0f paths (< 1e-12)",
                                      worst, ref_scen.size())};
  });

  run("stationarity", 0, [&] {
    const double r = stationarity_residual(ref_sol, ref_scen, ref.market, ref.costs);
    return Outcome{r < 1e-6, fmt("max node residual = %.3g on all nodes (< 1e-6)", r)};
  });

  run("oracle equivalence", 30, [&] {
    const Config c = load_config(dir + "deterministic.yaml");
    const ScenarioSet s = generate(c.market, c.costs, c.laws, 1, c.sim.seed);
    const OracleResult o = deterministic_oracle(c.market, c.costs, s.layout, s.paths[0]);
    const EquilibriumSolution e = solve_equilibrium_finite(c.market, c.costs, s, c.solver);
    const double dt = c.market.T / c.market.M;
    double gap = 0.0;
    for (int k = 0; k < c.market.M; ++k)
      gap += dt * (e.paths[0].beta[k] - o.beta[k]).squaredNorm();
    gap = std::sqrt(gap);
    const double J = oracle_response(c.market, c.costs, s.layout, s.paths[0], e.paths[0].beta).cost;
    const double rel = std::abs(J - o.cost) / std::abs(o.cost);
    return Outcome{gap < 1e-5 && rel < 1e-6,
                   fmt("control L2 gap = %.3g (< 1e-5), cost gap = %.3g relative (< 1e-6)", gap,
                       rel)};
  });

  run("optimality", 300, [&] {
    const OptimalityResult r = run_optimality(ref);
    double lo = INFINITY, hi = 0.0;
    for (const PerturbationRow& row : r.rows) {
      const double ratio = row.delta_J.mean / row.bound;
      lo = std::min(lo, ratio);
      hi = std::max(hi, ratio);
    }
    return Outcome{r.violations == 0 && r.rows.size() == 50,
                   fmt("%.0f perturbations at eps %.2g, %.0f violations, dJ/bound in [%.3f, ", r.rows.size(),
                       ref.experiments.epsilon, r.violations, lo) +
                       fmt("%.3f]", hi)};
  });

  ConvergenceResult conv;
  run("convergence rate", 600, [&] {
    conv = run_convergence(ref);
    const RateFit& f = conv.fit;
    return Outcome{f.slope >= -0.75 && f.slope <= -0.3 && f.r2 > 0.8,
                   fmt("slope = %.3f in [-0.75, -0.3], R2 = %.3f (> 0.8)", f.slope, f.r2)};
  });

  run("cost-gap sandwich", 0, [&] {
    const int a = conv.cost_gap_equilibrium_inversions;
    const int b = conv.cost_gap_decentralized_inversions;
    std::string gaps;
    for (const LadderRow& row : conv.rows)
      gaps += fmt(" %.2e/%.2e", row.cost_gap_equilibrium.mean, row.cost_gap_decentralized.mean);
    return Outcome{!conv.rows.empty() && a <= 1 && b <= 1,
                   fmt("inversions %.0f and %.0f (<= 1); gaps", a, b) + gaps};
  });

  run("monotonicity scaling", 0, [&] {
    const Config c = load_config(dir + "monotonicity_stress.yaml");
    const DeltaSweepResult r = run_delta_sweep(c);
    std::string cs;
    for (const MonotonicityFit& f : r.fits) cs += fmt(" %.3g", f.min_C);
    return Outcome{r.fits.size() == 4 && r.constant_spread <= 2.0,
                   fmt("excess / delta spread = %.3f (<= 2) over %.0f pairs; C =",
                       r.constant_spread, c.experiments.monotonicity_pairs) + cs};
  });

  run("gradient checks", 0, [&] {
    const double fin = mfclear::testing::worst_gradient_error(false, 1000, 101);
    const double lif = mfclear::testing::worst_gradient_error(true, 1000, 102);
    return Outcome{fin < 1e-6 && lif < 1e-6,
                   fmt("worst relative error finite %.2g, lifted %.2g on 1000 points (< 1e-6)",
                       fin, lif)};
  });

  run("determinism", 0, [&] {
    const fs::path tmp = fs::temp_directory_path() / "mfclear_acceptance";
    fs::create_directories(tmp);
    Config c = ref;
    const ScenarioSet s = generate(c.market, c.costs, c.laws, 32, c.sim.seed);
    const ScenarioSet cloud =
        cloud_scenarios(c.market, c.costs, c.laws, c.meanfield.K1, c.meanfield.K2, c.sim.seed, 0, 4);
    std::vector<std::string> dumps;
    for (int threads : {1, 8}) {
      c.solver.threads = threads;
      const std::string a = (tmp / ("finite_" + std::to_string(threads) + ".bin")).string();
      const std::string b = (tmp / ("cloud_" + std::to_string(threads) + ".bin")).string();
      dump_solution(solve_equilibrium_finite(c.market, c.costs, s, c.solver), a);
      dump_solution(solve_meanfield(c.market, c.costs, cloud, c.solver).cloud, b);
      dumps.push_back(file_bytes(a));
      dumps.push_back(file_bytes(b));
    }
    fs::remove_all(tmp);
    const bool same = dumps[0] == dumps[2] && dumps[1] == dumps[3] && !dumps[0].empty();
    return Outcome{same, fmt("finite (32 paths, %.0f bytes) and cloud (4 paths) dumps at 1 and 8 "
                             "threads ",
                             dumps[0].size()) +
                             (same ? "identical" : "differ")};
  });

  std::printf("%s: %d criteria failed\n", failures ? "FAILED" : "ALL PASSED", failures);
  return failures ? 1 : 0;
}
