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

// Command-line driver: validate | solve | experiment.

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mfclear/config.hpp"
#include "mfclear/errors.hpp"
#include "mfclear/experiments.hpp"
#include "mfclear/io.hpp"
#include "mfclear/lq_oracle.hpp"
#include "mfclear/metrics.hpp"
#include "mfclear/solver.hpp"
#include "mfclear/solver_meanfield.hpp"

namespace fs = std::filesystem;
using namespace mfclear;
using nlohmann::json;

namespace {

enum Exit { kOk = 0, kBadConfig = 1, kAssumption = 2, kSolver = 3 };

struct Options {
  std::string config;
  std::optional<uint64_t> seed;
  std::string out = "out";
  int threads = 0;
  int paths = 0;
  int grid = 0;
  int dump_paths = 16;
};

Config load(const Options& o) {
  Config c = load_config(o.config);
  c.sim.seed = o.seed ? *o.seed : seed_override(c.sim.seed);
  if (o.threads > 0) c.solver.threads = o.threads;
  if (o.paths > 0) {
    c.sim.paths = o.paths;
    c.experiments.convergence_paths = o.paths;
  }
  if (o.grid > 0) c.market.M = o.grid;
  check(c.solver);
  require_valid(c.market, c.costs);
  return c;
}

void write_file(const fs::path& file, const std::string& text) {
  std::ofstream os(file);
  if (!os) throw Error("cannot write " + file.string());
  os << text;
}

template <class F>
void write_stream(const fs::path& file, F&& fn) {
  std::ofstream os(file);
  if (!os) throw Error("cannot write " + file.string());
  fn(os);
}

bool deterministic(const CostSpec& c) {
  const auto zero = [](const MatX& m) { return m.isZero(0); };
  return zero(c.pop1.sigma0) && zero(c.pop1.sigma) && zero(c.pop2.sigma0) &&
         zero(c.pop2.sigma) && zero(c.info.common.vol) && zero(c.info.pop1.vol) &&
         zero(c.info.pop2.vol);
}

json oracle_check(const Config& c, const ScenarioSet& scen, const EquilibriumSolution& sol) {
  const OracleResult o = deterministic_oracle(c.market, c.costs, scen.layout, scen.paths[0]);
  const double dt = c.market.T / c.market.M;
  double gap = 0.0;
  for (int k = 0; k < c.market.M; ++k) gap += dt * (sol.paths[0].beta[k] - o.beta[k]).squaredNorm();
  const OracleResponse r =
      oracle_response(c.market, c.costs, scen.layout, scen.paths[0], sol.paths[0].beta);
  return {{"path", scen.paths[0].id},
          {"control_l2_gap", std::sqrt(gap)},
          {"cost_oracle", o.cost},
          {"cost_solver", r.cost},
          {"cost_relative_gap", std::abs(r.cost - o.cost) / std::max(1e-300, std::abs(o.cost))}};
}

void write_solution_files(const fs::path& dir, const EquilibriumSolution& sol, int dump_paths) {
  write_stream(dir / "solution.csv", [&](std::ostream& os) { write_solution_csv(sol, os, dump_paths); });
  dump_solution(sol, (dir / "solution.bin").string(), dump_paths);
}

// Mean-field solve in path batches. Keeps what the callers need.
struct CloudRun {
  EquilibriumSolution kept;  // first dump paths
  MatX J1, J2;
  std::vector<double> clearing;
  SolveStats stats;
  std::vector<ControlInput> subset;  // filled when subset_N1 > 0
};

CloudRun run_cloud(const Config& c, int dump_paths, int subset_N1, std::ostream* prices) {
  const int P = c.sim.paths, K1 = c.meanfield.K1, K2 = c.meanfield.K2;
  const int batch = std::max(1, c.meanfield.path_batch);
  CloudRun run;
  run.J1.resize(P, K1);
  run.J2.resize(P, K2);
  bool first_stats = true;
  for (int first = 0; first < P; first += batch) {
    const int count = std::min(batch, P - first);
    const ScenarioSet cloud = cloud_scenarios(c.market, c.costs, c.laws, K1, K2, c.sim.seed,
                                              static_cast<uint64_t>(first), count, c.sim.max_cells);
    const MeanFieldSolution mf = solve_meanfield(c.market, c.costs, cloud, c.solver);
    const CostReport cr = eval_costs(mf.cloud, cloud, c.market, c.costs);
    run.J1.middleRows(first, count) = cr.J1_paths;
    run.J2.middleRows(first, count) = cr.J2_paths;
    const std::vector<double> cl = clearing_residuals(mf.cloud);
    run.clearing.resize(cl.size(), 0.0);
    for (size_t k = 0; k < cl.size(); ++k) run.clearing[k] = std::max(run.clearing[k], cl[k]);
    if (first_stats) {
      run.stats = mf.cloud.stats;
      run.kept.layout = mf.cloud.layout;
      run.kept.delta = mf.cloud.delta;
      first_stats = false;
    } else {
      run.stats.merge(mf.cloud.stats);
    }
    for (int q = 0; q < count && static_cast<int>(run.kept.paths.size()) < dump_paths; ++q)
      run.kept.paths.push_back(mf.cloud.paths[q]);
    if (prices) write_price_csv(mf.cloud, *prices, -1, first == 0);
    if (subset_N1 > 0)
      for (ControlInput& in : subset_controls(c.market, c.costs, cloud, mf, subset_N1))
        run.subset.push_back(std::move(in));
  }
  return run;
}

int cmd_validate(const Options& o) {
  const Config c = load_config(o.config);
  const ValidationReport rep = validate(c.market, c.costs);
  std::cout << rep.to_string();
  if (rep.ok()) {
    std::cout << "configuration valid\n";
    return kOk;
  }
  for (const ValidationCheck& chk : rep.checks)
    if (!chk.pass) std::cerr << "violated: " << chk.clause << " (" << chk.detail << ")\n";
  return kAssumption;
}

int cmd_solve(const std::string& kind, const Options& o) {
  const Config c = load(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  Diagnostics d;
  json extra;
  if (kind == "finite") {
    const ScenarioSet scen =
        generate(c.market, c.costs, c.laws, c.sim.paths, c.sim.seed, c.sim.max_cells);
    const EquilibriumSolution sol = solve_equilibrium_finite(c.market, c.costs, scen, c.solver);
    d.clearing_residual = clearing_residuals(sol);
    d.stationarity_residual = stationarity_residual(sol, scen, c.market, c.costs);
    d.costs = eval_costs(sol, scen, c.market, c.costs);
    d.stats = sol.stats;
    if (deterministic(c.costs)) extra["oracle"] = oracle_check(c, scen, sol);
    write_solution_files(dir, sol, o.dump_paths);
    write_stream(dir / "prices.csv", [&](std::ostream& os) { write_price_csv(sol, os); });
  } else if (kind == "meanfield") {
    std::ofstream prices(dir / "prices.csv");
    const CloudRun run = run_cloud(c, o.dump_paths, 0, &prices);
    d.meanfield = true;
    d.clearing_residual = run.clearing;
    d.costs = cost_report(run.J1, run.J2);
    d.stats = run.stats;
    write_solution_files(dir, run.kept, o.dump_paths);
  } else {
    const CloudRun run = run_cloud(c, 0, c.market.N1, nullptr);
    const ScenarioSet scen =
        generate(c.market, c.costs, c.laws, c.sim.paths, c.sim.seed, c.sim.max_cells);
    const EquilibriumSolution sol = solve_decentralized(c.market, c.costs, scen, run.subset, c.solver);
    d.clearing_residual = clearing_residuals(sol);
    d.costs = eval_costs(sol, scen, c.market, c.costs);
    d.stats = sol.stats;
    const CostReport mfc = cost_report(run.J1.leftCols(c.market.N1), MatX(run.J1.rows(), 0));
    extra["meanfield_cost_calJ1"] = {{"mean", mfc.J1_avg.mean}, {"se", mfc.J1_avg.se}};
    write_solution_files(dir, sol, o.dump_paths);
    write_stream(dir / "prices.csv", [&](std::ostream& os) { write_price_csv(sol, os); });
  }
  json j = json::parse(to_json(d));
  j["kind"] = kind;
  j["seed"] = c.sim.seed;
  j["paths"] = c.sim.paths;
  for (auto& [key, value] : extra.items()) j[key] = value;
  write_file(dir / "diagnostics.json", j.dump(2) + "\n");
  double clr = 0.0;
  for (double v : d.clearing_residual) clr = std::max(clr, v);
  std::cout << "solve " << kind << ": " << c.sim.paths << " paths, clearing residual " << clr
            << ", outer steps " << d.stats->outer_steps << ", inner iterations "
            << d.stats->inner_iterations << "\n";
  if (extra.contains("oracle"))
    std::cout << "oracle control gap " << extra["oracle"]["control_l2_gap"].get<double>()
              << ", cost gap " << extra["oracle"]["cost_relative_gap"].get<double>() << "\n";
  return kOk;
}

int cmd_experiment(const std::string& name, const Options& o) {
  const Config c = load(o);
  const fs::path dir = o.out;
  fs::create_directories(dir);
  json j;
  j["experiment"] = name;
  j["seed"] = c.sim.seed;
  if (name == "clearing") {
    const ClearingResult r = run_clearing(c);
    write_stream(dir / "clearing.csv", [&](std::ostream& os) {
      write_clearing_csv(r, TimeGrid{c.market.T, c.market.M}, os);
    });
    j["max_residual"] = r.max_residual;
    j["paths"] = c.sim.paths;
    std::cout << "clearing: max residual " << r.max_residual << " over " << c.sim.paths
              << " paths\n";
  } else if (name == "optimality") {
    const OptimalityResult r = run_optimality(c);
    write_stream(dir / "optimality.csv", [&](std::ostream& os) { write_optimality_csv(r, os); });
    j["base_cost"] = {{"mean", r.base_cost.mean}, {"se", r.base_cost.se}};
    j["perturbations"] = r.rows.size();
    j["violations"] = r.violations;
    std::cout << "optimality: " << r.rows.size() << " perturbations, " << r.violations
              << " violations\n";
  } else if (name == "convergence") {
    const ConvergenceResult r = run_convergence(c);
    write_stream(dir / "convergence.csv", [&](std::ostream& os) { write_convergence_csv(r, os); });
    write_stream(dir / "convergence_fit.csv",
                 [&](std::ostream& os) { write_convergence_fit_csv(r, os); });
    j["rate_fit"] = {{"slope", r.fit.slope}, {"intercept", r.fit.intercept}, {"r2", r.fit.r2}};
    j["cost_gap_equilibrium_inversions"] = r.cost_gap_equilibrium_inversions;
    j["cost_gap_decentralized_inversions"] = r.cost_gap_decentralized_inversions;
    std::cout << "convergence: slope " << r.fit.slope << ", R^2 " << r.fit.r2 << "\n";
  } else {
    const DeltaSweepResult r = run_delta_sweep(c);
    write_stream(dir / "delta_sweep.csv", [&](std::ostream& os) { write_delta_sweep_csv(r, os); });
    write_stream(dir / "monotonicity.csv", [&](std::ostream& os) { write_monotonicity_csv(r, os); });
    j["first_failure"] = r.first_failure ? json(*r.first_failure) : json(nullptr);
    j["constant_spread"] = std::isfinite(r.constant_spread) ? json(r.constant_spread) : json("inf");
    std::cout << "delta-sweep: ";
    if (r.first_failure)
      std::cout << "first failure at delta " << *r.first_failure;
    else
      std::cout << "converged at every delta";
    std::cout << ", constant spread " << r.constant_spread << "\n";
  }
  write_file(dir / (name + ".json"), j.dump(2) + "\n");
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfclear: finite and mean-field market clearing equilibria"};
  app.require_subcommand(1);
  Options o;
  const auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config, "YAML configuration")->required();
    sub->add_option("--seed", o.seed, "seed (overrides MFCLEAR_SEED and the config)");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--threads", o.threads, "worker threads");
    sub->add_option("--paths", o.paths, "Monte Carlo paths");
    sub->add_option("--grid", o.grid, "time steps M");
    sub->add_option("--dump-paths", o.dump_paths, "paths written to solution dumps")
        ->capture_default_str();
  };

  CLI::App* validate_cmd = app.add_subcommand("validate", "check a configuration");
  validate_cmd->add_option("--config", o.config, "YAML configuration")->required();

  std::string kind;
  CLI::App* solve_cmd = app.add_subcommand("solve", "solve and write dumps");
  solve_cmd->add_option("kind", kind)
      ->required()
      ->check(CLI::IsMember({"finite", "meanfield", "decentralized"}));
  common(solve_cmd);

  std::string name;
  CLI::App* exp_cmd = app.add_subcommand("experiment", "run a named experiment");
  exp_cmd->add_option("name", name)
      ->required()
      ->check(CLI::IsMember({"clearing", "optimality", "convergence", "delta-sweep"}));
  common(exp_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadConfig;
  }

  try {
    if (validate_cmd->parsed()) return cmd_validate(o);
    if (solve_cmd->parsed()) return cmd_solve(kind, o);
    return cmd_experiment(name, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kBadConfig;
  } catch (const AssumptionViolation& e) {
    std::cerr << "assumption violated: " << e.what() << "\n";
    return kAssumption;
  } catch (const ContractionFailure& e) {
    std::cerr << "solver failure: " << e.what() << " (rho reached " << e.rho_reached() << ")\n";
    return kSolver;
  } catch (const Error& e) {
    std::cerr << "solver failure: " << e.what() << "\n";
    return kSolver;
  }
}
