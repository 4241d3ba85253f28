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

#ifndef MFCLEAR_SRC_PICARD_HPP_
#define MFCLEAR_SRC_PICARD_HPP_

#include <vector>

#include "mfclear/lq_oracle.hpp"
#include "mfclear/market.hpp"
#include "mfclear/solver.hpp"
#include "parallel.hpp"

namespace mfclear::detail {

enum class Mode {
  kFull,        // (X, x, r) forward, (P, y, p) backward
  kGivenInput,  // x forward, y backward, cooperative flow given
};

// Working arrays of one path.
struct PathWork {
  const PathScenario* scen = nullptr;
  std::vector<MatX> X, x, r, P, y, p;  // M + 1 nodes
  // noise added over step k
  std::vector<MatX> nX, nx, nc1, nc2;
  std::vector<VecX> nc0;
  // given-input mode
  std::vector<VecX> u;
  Forecasts fc;
};

struct StageGains {
  AffineGains mean, dev1, dev2;  // given-input mode uses mean and dev1
};

// Continuation plus damped Picard iteration over a group of paths. Paths in
// a group share the conditional-expectation operator; in LQ-exact mode each
// path is its own group.
class Engine {
 public:
  Engine(const Market& market, const ScenarioLayout& layout, const SolverConfig& cfg,
         Mode mode);

  bool lq_exact() const { return lq_; }
  PathWork prepare(const PathScenario& s) const;
  SolveStats solve(std::vector<PathWork>& group) const;
  PathSolution extract(const PathWork& w) const;

 private:
  struct Backward {
    std::vector<std::vector<MatX>> P, y, p;
  };

  StageGains gains(double rho) const;
  NodeState node(const PathWork& w, int k, const MatX& P, const MatX& y, const MatX& p) const;
  void set_affine(PathWork& w, int k, const StageGains& g) const;
  void forward(PathWork& w, double rho, const StageGains* affine) const;
  Backward backward(const std::vector<PathWork>& group, double rho, const StageGains* g) const;
  void cond_exp_lq(const PathWork& w, int k, const StageGains& g, MatX& P, MatX& y,
                   MatX& p) const;
  void cond_exp_regression(const std::vector<PathWork>& group, int k, Backward& b) const;
  bool run_stage(std::vector<PathWork>& group, double rho, double tol,
                 std::vector<double>& history, int& iterations) const;

  const Market& market_;
  ScenarioLayout layout_;
  SolverConfig cfg_;
  Mode mode_;
  TimeGrid grid_;
  double gamma_ = 0.0;
  bool lq_ = true;
  bool noiseless_ = false;
  FullLinearization full_;
  NoncoopLinearization nc_;
};

// Solves every path; groups are single paths in LQ-exact mode and the whole
// set otherwise. `setup` fills mode-specific inputs of a prepared path.
template <class Setup>
EquilibriumSolution solve_groups(const Engine& eng, const ScenarioSet& scen,
                        const SolverConfig& cfg, double delta, const Setup& setup) {
  const int P = scen.size();
  std::vector<std::vector<int>> groups;
  if (eng.lq_exact()) {
    for (int i = 0; i < P; ++i) groups.push_back({i});
  } else if (P > 0) {
    groups.emplace_back();
    for (int i = 0; i < P; ++i) groups.back().push_back(i);
  }
  EquilibriumSolution out;
  out.layout = scen.layout;
  out.delta = delta;
  out.paths.resize(P);
  std::vector<SolveStats> stats(groups.size());
  parallel_for(static_cast<int>(groups.size()), cfg.threads, [&](int g) {
    std::vector<PathWork> work;
    work.reserve(groups[g].size());
    for (int i : groups[g]) {
      work.push_back(eng.prepare(scen.paths[i]));
      setup(i, work.back());
    }
    stats[g] = eng.solve(work);
    for (size_t j = 0; j < work.size(); ++j) out.paths[groups[g][j]] = eng.extract(work[j]);
  });
  for (const SolveStats& s : stats) out.stats.merge(s);
  return out;
}

}  // namespace mfclear::detail

#endif  // MFCLEAR_SRC_PICARD_HPP_
