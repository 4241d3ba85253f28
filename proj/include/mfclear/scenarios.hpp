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

#ifndef MFCLEAR_SCENARIOS_HPP_
#define MFCLEAR_SCENARIOS_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "mfclear/model.hpp"

namespace mfclear {

// Stream tags used as the third Philox counter word.
enum class Stream : uint32_t {
  kCommon = 0,
  kCooperative = 1,
  kNonCooperative = 2,
  kCloudNonCooperative = 3,  // cloud particles kept apart from market agents
  kMonotonicitySampler = 4,
  kPerturbation = 5,
};

struct InitialLaws {
  GaussianLaw xi;   // cooperative initial inventory
  GaussianLaw eta;  // non-cooperative initial inventory
};

struct ScenarioLayout {
  int n = 1;
  int N1 = 1;
  int N2 = 1;
  int M = 1;
  double T = 1.0;
  int d0 = 1, d1 = 1, d2 = 1;
  int m0 = 0, m1 = 0, m2 = 0;

  bool operator==(const ScenarioLayout&) const = default;
};

// Noise and information paths of one Monte Carlo path. Agent blocks are
// node-major: column k * N + i holds agent i at step or node k.
struct PathScenario {
  uint64_t id = 0;
  MatX dW0;  // d0 x M
  MatX dW1;  // d1 x (M * N1)
  MatX dW2;  // d2 x (M * N2)
  MatX xi;   // n x N1
  MatX eta;  // n x N2
  MatX c0;   // m0 x (M + 1)
  MatX c1;   // m1 x ((M + 1) * N1)
  MatX c2;   // m2 x ((M + 1) * N2)
};

struct ScenarioSet {
  ScenarioLayout layout;
  uint64_t seed = 0;
  std::vector<PathScenario> paths;

  int size() const { return static_cast<int>(paths.size()); }
};

struct ScenarioRequest {
  int N1 = 1;  // agent counts; may differ from the market (particle clouds)
  int N2 = 1;
  uint64_t seed = 1;
  uint64_t first_path = 0;
  int paths = 1;
  double max_cells = 2e8;  // cap on paths * (N1 + N2) * M
  // Draw the non-cooperative population from its own stream family instead
  // of the one finite-market agents use.
  bool separate_pop2 = false;
};

ScenarioLayout make_layout(const MarketParams& params, const CostSpec& costs,
                           int N1, int N2);

// Agent i of a population always draws from stream (seed, path, population, i),
// so enlarging a population leaves existing agents untouched.
ScenarioSet generate(const MarketParams& params, const CostSpec& costs,
                     const InitialLaws& laws, const ScenarioRequest& req);

// Convenience: the market's own population sizes, paths [0, P).
ScenarioSet generate(const MarketParams& params, const CostSpec& costs,
                     const InitialLaws& laws, int P, uint64_t seed,
                     double max_cells = 2e8);

// Flips every Brownian increment; information paths are rebuilt.
ScenarioSet antithetic(const ScenarioSet& set, const CostSpec& costs);

// Rebuilds c0, c1, c2 from the increments by Euler steps.
void build_information_paths(PathScenario& path, const ScenarioLayout& layout,
                             const CostSpec& costs);

// Little-endian layout: "MFSC", u32 version, i32 n N1 N2 M d0 d1 d2 m0 m1 m2,
// f64 T, u64 seed, u64 P, then per path u64 id followed by dW0 dW1 dW2 xi eta
// c0 c1 c2 as row-major f64 arrays with the shapes listed on PathScenario.
void dump_scenarios(const ScenarioSet& set, const std::string& file);
ScenarioSet load_scenarios(const std::string& file);

}  // namespace mfclear

#endif  // MFCLEAR_SCENARIOS_HPP_
