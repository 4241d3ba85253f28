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

#include "mfclear/scenarios.hpp"

#include <cmath>
#include <fstream>

#include "mfclear/errors.hpp"
#include "mfclear/rng.hpp"
#include "binio.hpp"

namespace mfclear {

namespace {

MatX sqrt_psd(const MatX& cov) {
  if (cov.size() == 0) return cov;
  Eigen::SelfAdjointEigenSolver<MatX> es(cov);
  const VecX s = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * s.asDiagonal() * es.eigenvectors().transpose();
}

// Draw layout inside one agent stream: [0, n) initial inventory, then
// n + k * d + r for step k, Brownian coordinate r.
void draw_agent(const NormalStream& s, int n, int d, int M, double sqdt,
                const VecX& mean, const MatX& root, double* init_col, MatX& dW,
                int agent, int N) {
  VecX z(n);
  s.fill(0, z.data(), static_cast<uint64_t>(n));
  Eigen::Map<VecX>(init_col, n) = mean + root * z;
  if (d == 0) return;
  std::vector<double> buf(static_cast<size_t>(M) * d);
  s.fill(static_cast<uint64_t>(n), buf.data(), buf.size());
  for (int k = 0; k < M; ++k)
    for (int r = 0; r < d; ++r) dW(r, k * N + agent) = sqdt * buf[k * d + r];
}

void euler_info(const InfoProcess& ip, double dt, int M, int N, const MatX& dW,
                MatX& c) {
  const int m = ip.dim();
  c.resize(m, static_cast<Eigen::Index>(M + 1) * N);
  if (m == 0) return;
  for (int i = 0; i < N; ++i) c.col(i) = ip.init;
  for (int k = 0; k < M; ++k) {
    auto cur = c.middleCols(static_cast<Eigen::Index>(k) * N, N);
    auto nxt = c.middleCols(static_cast<Eigen::Index>(k + 1) * N, N);
    MatX drift = -(ip.rate * cur);
    drift.colwise() += ip.rate * ip.mean;
    nxt = cur + dt * drift + ip.vol * dW.middleCols(static_cast<Eigen::Index>(k) * N, N);
  }
}

}  // namespace

ScenarioLayout make_layout(const MarketParams& p, const CostSpec& costs, int N1,
                           int N2) {
  ScenarioLayout l;
  l.n = p.n;
  l.N1 = N1;
  l.N2 = N2;
  l.M = p.M;
  l.T = p.T;
  l.d0 = p.d0;
  l.d1 = p.d1;
  l.d2 = p.d2;
  l.m0 = costs.info.common.dim();
  l.m1 = costs.info.pop1.dim();
  l.m2 = costs.info.pop2.dim();
  return l;
}

void build_information_paths(PathScenario& path, const ScenarioLayout& l,
                             const CostSpec& costs) {
  const double dt = l.T / l.M;
  euler_info(costs.info.common, dt, l.M, 1, path.dW0, path.c0);
  euler_info(costs.info.pop1, dt, l.M, l.N1, path.dW1, path.c1);
  euler_info(costs.info.pop2, dt, l.M, l.N2, path.dW2, path.c2);
}

ScenarioSet generate(const MarketParams& p, const CostSpec& costs,
                     const InitialLaws& laws, const ScenarioRequest& req) {
  const double cells =
      static_cast<double>(req.paths) * (req.N1 + req.N2) * static_cast<double>(p.M);
  if (cells > req.max_cells)
    throw OutOfMemoryBudget("scenario request of " + std::to_string(cells) +
                            " agent-steps exceeds the cap of " +
                            std::to_string(req.max_cells));
  if (laws.xi.mean.size() != p.n || laws.eta.mean.size() != p.n)
    throw DimensionMismatch("initial law means must have length n");

  ScenarioSet set;
  set.layout = make_layout(p, costs, req.N1, req.N2);
  set.seed = req.seed;
  const auto& l = set.layout;
  const double sqdt = std::sqrt(l.T / l.M);
  const MatX root1 = sqrt_psd(laws.xi.cov), root2 = sqrt_psd(laws.eta.cov);
  set.paths.resize(static_cast<size_t>(req.paths));
  for (int q = 0; q < req.paths; ++q) {
    PathScenario& ps = set.paths[static_cast<size_t>(q)];
    ps.id = req.first_path + static_cast<uint64_t>(q);
    const auto pid = static_cast<uint32_t>(ps.id);
    ps.dW0.setZero(l.d0, l.M);
    ps.dW1.setZero(l.d1, static_cast<Eigen::Index>(l.M) * l.N1);
    ps.dW2.setZero(l.d2, static_cast<Eigen::Index>(l.M) * l.N2);
    ps.xi.resize(l.n, l.N1);
    ps.eta.resize(l.n, l.N2);
    {
      NormalStream s(req.seed, pid, static_cast<uint32_t>(Stream::kCommon), 0);
      std::vector<double> buf(static_cast<size_t>(l.M) * l.d0);
      s.fill(0, buf.data(), buf.size());
      for (int k = 0; k < l.M; ++k)
        for (int r = 0; r < l.d0; ++r) ps.dW0(r, k) = sqdt * buf[k * l.d0 + r];
    }
    for (int i = 0; i < l.N1; ++i) {
      NormalStream s(req.seed, pid, static_cast<uint32_t>(Stream::kCooperative),
                     static_cast<uint32_t>(i));
      draw_agent(s, l.n, l.d1, l.M, sqdt, laws.xi.mean, root1, ps.xi.col(i).data(),
                 ps.dW1, i, l.N1);
    }
    for (int j = 0; j < l.N2; ++j) {
      const Stream tag = req.separate_pop2 ? Stream::kCloudNonCooperative : Stream::kNonCooperative;
      NormalStream s(req.seed, pid, static_cast<uint32_t>(tag), static_cast<uint32_t>(j));
      draw_agent(s, l.n, l.d2, l.M, sqdt, laws.eta.mean, root2, ps.eta.col(j).data(),
                 ps.dW2, j, l.N2);
    }
    build_information_paths(ps, l, costs);
  }
  return set;
}

ScenarioSet generate(const MarketParams& p, const CostSpec& costs,
                     const InitialLaws& laws, int P, uint64_t seed,
                     double max_cells) {
  ScenarioRequest req;
  req.N1 = p.N1;
  req.N2 = p.N2;
  req.seed = seed;
  req.paths = P;
  req.max_cells = max_cells;
  return generate(p, costs, laws, req);
}

ScenarioSet antithetic(const ScenarioSet& set, const CostSpec& costs) {
  ScenarioSet out = set;
  for (auto& ps : out.paths) {
    ps.dW0 = -ps.dW0;
    ps.dW1 = -ps.dW1;
    ps.dW2 = -ps.dW2;
    build_information_paths(ps, out.layout, costs);
  }
  return out;
}

void dump_scenarios(const ScenarioSet& set, const std::string& file) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file);
  const auto& l = set.layout;
  os.write("MFSC", 4);
  detail::put<uint32_t>(os, 1);
  for (int v : {l.n, l.N1, l.N2, l.M, l.d0, l.d1, l.d2, l.m0, l.m1, l.m2})
    detail::put<int32_t>(os, v);
  detail::put<double>(os, l.T);
  detail::put<uint64_t>(os, set.seed);
  detail::put<uint64_t>(os, set.paths.size());
  for (const auto& ps : set.paths) {
    detail::put<uint64_t>(os, ps.id);
    for (const MatX* m : {&ps.dW0, &ps.dW1, &ps.dW2, &ps.xi, &ps.eta, &ps.c0, &ps.c1, &ps.c2})
      detail::put_mat(os, *m);
  }
}

ScenarioSet load_scenarios(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error("cannot open " + file);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "MFSC") throw Error(file + " is not a scenario dump");
  if (detail::get<uint32_t>(is) != 1) throw Error(file + ": unsupported scenario dump version");
  ScenarioSet set;
  auto& l = set.layout;
  for (int* v : {&l.n, &l.N1, &l.N2, &l.M, &l.d0, &l.d1, &l.d2, &l.m0, &l.m1, &l.m2})
    *v = detail::get<int32_t>(is);
  l.T = detail::get<double>(is);
  set.seed = detail::get<uint64_t>(is);
  const auto P = detail::get<uint64_t>(is);
  set.paths.resize(P);
  const Eigen::Index M = l.M;
  for (auto& ps : set.paths) {
    ps.id = detail::get<uint64_t>(is);
    detail::get_mat(is, ps.dW0, l.d0, M);
    detail::get_mat(is, ps.dW1, l.d1, M * l.N1);
    detail::get_mat(is, ps.dW2, l.d2, M * l.N2);
    detail::get_mat(is, ps.xi, l.n, l.N1);
    detail::get_mat(is, ps.eta, l.n, l.N2);
    detail::get_mat(is, ps.c0, l.m0, M + 1);
    detail::get_mat(is, ps.c1, l.m1, (M + 1) * l.N1);
    detail::get_mat(is, ps.c2, l.m2, (M + 1) * l.N2);
  }
  return set;
}

}  // namespace mfclear
