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

#ifndef MFCLEAR_TESTS_COMMON_HPP_
#define MFCLEAR_TESTS_COMMON_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mfclear/config.hpp"
#include "mfclear/hamiltonian.hpp"

namespace mfclear::testing {

inline std::string config_path(const std::string& name) {
  return std::string(MFCLEAR_SOURCE_DIR) + "/configs/" + name;
}

inline std::string read_text(const std::string& file) {
  std::ifstream in(file);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void replace_once(std::string& s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  if (at == std::string::npos) throw std::runtime_error("pattern not found: " + from);
  s.replace(at, from.size(), to);
}

// Reference market with the given population sizes and grid.
inline Config small_reference(int N1, int N2, int M) {
  std::string text = read_text(config_path("reference.yaml"));
  replace_once(text, "N1: 16", "N1: " + std::to_string(N1));
  replace_once(text, "N2: 256", "N2: " + std::to_string(N2));
  replace_once(text, "M: 32", "M: " + std::to_string(M));
  return parse_config(text);
}

// Two securities with a non-diagonal price impact and a box on trading.
inline Config two_asset_config(bool boxed) {
  std::string text = read_text(config_path("reference.yaml"));
  replace_once(text, "n: 1", "n: 2");
  replace_once(text, "Lambda: 1.0", "Lambda: [[1.0, 0.3], [0.3, 0.8]]");
  replace_once(text, "q_x: 1.0", "q_x: [[1.2, 0.1], [0.1, 0.9]]");
  replace_once(text, "c_f: 1.0", "c_f: [[1.0, -0.2], [-0.2, 1.4]]");
  replace_once(text, "phi_target: 0.2", "phi_target: [0.2, -0.1]");
  if (boxed)
    replace_once(text, "include_trade_cost: true",
                 "include_trade_cost: true\n  box: {lo: [-0.3, -0.2], hi: [0.3, 0.25]}");
  return parse_config(text);
}

struct RandomPoint {
  AgentStateBlock<double> u;
  MatX beta;
  AffineSlice<double> a;
};

inline MatX gaussian(std::mt19937_64& gen, int rows, int cols, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  MatX m(rows, cols);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = nd(gen);
  return m;
}

inline RandomPoint random_point(std::mt19937_64& gen, int n, int N1, int N2) {
  RandomPoint pt;
  pt.u.X = gaussian(gen, n, N1);
  pt.u.P = gaussian(gen, n, N1);
  pt.u.x = gaussian(gen, n, N2);
  pt.u.y = gaussian(gen, n, N2);
  pt.u.p = gaussian(gen, n, N2);
  pt.u.r = gaussian(gen, n, N2);
  pt.beta = gaussian(gen, n, N1);
  pt.a.l1 = gaussian(gen, n, N1, 0.3);
  pt.a.a1 = gaussian(gen, n, N1, 0.3);
  pt.a.l2 = gaussian(gen, n, N2, 0.3);
  pt.a.h_f = gaussian(gen, n, N2, 0.3);
  return pt;
}

// Central differences of `H` in every entry of one block, scaled by `weight`.
template <class Energy>
MatX differences(const Energy& H, RandomPoint pt, MatX* (*block)(RandomPoint&), double weight) {
  MatX& m = *block(pt);
  MatX out(m.rows(), m.cols());
  const double h = 1e-5;
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double keep = m(i, j);
      m(i, j) = keep + h;
      const double up = H(pt);
      m(i, j) = keep - h;
      const double down = H(pt);
      m(i, j) = keep;
      out(i, j) = weight * (up - down) / (2 * h);
    }
  return out;
}

// Worst relative max-norm error between the analytic gradient and central
// differences over `points` random states of random sizes. The finite form
// uses delta = N1 / N2; on a cloud delta is free and atom gradients carry the
// inverse atom weight.
inline double worst_gradient_error(bool lifted, int points, uint64_t seed) {
  const Config cfg = two_asset_config(false);
  std::mt19937_64 gen(seed);
  std::uniform_int_distribution<int> size(1, 6);
  std::uniform_real_distribution<double> ratio(0.05, 1.0);
  double worst = 0.0;
  const auto add = [&](const MatX& exact, const MatX& approx) {
    const double scale = std::max(1e-12, exact.cwiseAbs().maxCoeff());
    worst = std::max(worst, (exact - approx).cwiseAbs().maxCoeff() / scale);
  };
  for (int trial = 0; trial < points; ++trial) {
    const int N1 = size(gen), N2 = size(gen) + 1;
    const double delta = lifted ? ratio(gen) : static_cast<double>(N1) / N2;
    const auto k = HamiltonianCoefficients<double>::make(cfg.market, cfg.costs, delta);
    const RandomPoint pt = random_point(gen, cfg.market.n, N1, N2);
    const auto H = [&](const RandomPoint& q) {
      return lifted ? lifted_hamiltonian(q.u, q.beta, q.a, k) : hamiltonian(q.u, q.beta, q.a, k);
    };
    const HamiltonianGradient<double> g = lifted ? grad_lifted_H(pt.u, pt.beta, pt.a, k)
                                                 : grad_H_finite(pt.u, pt.beta, pt.a, k);
    const double w1 = lifted ? N1 : 1.0, w2 = lifted ? N2 : 1.0;
    add(g.beta, differences(H, pt, [](RandomPoint& q) { return &q.beta; }, w1));
    add(g.X, differences(H, pt, [](RandomPoint& q) { return &q.u.X; }, w1));
    add(g.x, differences(H, pt, [](RandomPoint& q) { return &q.u.x; }, w2));
    add(g.y, differences(H, pt, [](RandomPoint& q) { return &q.u.y; }, w2));
  }
  return worst;
}

}  // namespace mfclear::testing

#endif  // MFCLEAR_TESTS_COMMON_HPP_
