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

#include "mfclear/io.hpp"

#include <array>
#include <cstdio>
#include <fstream>

#include "binio.hpp"
#include "mfclear/errors.hpp"

namespace mfclear {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

size_t path_count(const EquilibriumSolution& sol, int max_paths) {
  return max_paths < 0 ? sol.paths.size()
                       : std::min(sol.paths.size(), static_cast<size_t>(max_paths));
}

struct Field {
  const char* kind;
  const char* name;
  std::vector<MatX> PathSolution::*blocks;
};

constexpr std::array<Field, 8> kFields = {{{"cooperative", "X", &PathSolution::X},
                                           {"noncooperative", "x", &PathSolution::x},
                                           {"noncooperative", "r", &PathSolution::r},
                                           {"cooperative", "P", &PathSolution::P},
                                           {"noncooperative", "y", &PathSolution::y},
                                           {"noncooperative", "p", &PathSolution::p},
                                           {"cooperative", "beta", &PathSolution::beta},
                                           {"noncooperative", "alpha", &PathSolution::alpha}}};

}  // namespace

void write_solution_csv(const EquilibriumSolution& sol, std::ostream& os, int max_paths) {
  const ScenarioLayout& l = sol.layout;
  const TimeGrid grid{l.T, l.M};
  const auto coord = [&](const char* name, int i) {
    return l.n == 1 ? std::string(name) : std::string(name) + "." + std::to_string(i);
  };
  os << "# mfclear-solution schema=" << kCsvSchemaVersion << "\n";
  os << "path,t,agent_kind,agent_id,field,value\n";
  for (size_t pi = 0; pi < path_count(sol, max_paths); ++pi) {
    const PathSolution& ps = sol.paths[pi];
    const std::string path = std::to_string(ps.id);
    for (int k = 0; k <= l.M; ++k) {
      const std::string t = num(grid.t(k));
      for (const Field& f : kFields) {
        const std::vector<MatX>& v = ps.*(f.blocks);
        if (static_cast<int>(v.size()) <= k) continue;
        const MatX& b = v[k];
        for (Eigen::Index a = 0; a < b.cols(); ++a)
          for (int i = 0; i < l.n; ++i)
            os << path << ',' << t << ',' << f.kind << ',' << a << ',' << coord(f.name, i) << ','
               << num(b(i, a)) << '\n';
      }
      if (k < static_cast<int>(ps.price.size()))
        for (int i = 0; i < l.n; ++i)
          os << path << ',' << t << ",market,0," << coord("price", i) << ','
             << num(ps.price[k](i)) << '\n';
    }
  }
}

void write_price_csv(const EquilibriumSolution& sol, std::ostream& os, int max_paths, bool header) {
  const ScenarioLayout& l = sol.layout;
  const TimeGrid grid{l.T, l.M};
  if (header) {
    os << "# mfclear-price schema=" << kCsvSchemaVersion << "\n";
    os << "t,path";
    for (int i = 0; i < l.n; ++i) os << ",price_" << i;
    os << '\n';
  }
  for (size_t pi = 0; pi < path_count(sol, max_paths); ++pi) {
    const PathSolution& ps = sol.paths[pi];
    for (size_t k = 0; k < ps.price.size(); ++k) {
      os << num(grid.t(static_cast<int>(k))) << ',' << ps.id;
      for (int i = 0; i < l.n; ++i) os << ',' << num(ps.price[k](i));
      os << '\n';
    }
  }
}

void dump_solution(const EquilibriumSolution& sol, const std::string& file, int max_paths) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file);
  const ScenarioLayout& l = sol.layout;
  const size_t P = path_count(sol, max_paths);
  uint32_t mask = 0;
  if (P > 0) {
    for (size_t f = 0; f < kFields.size(); ++f)
      if (!(sol.paths[0].*(kFields[f].blocks)).empty()) mask |= 1u << f;
    if (!sol.paths[0].price.empty()) mask |= 1u << kFields.size();
  }
  os.write("MFSO", 4);
  detail::put<uint32_t>(os, 1);
  for (int v : {l.n, l.N1, l.N2, l.M, l.d0, l.d1, l.d2, l.m0, l.m1, l.m2})
    detail::put<int32_t>(os, v);
  detail::put<double>(os, l.T);
  detail::put<double>(os, sol.delta);
  detail::put<uint32_t>(os, mask);
  detail::put<uint64_t>(os, P);
  for (size_t pi = 0; pi < P; ++pi) {
    const PathSolution& ps = sol.paths[pi];
    detail::put<uint64_t>(os, ps.id);
    for (size_t f = 0; f < kFields.size(); ++f) {
      if (!(mask & (1u << f))) continue;
      for (const MatX& b : ps.*(kFields[f].blocks)) detail::put_mat(os, b);
    }
    if (mask & (1u << kFields.size()))
      for (const VecX& v : ps.price) detail::put_mat(os, v);
  }
  if (!os) throw Error("write failed for " + file);
}

EquilibriumSolution load_solution(const std::string& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error("cannot open " + file);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::string(magic, 4) != "MFSO") throw Error(file + " is not a solution dump");
  if (detail::get<uint32_t>(is) != 1) throw Error(file + ": unsupported solution dump version");
  EquilibriumSolution sol;
  ScenarioLayout& l = sol.layout;
  for (int* v : {&l.n, &l.N1, &l.N2, &l.M, &l.d0, &l.d1, &l.d2, &l.m0, &l.m1, &l.m2})
    *v = detail::get<int32_t>(is);
  l.T = detail::get<double>(is);
  sol.delta = detail::get<double>(is);
  const auto mask = detail::get<uint32_t>(is);
  sol.paths.resize(detail::get<uint64_t>(is));
  for (PathSolution& ps : sol.paths) {
    ps.id = detail::get<uint64_t>(is);
    for (size_t f = 0; f < kFields.size(); ++f) {
      if (!(mask & (1u << f))) continue;
      const std::string name = kFields[f].name;
      const bool coop = std::string(kFields[f].kind) == "cooperative";
      const int nodes = (name == "beta" || name == "alpha") ? l.M : l.M + 1;
      std::vector<MatX>& v = ps.*(kFields[f].blocks);
      v.resize(nodes);
      for (MatX& b : v) detail::get_mat(is, b, l.n, coop ? l.N1 : l.N2);
    }
    if (mask & (1u << kFields.size())) {
      ps.price.resize(l.M);
      for (VecX& v : ps.price) {
        MatX m;
        detail::get_mat(is, m, l.n, 1);
        v = m.col(0);
      }
    }
  }
  return sol;
}

}  // namespace mfclear
