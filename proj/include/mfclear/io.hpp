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

#ifndef MFCLEAR_IO_HPP_
#define MFCLEAR_IO_HPP_

#include <ostream>
#include <string>

#include "mfclear/solver.hpp"

namespace mfclear {

inline constexpr int kCsvSchemaVersion = 1;

// Long format, one value per row:
//   # mfclear-solution schema=1
//   path,t,agent_kind,agent_id,field,value
// agent_kind is cooperative, noncooperative or market. Fields X P beta,
// x y p r alpha, price; vector coordinates get a ".i" suffix when n > 1.
// Only the first `max_paths` paths are written (all when negative).
void write_solution_csv(const EquilibriumSolution& sol, std::ostream& os, int max_paths = -1);

// Wide format: t,path,price_0,...,price_{n-1}
void write_price_csv(const EquilibriumSolution& sol, std::ostream& os, int max_paths = -1,
                     bool header = true);

// Little-endian: "MFSO", u32 version, i32 n N1 N2 M d0 d1 d2 m0 m1 m2, f64 T,
// f64 delta, u32 field mask (bit order X x r P y p beta alpha price), u64 P,
// then per path u64 id and the present fields node by node as row-major f64
// blocks.
void dump_solution(const EquilibriumSolution& sol, const std::string& file, int max_paths = -1);
EquilibriumSolution load_solution(const std::string& file);

}  // namespace mfclear

#endif  // MFCLEAR_IO_HPP_
