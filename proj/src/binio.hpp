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

#ifndef MFCLEAR_SRC_BINIO_HPP_
#define MFCLEAR_SRC_BINIO_HPP_

#include <bit>
#include <fstream>
#include <string>

#include "mfclear/errors.hpp"
#include "mfclear/types.hpp"

namespace mfclear::detail {

static_assert(std::endian::native == std::endian::little,
              "binary dumps assume a little-endian host");

template <class T>
void put(std::ofstream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::ifstream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw Error("binary file truncated");
  return v;
}

// row-major f64
inline void put_mat(std::ofstream& os, const MatX& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) put<double>(os, m(r, c));
}

inline void get_mat(std::ifstream& is, MatX& m, Eigen::Index rows, Eigen::Index cols) {
  m.resize(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = get<double>(is);
}

}  // namespace mfclear::detail

#endif  // MFCLEAR_SRC_BINIO_HPP_
