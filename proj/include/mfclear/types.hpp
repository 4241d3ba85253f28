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

#ifndef MFCLEAR_TYPES_HPP_
#define MFCLEAR_TYPES_HPP_

#include <Eigen/Dense>

namespace mfclear {

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatX = Mat<double>;
using VecX = Vec<double>;

// Column mean of an n x N block.
template <class Derived>
Vec<typename Derived::Scalar> col_mean(const Eigen::MatrixBase<Derived>& m) {
  return m.rowwise().mean();
}

}  // namespace mfclear

#endif  // MFCLEAR_TYPES_HPP_
