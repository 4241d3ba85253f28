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

#ifndef MFCLEAR_RNG_HPP_
#define MFCLEAR_RNG_HPP_

#include <array>
#include <cmath>
#include <cstdint>

namespace mfclear {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
struct Philox4x32 {
  using Counter = std::array<uint32_t, 4>;
  using Key = std::array<uint32_t, 2>;

  static Counter apply(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const uint64_t p0 = static_cast<uint64_t>(0xD2511F53u) * ctr[0];
      const uint64_t p1 = static_cast<uint64_t>(0xCD9E8D57u) * ctr[2];
      const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
      const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }
};

// Standard normals for one (seed, path, stream, agent) tuple, addressable by
// draw index. Two normals per Philox block via Box-Muller on 53-bit uniforms.
class NormalStream {
 public:
  NormalStream(uint64_t seed, uint32_t path, uint32_t stream, uint32_t agent)
      : key_{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)},
        path_(path),
        stream_(stream),
        agent_(agent) {}

  double operator()(uint64_t index) const {
    const auto pair = block(index >> 1);
    return pair[index & 1];
  }

  // Writes normals [first, first + count) to out.
  void fill(uint64_t first, double* out, uint64_t count) const {
    std::array<double, 2> pair{};
    for (uint64_t i = first; i < first + count; ++i) {
      if (i == first || (i & 1) == 0) pair = block(i >> 1);
      out[i - first] = pair[i & 1];
    }
  }

 private:
  std::array<double, 2> block(uint64_t b) const {
    const auto r = Philox4x32::apply(
        {static_cast<uint32_t>(b), agent_, stream_, path_},
        key_);
    const uint64_t a = ((static_cast<uint64_t>(r[0]) << 32) | r[1]) >> 11;
    const uint64_t c = ((static_cast<uint64_t>(r[2]) << 32) | r[3]) >> 11;
    const double u1 = (static_cast<double>(a) + 0.5) * 0x1.0p-53;
    const double u2 = static_cast<double>(c) * 0x1.0p-53;
    const double rad = std::sqrt(-2.0 * std::log(u1));
    const double ang = 6.283185307179586476925 * u2;
    return {rad * std::cos(ang), rad * std::sin(ang)};
  }

  Philox4x32::Key key_;
  uint32_t path_;
  uint32_t stream_;
  uint32_t agent_;
};

}  // namespace mfclear

#endif  // MFCLEAR_RNG_HPP_
