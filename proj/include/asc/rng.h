// asc/rng.h

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef ASC_RNG_H_
#define ASC_RNG_H_

#include <array>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace asc {

// xoshiro256** seeded through splitmix64. Self-contained so that streams are
// identical across platforms and standard libraries, and the 4-word state
// serializes directly into checkpoints.
class Rng {
 public:
  explicit Rng(uint64_t seed) { Seed(seed); }

  void Seed(uint64_t seed) {
    uint64_t x = seed;
    for (auto &word : state_) word = SplitMix64(&x);
  }

  uint64_t NextU64() {
    const uint64_t result = Rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = Rotl(state_[3], 45);
    return result;
  }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer on [0, n). Fixed-point multiply keeps the mapping
  // platform-independent; the modulo bias at n << 2^64 is immaterial here.
  int64_t UniformInt(int64_t n) {
    return static_cast<int64_t>(
        (static_cast<__uint128_t>(NextU64()) * static_cast<uint64_t>(n)) >> 64);
  }

  // Standard normal via Box-Muller. No cached second value, so the state is
  // exactly the 4 words above.
  double Gauss() {
    double u1 = Uniform();
    while (u1 <= 0.0) u1 = Uniform();
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Fisher-Yates with this stream; std::shuffle is implementation-defined.
  template <typename T>
  void Shuffle(std::vector<T> *v) {
    for (int64_t i = static_cast<int64_t>(v->size()) - 1; i > 0; --i) {
      const int64_t j = UniformInt(i + 1);
      std::swap((*v)[i], (*v)[j]);
    }
  }

  std::array<uint64_t, 4> State() const { return state_; }
  void SetState(const std::array<uint64_t, 4> &s) { state_ = s; }

  // Decorrelated child stream, e.g. one per clip during corpus synthesis.
  static Rng ForStream(uint64_t seed, uint64_t stream) {
    uint64_t x = seed;
    const uint64_t a = SplitMix64(&x);
    x = stream + 0x9e3779b97f4a7c15ULL;
    const uint64_t b = SplitMix64(&x);
    return Rng(a ^ (b + 0x632be59bd9b4e019ULL));
  }

 private:
  static uint64_t Rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  static uint64_t SplitMix64(uint64_t *x) {
    uint64_t z = (*x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::array<uint64_t, 4> state_;
};

}  // namespace asc

#endif  // ASC_RNG_H_
