// tests/test-kernels.cc

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <omp.h>

#include <cmath>
#include <vector>

#include "asc/kernels.h"
#include "asc/rng.h"
#include "doctest.h"

using asc::Rng;
namespace kernels = asc::kernels;

namespace {

std::vector<double> RandomVec(size_t n, Rng *rng) {
  std::vector<double> v(n);
  for (auto &x : v) x = rng->Uniform(-1.0, 1.0);
  return v;
}

double MaxRelDiff(const std::vector<double> &a, const std::vector<double> &b) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::fabs(a[i]), std::fabs(b[i]), 1e-12});
    worst = std::max(worst, std::fabs(a[i] - b[i]) / denom);
  }
  return worst;
}

struct BackendGuard {
  kernels::Backend prev;
  explicit BackendGuard(kernels::Backend b) : prev(kernels::GetBackend()) {
    kernels::SetBackend(b);
  }
  ~BackendGuard() { kernels::SetBackend(prev); }
};

}  // namespace

TEST_CASE("matmul agrees across backends and transpose modes") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + static_cast<int>(rng.UniformInt(12));
    const int n = 1 + static_cast<int>(rng.UniformInt(12));
    const int k = 1 + static_cast<int>(rng.UniformInt(12));
    for (int mode = 0; mode < 4; ++mode) {
      const bool ta = mode & 1, tb = mode & 2;
      auto a = RandomVec(static_cast<size_t>(m) * k, &rng);
      auto b = RandomVec(static_cast<size_t>(k) * n, &rng);
      std::vector<double> c_ref(static_cast<size_t>(m) * n, 0.5);
      std::vector<double> c_omp(static_cast<size_t>(m) * n, 0.5);
      const bool accumulate = trial % 2 == 0;
      {
        BackendGuard g(kernels::Backend::kSerial);
        kernels::MatMul(m, n, k, a.data(), ta, b.data(), tb, c_ref.data(),
                        accumulate);
      }
      {
        BackendGuard g(kernels::Backend::kOpenMP);
        kernels::MatMul(m, n, k, a.data(), ta, b.data(), tb, c_omp.data(),
                        accumulate);
      }
      CHECK(MaxRelDiff(c_ref, c_omp) < 1e-12);
    }
  }
}

TEST_CASE("matmul known value") {
  // [[1,2],[3,4]] @ [[5,6],[7,8]] = [[19,22],[43,50]]
  std::vector<double> a{1, 2, 3, 4}, b{5, 6, 7, 8}, c(4, 0.0);
  kernels::MatMul(2, 2, 2, a.data(), false, b.data(), false, c.data(), false);
  CHECK(c[0] == doctest::Approx(19));
  CHECK(c[1] == doctest::Approx(22));
  CHECK(c[2] == doctest::Approx(43));
  CHECK(c[3] == doctest::Approx(50));
}

TEST_CASE("conv2d kernels agree across backends") {
  Rng rng(12);
  for (int trial = 0; trial < 12; ++trial) {
    kernels::ConvShape s;
    s.batch = 1 + static_cast<int>(rng.UniformInt(3));
    s.in_ch = 1 + static_cast<int>(rng.UniformInt(4));
    s.out_ch = 1 + static_cast<int>(rng.UniformInt(4));
    s.k_h = 1 + static_cast<int>(rng.UniformInt(3));
    s.k_w = 1 + static_cast<int>(rng.UniformInt(3));
    s.pad_h = static_cast<int>(rng.UniformInt(2));
    s.pad_w = static_cast<int>(rng.UniformInt(2));
    s.stride_h = 1 + static_cast<int>(rng.UniformInt(2));
    s.stride_w = 1 + static_cast<int>(rng.UniformInt(2));
    s.in_h = s.k_h + static_cast<int>(rng.UniformInt(8));
    s.in_w = s.k_w + static_cast<int>(rng.UniformInt(8));
    const size_t in_n = static_cast<size_t>(s.batch) * s.in_ch * s.in_h * s.in_w;
    const size_t w_n = static_cast<size_t>(s.out_ch) * s.in_ch * s.k_h * s.k_w;
    const size_t out_n =
        static_cast<size_t>(s.batch) * s.out_ch * s.OutH() * s.OutW();
    auto in = RandomVec(in_n, &rng);
    auto w = RandomVec(w_n, &rng);
    auto gout = RandomVec(out_n, &rng);

    std::vector<double> out_ref(out_n), out_omp(out_n);
    std::vector<double> gin_ref(in_n, 0.0), gin_omp(in_n, 0.0);
    std::vector<double> gw_ref(w_n, 0.0), gw_omp(w_n, 0.0);
    {
      BackendGuard g(kernels::Backend::kSerial);
      kernels::Conv2dForward(s, in.data(), w.data(), out_ref.data());
      kernels::Conv2dBackwardInput(s, gout.data(), w.data(), gin_ref.data());
      kernels::Conv2dBackwardWeight(s, gout.data(), in.data(), gw_ref.data());
    }
    {
      BackendGuard g(kernels::Backend::kOpenMP);
      kernels::Conv2dForward(s, in.data(), w.data(), out_omp.data());
      kernels::Conv2dBackwardInput(s, gout.data(), w.data(), gin_omp.data());
      kernels::Conv2dBackwardWeight(s, gout.data(), in.data(), gw_omp.data());
    }
    CHECK(MaxRelDiff(out_ref, out_omp) < 1e-12);
    CHECK(MaxRelDiff(gin_ref, gin_omp) < 1e-12);
    CHECK(MaxRelDiff(gw_ref, gw_omp) < 1e-12);
  }
}

TEST_CASE("openmp backend is invariant to thread count (bitwise)") {
  Rng rng(13);
  kernels::ConvShape s;
  s.batch = 2;
  s.in_ch = 3;
  s.out_ch = 5;
  s.in_h = 17;
  s.in_w = 23;
  s.k_h = 3;
  s.k_w = 3;
  s.pad_h = 1;
  s.pad_w = 1;
  const size_t in_n = static_cast<size_t>(s.batch) * s.in_ch * s.in_h * s.in_w;
  const size_t w_n = static_cast<size_t>(s.out_ch) * s.in_ch * 9;
  const size_t out_n =
      static_cast<size_t>(s.batch) * s.out_ch * s.OutH() * s.OutW();
  auto in = RandomVec(in_n, &rng);
  auto w = RandomVec(w_n, &rng);

  BackendGuard g(kernels::Backend::kOpenMP);
  const int prev = omp_get_max_threads();
  std::vector<std::vector<double>> results;
  for (int threads : {1, 2, 4}) {
    omp_set_num_threads(threads);
    std::vector<double> out(out_n);
    kernels::Conv2dForward(s, in.data(), w.data(), out.data());
    results.push_back(std::move(out));
  }
  omp_set_num_threads(prev);
  CHECK(results[0] == results[1]);
  CHECK(results[0] == results[2]);
}

TEST_CASE("kernels are deterministic run to run (bitwise)") {
  Rng rng(14);
  const int m = 9, n = 11, k = 7;
  auto a = RandomVec(static_cast<size_t>(m) * k, &rng);
  auto b = RandomVec(static_cast<size_t>(k) * n, &rng);
  std::vector<double> c1(static_cast<size_t>(m) * n), c2(c1.size());
  kernels::MatMul(m, n, k, a.data(), false, b.data(), false, c1.data(), false);
  kernels::MatMul(m, n, k, a.data(), false, b.data(), false, c2.data(), false);
  CHECK(c1 == c2);
}

TEST_CASE("maxpool kernels agree and tie-break to first index") {
  Rng rng(15);
  kernels::PoolShape s;
  s.batch = 2;
  s.ch = 3;
  s.in_h = 8;
  s.in_w = 10;
  s.win_h = 2;
  s.win_w = 2;
  s.stride_h = 2;
  s.stride_w = 2;
  const size_t in_n = static_cast<size_t>(s.batch) * s.ch * s.in_h * s.in_w;
  const size_t out_n =
      static_cast<size_t>(s.batch) * s.ch * s.OutH() * s.OutW();

  // All-equal input: every argmax must be the window's first scan index.
  std::vector<double> flat(in_n, 3.25);
  std::vector<double> out(out_n);
  std::vector<int32_t> argmax(out_n);
  kernels::MaxPool2dForward(s, flat.data(), out.data(), argmax.data());
  for (int oy = 0; oy < s.OutH(); ++oy) {
    for (int ox = 0; ox < s.OutW(); ++ox) {
      CHECK(argmax[static_cast<size_t>(oy) * s.OutW() + ox] ==
            oy * 2 * s.in_w + ox * 2);
    }
  }

  auto in = RandomVec(in_n, &rng);
  auto gout = RandomVec(out_n, &rng);
  std::vector<double> out_ref(out_n), out_omp(out_n);
  std::vector<int32_t> arg_ref(out_n), arg_omp(out_n);
  std::vector<double> gin_ref(in_n, 0.0), gin_omp(in_n, 0.0);
  {
    BackendGuard g(kernels::Backend::kSerial);
    kernels::MaxPool2dForward(s, in.data(), out_ref.data(), arg_ref.data());
    kernels::MaxPool2dBackward(s, gout.data(), arg_ref.data(), gin_ref.data());
  }
  {
    BackendGuard g(kernels::Backend::kOpenMP);
    kernels::MaxPool2dForward(s, in.data(), out_omp.data(), arg_omp.data());
    kernels::MaxPool2dBackward(s, gout.data(), arg_omp.data(), gin_omp.data());
  }
  CHECK(out_ref == out_omp);
  CHECK(arg_ref == arg_omp);
  CHECK(gin_ref == gin_omp);
}

TEST_CASE("pool output dims floor-divide (625 -> 312)") {
  kernels::PoolShape s;
  s.in_h = 32;
  s.in_w = 625;
  s.win_h = 2;
  s.win_w = 2;
  s.stride_h = 2;
  s.stride_w = 2;
  CHECK(s.OutW() == 312);
  CHECK(s.OutH() == 16);
}
