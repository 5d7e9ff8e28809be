// tests/test-gradcheck.cc

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

// Central-finite-difference checks for each op's backward pass. The loss is
// a fixed random projection of the op output so every output element
// contributes to the gradient.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>
#include <vector>

#include "asc/ops.h"
#include "asc/optim.h"
#include "asc/rng.h"
#include "asc/tensor.h"
#include "doctest.h"

using namespace asc::nn;
using asc::Rng;

namespace {

void FillUniform(const TensorPtr &t, Rng *rng, double lo = -1.0,
                 double hi = 1.0) {
  for (int64_t i = 0; i < t->size(); ++i) t->data()[i] = rng->Uniform(lo, hi);
}

std::vector<double> RandomWeights(int64_t n, Rng *rng) {
  std::vector<double> w(static_cast<size_t>(n));
  for (auto &x : w) x = rng->Uniform(-1.0, 1.0);
  return w;
}

// Checks d(loss)/d(each param in store) via FiniteDiffCheck.
void ExpectGradsMatch(const std::function<TensorPtr()> &loss_builder,
                      ParamStore &params, double tol = 1e-6) {
  FdOptions opts;
  opts.tolerance = tol;
  opts.max_coords_per_slot = 1000;  // small tensors: check everything
  auto report = FiniteDiffCheck(loss_builder, params, opts);
  for (const auto &slot : report.slots) {
    INFO("slot ", slot.name, " rel err ", slot.max_rel_err, " analytic ",
         slot.analytic, " numeric ", slot.numeric);
    CHECK(slot.passed);
  }
}

}  // namespace

TEST_CASE("gradcheck: conv2d input and kernel") {
  Rng rng(21);
  ParamStore params;
  auto x = params.Create("x", {2, 2, 5, 6});
  auto w = params.Create("w", {3, 2, 3, 3});
  FillUniform(x, &rng);
  FillUniform(w, &rng);
  for (int stride : {1, 2}) {
    auto weights = RandomWeights(
        static_cast<int64_t>(2) * 3 * ((5 + 2 - 3) / stride + 1) *
            ((6 + 2 - 3) / stride + 1),
        &rng);
    ExpectGradsMatch(
        [&]() {
          return WeightedSum(Conv2d(x, w, stride, stride, 1, 1), weights);
        },
        params);
  }
}

TEST_CASE("gradcheck: batchnorm train mode on 2x3x4x4 input") {
  Rng rng(22);
  ParamStore params;
  auto x = params.Create("x", {2, 3, 4, 4});
  auto gamma = params.Create("gamma", {3});
  auto beta = params.Create("beta", {3});
  FillUniform(x, &rng, -2.0, 2.0);
  FillUniform(gamma, &rng, 0.5, 1.5);
  FillUniform(beta, &rng, -0.5, 0.5);
  auto rm = Tensor::New({3});
  auto rv = Tensor::FromData({3}, {1, 1, 1});
  auto weights = RandomWeights(2 * 3 * 4 * 4, &rng);
  ExpectGradsMatch(
      [&]() {
        return WeightedSum(BatchNorm2d(x, gamma, beta, rm, rv, 0.1, 1e-5,
                                       /*train=*/true,
                                       /*update_running=*/false),
                           weights);
      },
      params, 1e-4);
}

TEST_CASE("gradcheck: batchnorm eval mode") {
  Rng rng(23);
  ParamStore params;
  auto x = params.Create("x", {2, 2, 3, 3});
  auto gamma = params.Create("gamma", {2});
  auto beta = params.Create("beta", {2});
  FillUniform(x, &rng);
  FillUniform(gamma, &rng, 0.5, 1.5);
  FillUniform(beta, &rng, -0.5, 0.5);
  auto rm = Tensor::FromData({2}, {0.2, -0.1});
  auto rv = Tensor::FromData({2}, {1.3, 0.8});
  auto weights = RandomWeights(2 * 2 * 3 * 3, &rng);
  ExpectGradsMatch(
      [&]() {
        return WeightedSum(BatchNorm2d(x, gamma, beta, rm, rv, 0.1, 1e-5,
                                       /*train=*/false,
                                       /*update_running=*/false),
                           weights);
      },
      params);
}

TEST_CASE("gradcheck: lstm through a 3-step sequence, hidden 4") {
  Rng rng(24);
  const int hidden = 4;
  ParamStore params;
  auto x = params.Create("x", {2, 3, 3});
  auto wx = params.Create("wx", {3, 4 * hidden});
  auto wh = params.Create("wh", {hidden, 4 * hidden});
  auto b = params.Create("b", {4 * hidden});
  FillUniform(x, &rng);
  FillUniform(wx, &rng, -0.5, 0.5);
  FillUniform(wh, &rng, -0.5, 0.5);
  FillUniform(b, &rng, -0.2, 0.2);
  auto weights = RandomWeights(2 * 3 * hidden, &rng);
  for (bool reverse : {false, true}) {
    ExpectGradsMatch(
        [&]() { return WeightedSum(Lstm(x, wx, wh, b, reverse), weights); },
        params, 1e-4);
  }
}

TEST_CASE("gradcheck: bilstm concat of both directions") {
  Rng rng(25);
  const int hidden = 3;
  ParamStore params;
  auto x = params.Create("x", {1, 4, 2});
  auto wx_f = params.Create("wx_f", {2, 4 * hidden});
  auto wh_f = params.Create("wh_f", {hidden, 4 * hidden});
  auto b_f = params.Create("b_f", {4 * hidden});
  auto wx_b = params.Create("wx_b", {2, 4 * hidden});
  auto wh_b = params.Create("wh_b", {hidden, 4 * hidden});
  auto b_b = params.Create("b_b", {4 * hidden});
  for (auto &[name, t] : params.slots()) FillUniform(t, &rng, -0.5, 0.5);
  auto weights = RandomWeights(1 * 4 * 2 * hidden, &rng);
  ExpectGradsMatch(
      [&]() {
        auto fw = Lstm(x, wx_f, wh_f, b_f, false);
        auto bw = Lstm(x, wx_b, wh_b, b_b, true);
        return WeightedSum(ConcatLast({fw, bw}), weights);
      },
      params, 1e-4);
}

TEST_CASE("gradcheck: linear + relu + cross entropy") {
  Rng rng(26);
  ParamStore params;
  auto x = params.Create("x", {3, 5});
  auto w1 = params.Create("w1", {5, 4});
  auto b1 = params.Create("b1", {4});
  auto w2 = params.Create("w2", {4, 3});
  auto b2 = params.Create("b2", {3});
  for (auto &[name, t] : params.slots()) FillUniform(t, &rng);
  const std::vector<int> labels{0, 2, 1};
  ExpectGradsMatch(
      [&]() {
        auto h = Relu(Linear(x, w1, b1));
        return SoftmaxCrossEntropy(Linear(h, w2, b2), labels);
      },
      params, 1e-4);
}

TEST_CASE("gradcheck: attention pooling path (softmax/bmm/transpose)") {
  Rng rng(27);
  const int batch = 2, steps = 5, p = 3, heads = 2;
  ParamStore params;
  auto h = params.Create("h", {batch, steps, p});
  auto v = params.Create("v", {heads, p});
  FillUniform(h, &rng);
  FillUniform(v, &rng);
  auto weights = RandomWeights(batch * heads * p, &rng);
  const double sigma = 0.2;
  ExpectGradsMatch(
      [&]() {
        auto h2d = Reshape(h, {batch * steps, p});
        auto logits =
            Reshape(MatMul(h2d, v, /*trans_b=*/true), {batch, steps, heads});
        auto scores = Softmax(Transpose12(logits), sigma);
        auto summaries = Bmm(scores, h);
        return WeightedSum(Reshape(summaries, {batch, heads * p}), weights);
      },
      params, 1e-4);
}

TEST_CASE("gradcheck: maxpool, flatten, time max, scale") {
  Rng rng(28);
  ParamStore params;
  auto x = params.Create("x", {2, 3, 4, 6});
  FillUniform(x, &rng);
  auto w_pool = RandomWeights(2 * 3 * 2 * 3, &rng);
  ExpectGradsMatch(
      [&]() { return WeightedSum(MaxPool2d(x, 2, 2, 2, 2), w_pool); }, params);
  auto w_flat = RandomWeights(2 * 6 * 12, &rng);
  ExpectGradsMatch([&]() { return WeightedSum(FlattenFreqTime(x), w_flat); },
                   params);
  auto w_scale = RandomWeights(x->size(), &rng);
  ExpectGradsMatch([&]() { return WeightedSum(Scale(x, -2.5), w_scale); },
                   params);

  ParamStore params3;
  auto y = params3.Create("y", {2, 4, 3});
  FillUniform(y, &rng);
  auto w_max = RandomWeights(2 * 3, &rng);
  ExpectGradsMatch([&]() { return WeightedSum(TimeMax(y), w_max); }, params3);
}

TEST_CASE("gradcheck: quadratic loss has gradient 2*theta") {
  Rng rng(29);
  ParamStore params;
  auto theta = params.Create("theta", {6});
  FillUniform(theta, &rng, -2.0, 2.0);
  FdOptions opts;
  opts.tolerance = 1e-8;
  opts.max_coords_per_slot = 6;
  auto report = FiniteDiffCheck(
      [&]() {
        auto sq = Mul(theta, theta);
        return WeightedSum(sq, std::vector<double>(6, 1.0));
      },
      params, opts);
  CHECK(report.all_passed);
  CHECK(report.worst_rel_err < 1e-8);
}

TEST_CASE("gradcheck: corrupt-slot hook makes the check fail") {
  Rng rng(30);
  ParamStore params;
  auto theta = params.Create("theta", {3});
  FillUniform(theta, &rng, 0.5, 1.5);
  FdOptions opts;
  opts.corrupt_slot = "theta";
  auto report = FiniteDiffCheck(
      [&]() {
        auto sq = Mul(theta, theta);
        return WeightedSum(sq, std::vector<double>(3, 1.0));
      },
      params, opts);
  CHECK_FALSE(report.all_passed);
}

TEST_CASE("backward accumulates through shared subexpressions") {
  // loss = sum(x * x) via two separate uses of x -> d/dx = 2x.
  auto x = Tensor::FromData({3}, {1.0, -2.0, 0.5}, true);
  auto loss = WeightedSum(Mul(x, x), {1.0, 1.0, 1.0});
  Backward(loss);
  CHECK(x->grad_values()[0] == doctest::Approx(2.0));
  CHECK(x->grad_values()[1] == doctest::Approx(-4.0));
  CHECK(x->grad_values()[2] == doctest::Approx(1.0));
}
