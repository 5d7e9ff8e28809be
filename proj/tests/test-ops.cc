// tests/test-ops.cc

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
#include <cmath>
#include <vector>

#include "asc/ops.h"
#include "asc/optim.h"
#include "asc/rng.h"
#include "asc/tensor.h"
#include "doctest.h"

using namespace asc::nn;
using asc::Rng;

TEST_CASE("conv2d: 4x4 ones with 3x3 ones kernel, zero padding") {
  auto x = Tensor::FromData({1, 1, 4, 4}, std::vector<double>(16, 1.0));
  auto w = Tensor::FromData({1, 1, 3, 3}, std::vector<double>(9, 1.0));
  auto y = Conv2d(x, w, 1, 1, 1, 1);
  CHECK(y->shape() == Shape{1, 1, 4, 4});
  // Corners see a 2x2 region, interior a full 3x3.
  CHECK(y->data()[0] == doctest::Approx(4.0));
  CHECK(y->data()[3] == doctest::Approx(4.0));
  CHECK(y->data()[5] == doctest::Approx(9.0));
  CHECK(y->data()[6] == doctest::Approx(9.0));
  CHECK(y->data()[15] == doctest::Approx(4.0));
}

TEST_CASE("conv2d: 1x1 identity kernel") {
  Rng rng(3);
  std::vector<double> vals(2 * 3 * 5 * 7);
  for (auto &v : vals) v = rng.Uniform(-1, 1);
  auto x = Tensor::FromData({2, 3, 5, 7}, vals);
  auto w = Tensor::New({3, 3, 1, 1});
  for (int co = 0; co < 3; ++co) w->data()[co * 3 + co] = 1.0;
  auto y = Conv2d(x, w, 1, 1, 0, 0);
  CHECK(y->values() == x->values());
}

TEST_CASE("conv2d: shape mismatch names both shapes") {
  auto x = Tensor::New({1, 2, 4, 4});
  auto w = Tensor::New({1, 3, 3, 3});
  CHECK_THROWS_WITH_AS(Conv2d(x, w, 1, 1, 1, 1),
                       doctest::Contains("(1,2,4,4)"), asc::DimensionError);
}

TEST_CASE("maxpool2d: 2x2 block reduces to max; window too large throws") {
  auto x = Tensor::FromData({1, 1, 2, 2}, {1, 2, 3, 4});
  auto y = MaxPool2d(x, 2, 2, 2, 2);
  CHECK(y->shape() == Shape{1, 1, 1, 1});
  CHECK(y->data()[0] == doctest::Approx(4.0));
  CHECK_THROWS_AS(MaxPool2d(x, 3, 3, 1, 1), asc::DimensionError);
}

TEST_CASE("maxpool2d gradient goes to first element of all-equal windows") {
  auto x = Tensor::FromData({1, 1, 4, 4}, std::vector<double>(16, 2.0), true);
  auto y = MaxPool2d(x, 2, 2, 2, 2);
  auto loss = WeightedSum(y, {1.0, 1.0, 1.0, 1.0});
  Backward(loss);
  // First scan-order element of each 2x2 window gets the whole gradient.
  const std::vector<double> want{1, 0, 1, 0, 0, 0, 0, 0,
                                 1, 0, 1, 0, 0, 0, 0, 0};
  CHECK(x->grad_values() == want);
}

TEST_CASE("batchnorm: train mode normalizes each channel") {
  Rng rng(4);
  std::vector<double> vals(2 * 3 * 4 * 4);
  for (auto &v : vals) v = rng.Uniform(-3, 5);
  auto x = Tensor::FromData({2, 3, 4, 4}, vals);
  auto gamma = Tensor::FromData({3}, {1, 1, 1});
  auto beta = Tensor::FromData({3}, {0, 0, 0});
  auto rm = Tensor::New({3});
  auto rv = Tensor::FromData({3}, {1, 1, 1});
  auto y = BatchNorm2d(x, gamma, beta, rm, rv, 0.1, 1e-5, true, true);
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0, sumsq = 0.0;
    int n = 0;
    for (int b = 0; b < 2; ++b) {
      for (int i = 0; i < 16; ++i) {
        const double v = y->data()[(b * 3 + c) * 16 + i];
        sum += v;
        sumsq += v * v;
        ++n;
      }
    }
    CHECK(std::fabs(sum / n) < 1e-5);
    CHECK(sumsq / n == doctest::Approx(1.0).epsilon(1e-3));
  }
}

TEST_CASE("batchnorm: eval with fresh running stats divides by sqrt(1+eps)") {
  auto x = Tensor::FromData({1, 1, 1, 4}, {1.0, -2.0, 0.5, 3.0});
  auto gamma = Tensor::FromData({1}, {1.0});
  auto beta = Tensor::FromData({1}, {0.0});
  auto rm = Tensor::New({1});
  auto rv = Tensor::FromData({1}, {1.0});
  const double eps = 1e-5;
  auto y = BatchNorm2d(x, gamma, beta, rm, rv, 0.1, eps, false, false);
  for (int i = 0; i < 4; ++i) {
    CHECK(y->data()[i] ==
          doctest::Approx(x->data()[i] / std::sqrt(1.0 + eps)));
  }
}

TEST_CASE("softmax: uniform on equal logits, any temperature") {
  auto x = Tensor::FromData({4}, {0.7, 0.7, 0.7, 0.7});
  for (double temp : {1.0, 0.2, 5.0}) {
    auto y = Softmax(x, temp);
    for (int i = 0; i < 4; ++i) {
      CHECK(y->data()[i] == doctest::Approx(0.25).epsilon(1e-12));
    }
  }
}

TEST_CASE("softmax: hand values at temperature 1 and 0.2") {
  auto x = Tensor::FromData({2}, {1.0, 0.0});
  auto y1 = Softmax(x, 1.0);
  CHECK(y1->data()[0] == doctest::Approx(0.731059).epsilon(1e-5));
  CHECK(y1->data()[1] == doctest::Approx(0.268941).epsilon(1e-5));
  auto y2 = Softmax(x, 0.2);
  CHECK(y2->data()[0] == doctest::Approx(0.993307).epsilon(1e-5));
  CHECK(y2->data()[1] == doctest::Approx(0.006693).epsilon(1e-4));
}

TEST_CASE("softmax: sums to one within 1e-9 and is shift invariant") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng.UniformInt(9));
    std::vector<double> vals(static_cast<size_t>(n));
    for (auto &v : vals) v = rng.Uniform(-30, 30);
    auto x = Tensor::FromData({n}, vals);
    auto y = Softmax(x, 1.0);
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(y->data()[i] >= 0.0);
      sum += y->data()[i];
    }
    CHECK(std::fabs(sum - 1.0) < 1e-9);

    const double c = rng.Uniform(-5, 5);
    for (auto &v : vals) v += c;
    auto y2 = Softmax(Tensor::FromData({n}, vals), 1.0);
    for (int i = 0; i < n; ++i) {
      CHECK(std::fabs(y->data()[i] - y2->data()[i]) < 1e-12);
    }
  }
}

TEST_CASE("softmax: non-positive temperature is a parameter error") {
  auto x = Tensor::FromData({2}, {1.0, 0.0});
  CHECK_THROWS_AS(Softmax(x, 0.0), asc::ConfigError);
  CHECK_THROWS_AS(Softmax(x, -0.5), asc::ConfigError);
}

TEST_CASE("cross entropy: one-hot logits, uniform loss, gradient identity") {
  // Strongly peaked logits at the label: loss ~ 0.
  auto peaked = Tensor::FromData({1, 3}, {50.0, 0.0, 0.0});
  auto l0 = SoftmaxCrossEntropy(peaked, {0});
  CHECK(l0->item() == doctest::Approx(0.0).epsilon(1e-12));

  // Uniform over 9 classes -> ln 9.
  auto uniform = Tensor::FromData({1, 9}, std::vector<double>(9, 0.3));
  auto l1 = SoftmaxCrossEntropy(uniform, {4});
  CHECK(l1->item() == doctest::Approx(std::log(9.0)));

  // d loss / d logits = probs - onehot.
  auto logits =
      Tensor::FromData({1, 4}, {0.2, -1.1, 0.7, 0.05}, /*requires_grad=*/true);
  std::vector<double> probs;
  auto loss = SoftmaxCrossEntropy(logits, {2}, &probs);
  Backward(loss);
  for (int j = 0; j < 4; ++j) {
    const double want = probs[static_cast<size_t>(j)] - (j == 2 ? 1.0 : 0.0);
    CHECK(logits->grad_values()[static_cast<size_t>(j)] ==
          doctest::Approx(want).epsilon(1e-12));
  }

  CHECK_THROWS_AS(SoftmaxCrossEntropy(peaked, {7}), asc::DimensionError);
}

TEST_CASE("dropout: identities and survivor statistics") {
  Rng rng(6);
  std::vector<double> vals(1000);
  for (auto &v : vals) v = rng.Uniform(0.5, 1.5);
  auto x = Tensor::FromData({1000}, vals);
  CHECK(Dropout(x, 0.0, true, &rng).get() == x.get());
  CHECK(Dropout(x, 0.7, false, nullptr).get() == x.get());
  CHECK_THROWS_AS(Dropout(x, 1.0, true, &rng), asc::ConfigError);

  const int64_t n = 1000000;
  auto big = Tensor::FromData({static_cast<int>(n)},
                              std::vector<double>(static_cast<size_t>(n), 1.0));
  auto dropped = Dropout(big, 0.5, true, &rng);
  int64_t survivors = 0;
  for (int64_t i = 0; i < n; ++i) {
    const double v = dropped->data()[i];
    if (v != 0.0) {
      ++survivors;
      CHECK(v == 2.0);  // exact 1/(1-rate) scaling
    }
  }
  const double frac = static_cast<double>(survivors) / static_cast<double>(n);
  CHECK(frac == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("adam: zero gradients leave parameters unchanged") {
  ParamStore params;
  auto t = params.Create("w", {3});
  t->data()[0] = 0.5;
  t->data()[1] = -0.25;
  t->data()[2] = 1.5;
  t->grad();  // populated, all zeros
  AdamState adam;
  adam.Step(params, 0.001);
  CHECK(t->data()[0] == 0.5);
  CHECK(t->data()[1] == -0.25);
  CHECK(t->data()[2] == 1.5);
  CHECK(adam.step_count() == 1);
}

TEST_CASE("adam: first step with unit gradient moves by about -lr") {
  ParamStore params;
  auto t = params.Create("w", {1});
  t->data()[0] = 2.0;
  t->grad()[0] = 1.0;
  AdamState adam;
  adam.Step(params, 0.001);
  // Bias-corrected m_hat / (sqrt(v_hat) + eps) = 1 / (1 + 1e-8).
  CHECK(t->data()[0] == doctest::Approx(2.0 - 0.001).epsilon(1e-7));
  // Gradients cleared after the step.
  CHECK(t->grad_values()[0] == 0.0);
}

TEST_CASE("adam: identical state and gradients give identical results") {
  auto run = []() {
    ParamStore params;
    auto t = params.Create("w", {4});
    for (int i = 0; i < 4; ++i) t->data()[i] = 0.1 * (i + 1);
    AdamState adam;
    for (int step = 0; step < 5; ++step) {
      for (int i = 0; i < 4; ++i) t->grad()[i] = 0.3 - 0.1 * i;
      adam.Step(params, 0.01);
    }
    return t->values();
  };
  CHECK(run() == run());
}

TEST_CASE("adam: missing gradient slot is a consistency error") {
  ParamStore params;
  params.Create("a", {2})->grad();
  params.Create("b", {2});  // never touched
  AdamState adam;
  CHECK_THROWS_WITH_AS(adam.Step(params, 0.001), doctest::Contains("b"),
                       asc::Error);
}

TEST_CASE("lstm: zero weights and biases give all-zero hidden states") {
  const int batch = 2, steps = 5, in_dim = 3, hidden = 4;
  Rng rng(7);
  std::vector<double> vals(static_cast<size_t>(batch) * steps * in_dim);
  for (auto &v : vals) v = rng.Uniform(-1, 1);
  auto x = Tensor::FromData({batch, steps, in_dim}, vals);
  auto wx = Tensor::New({in_dim, 4 * hidden});
  auto wh = Tensor::New({hidden, 4 * hidden});
  auto b = Tensor::New({4 * hidden});
  for (bool reverse : {false, true}) {
    auto h = Lstm(x, wx, wh, b, reverse);
    for (int64_t i = 0; i < h->size(); ++i) CHECK(h->data()[i] == 0.0);
  }
}

TEST_CASE("lstm: T=1 forward and backward directions coincide") {
  const int batch = 1, steps = 1, in_dim = 3, hidden = 2;
  Rng rng(8);
  auto rand_tensor = [&rng](Shape shape) {
    auto t = Tensor::New(shape);
    for (int64_t i = 0; i < t->size(); ++i) t->data()[i] = rng.Uniform(-1, 1);
    return t;
  };
  auto x = rand_tensor({batch, steps, in_dim});
  auto wx = rand_tensor({in_dim, 4 * hidden});
  auto wh = rand_tensor({hidden, 4 * hidden});
  auto b = rand_tensor({4 * hidden});
  auto fw = Lstm(x, wx, wh, b, false);
  auto bw = Lstm(x, wx, wh, b, true);
  CHECK(fw->values() == bw->values());
}

TEST_CASE("attention building blocks: weighted summary hand values") {
  // scores (0.25, 0.75) over frames (2,0) and (0,4) -> (0.5, 3.0).
  auto scores = Tensor::FromData({1, 1, 2}, {0.25, 0.75});
  auto frames = Tensor::FromData({1, 2, 2}, {2, 0, 0, 4});
  auto summary = Bmm(scores, frames);
  CHECK(summary->data()[0] == doctest::Approx(0.5));
  CHECK(summary->data()[1] == doctest::Approx(3.0));
}

TEST_CASE("time max: hand values and permutation invariance") {
  auto x = Tensor::FromData({1, 2, 2}, {1, 5, 3, 2});
  auto y = TimeMax(x);
  CHECK(y->data()[0] == doctest::Approx(3));
  CHECK(y->data()[1] == doctest::Approx(5));
  auto x2 = Tensor::FromData({1, 2, 2}, {3, 2, 1, 5});  // frames swapped
  auto y2 = TimeMax(x2);
  CHECK(y->values() == y2->values());

  auto single = Tensor::FromData({1, 1, 3}, {0.5, -1, 2});
  auto ys = TimeMax(single);
  CHECK(ys->values() == std::vector<double>{0.5, -1, 2});
}

TEST_CASE("ops are deterministic given identical inputs") {
  Rng rng(9);
  std::vector<double> vals(2 * 2 * 6 * 6);
  for (auto &v : vals) v = rng.Uniform(-1, 1);
  auto x = Tensor::FromData({2, 2, 6, 6}, vals);
  std::vector<double> wv(3 * 2 * 3 * 3);
  for (auto &v : wv) v = rng.Uniform(-1, 1);
  auto w = Tensor::FromData({3, 2, 3, 3}, wv);
  auto y1 = Conv2d(x, w, 1, 1, 1, 1);
  auto y2 = Conv2d(x, w, 1, 1, 1, 1);
  CHECK(y1->values() == y2->values());
}

TEST_CASE("finite checks surface NaN instead of propagating") {
  auto x = Tensor::FromData({2}, {1.0, std::numeric_limits<double>::quiet_NaN()});
  auto y = Tensor::FromData({2}, {1.0, 1.0});
  CHECK_THROWS_AS(Add(x, y), asc::NumericError);
}

TEST_CASE("tensors reject non-positive dimensions") {
  CHECK_THROWS_AS(Tensor::New({1, 0, 4}), asc::DimensionError);
}
