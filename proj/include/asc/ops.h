// asc/ops.h

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

#ifndef ASC_OPS_H_
#define ASC_OPS_H_

#include <vector>

#include "asc/rng.h"
#include "asc/tensor.h"

namespace asc {
namespace nn {

// Differentiable ops. Forward values are computed eagerly; when gradient
// tracking is on and an input requires grad, the output records parents and
// a backward closure that accumulates into the parents' gradients.

// x: (B, C_in, H, W), w: (C_out, C_in, kh, kw). Zero padding.
TensorPtr Conv2d(const TensorPtr &x, const TensorPtr &w, int stride_h,
                 int stride_w, int pad_h, int pad_w);

// Ties route the gradient to the first element in scan order.
TensorPtr MaxPool2d(const TensorPtr &x, int win_h, int win_w, int stride_h,
                    int stride_w);

// x: (B, C, H, W); gamma/beta: (C). Train mode normalizes with batch
// statistics and, when update_running is set, folds them into the running
// buffers with `momentum`; eval mode normalizes with the running buffers.
TensorPtr BatchNorm2d(const TensorPtr &x, const TensorPtr &gamma,
                      const TensorPtr &beta, const TensorPtr &running_mean,
                      const TensorPtr &running_var, double momentum, double eps,
                      bool train, bool update_running);

TensorPtr Relu(const TensorPtr &x);

// Inverted dropout: train mode zeroes with probability `rate` and scales
// survivors by 1/(1-rate); eval mode is the identity.
TensorPtr Dropout(const TensorPtr &x, double rate, bool train, Rng *rng);

// x: (B, in) @ w: (in, out) + b (out).
TensorPtr Linear(const TensorPtr &x, const TensorPtr &w, const TensorPtr &b);

// a: (m, k); b: (k, n), or (n, k) when trans_b.
TensorPtr MatMul(const TensorPtr &a, const TensorPtr &b, bool trans_b = false);

// Batched: (B, m, k) @ (B, k, n) -> (B, m, n).
TensorPtr Bmm(const TensorPtr &a, const TensorPtr &b);

// One LSTM direction over the full sequence. x: (B, T, q); wx: (q, 4H);
// wh: (H, 4H); bias: (4H) with gate order [input, forget, cell, output].
// reverse processes t = T-1..0; outputs stay aligned to input positions.
TensorPtr Lstm(const TensorPtr &x, const TensorPtr &wx, const TensorPtr &wh,
               const TensorPtr &bias, bool reverse);

TensorPtr ConcatLast(const std::vector<TensorPtr> &parts);

TensorPtr Reshape(const TensorPtr &x, Shape shape);

// (B, C, F, T) -> (B, T, F*C); frequency-major within each time step.
TensorPtr FlattenFreqTime(const TensorPtr &x);

// (B, T, M) -> (B, M, T).
TensorPtr Transpose12(const TensorPtr &x);

// Stable softmax over the last dimension; logits are divided by
// `temperature` before exponentiation. temperature <= 0 is a ConfigError.
TensorPtr Softmax(const TensorPtr &x, double temperature = 1.0);

// (B, T, p) -> (B, p): elementwise max over time, first-index tie-break.
TensorPtr TimeMax(const TensorPtr &x);

TensorPtr Scale(const TensorPtr &x, double c);
TensorPtr Add(const TensorPtr &a, const TensorPtr &b);
TensorPtr Mul(const TensorPtr &a, const TensorPtr &b);

// sum_i weights[i] * x[i] -> scalar. Handy as a test loss.
TensorPtr WeightedSum(const TensorPtr &x, const std::vector<double> &weights);

// Mean over the batch of -log softmax(logits)[label]; fused for stable
// gradients (d logits = (softmax - onehot) / B). probs_out, when non-null,
// receives the softmax probabilities.
TensorPtr SoftmaxCrossEntropy(const TensorPtr &logits,
                              const std::vector<int> &labels,
                              std::vector<double> *probs_out = nullptr);

}  // namespace nn
}  // namespace asc

#endif  // ASC_OPS_H_
