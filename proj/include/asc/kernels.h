// asc/kernels.h

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

#ifndef ASC_KERNELS_H_
#define ASC_KERNELS_H_

#include <cstdint>

namespace asc {
namespace kernels {

// Compute kernels behind the tensor ops. Two backends share one interface:
// a plain serial reference (kernels-ref.cc) and an OpenMP version
// (kernels-omp.cc) that parallelizes over independent output elements only.
// Every reduction is accumulated in the same index order in both backends
// and regardless of thread count, so a fixed seed gives bitwise identical
// results run to run.
enum class Backend { kSerial, kOpenMP };

Backend GetBackend();
void SetBackend(Backend backend);

// Worker cap for the OpenMP backend (and feature prefetch). 0 = all cores.
void SetNumThreads(int n);
int NumThreads();

// Reads ASC_THREADS and ASC_KERNELS=serial|openmp. Called once from main;
// tests set the backend explicitly.
void InitFromEnv();

// C (m x n) = op(A) * op(B) with op controlled by the transpose flags;
// the stored layouts are A: (m,k) or (k,m), B: (k,n) or (n,k), row-major.
// accumulate=true adds into C instead of overwriting.
void MatMul(int64_t m, int64_t n, int64_t k, const double *a, bool trans_a,
            const double *b, bool trans_b, double *c, bool accumulate);

struct ConvShape {
  int batch = 1;
  int in_ch = 1, in_h = 0, in_w = 0;
  int out_ch = 1, k_h = 1, k_w = 1;
  int stride_h = 1, stride_w = 1;
  int pad_h = 0, pad_w = 0;

  int OutH() const { return (in_h + 2 * pad_h - k_h) / stride_h + 1; }
  int OutW() const { return (in_w + 2 * pad_w - k_w) / stride_w + 1; }
};

// in: (batch, in_ch, in_h, in_w); weight: (out_ch, in_ch, k_h, k_w);
// out: (batch, out_ch, OutH, OutW). Zero padding.
void Conv2dForward(const ConvShape &s, const double *in, const double *weight,
                   double *out);
// grad_in accumulates, caller zeroes (or owns prior gradient content).
void Conv2dBackwardInput(const ConvShape &s, const double *grad_out,
                         const double *weight, double *grad_in);
void Conv2dBackwardWeight(const ConvShape &s, const double *grad_out,
                          const double *in, double *grad_weight);

struct PoolShape {
  int batch = 1, ch = 1, in_h = 0, in_w = 0;
  int win_h = 1, win_w = 1, stride_h = 1, stride_w = 1;

  int OutH() const { return (in_h - win_h) / stride_h + 1; }
  int OutW() const { return (in_w - win_w) / stride_w + 1; }
};

// argmax holds, per output element, the flat (h * in_w + w) index of the
// selected input inside its plane. Ties pick the first index in scan order.
void MaxPool2dForward(const PoolShape &s, const double *in, double *out,
                      int32_t *argmax);
void MaxPool2dBackward(const PoolShape &s, const double *grad_out,
                       const int32_t *argmax, double *grad_in);

}  // namespace kernels
}  // namespace asc

#endif  // ASC_KERNELS_H_
