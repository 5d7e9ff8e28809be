// src/kernels.cc

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

#include "asc/kernels.h"

#include <omp.h>

#include <cstdlib>
#include <cstring>
#include <string>

namespace asc {
namespace kernels {

namespace ref {
void MatMul(int64_t, int64_t, int64_t, const double *, bool, const double *,
            bool, double *, bool);
void Conv2dForward(const ConvShape &, const double *, const double *,
                   double *);
void Conv2dBackwardInput(const ConvShape &, const double *, const double *,
                         double *);
void Conv2dBackwardWeight(const ConvShape &, const double *, const double *,
                          double *);
void MaxPool2dForward(const PoolShape &, const double *, double *, int32_t *);
void MaxPool2dBackward(const PoolShape &, const double *, const int32_t *,
                       double *);
}  // namespace ref

namespace omp {
void MatMul(int64_t, int64_t, int64_t, const double *, bool, const double *,
            bool, double *, bool);
void Conv2dForward(const ConvShape &, const double *, const double *,
                   double *);
void Conv2dBackwardInput(const ConvShape &, const double *, const double *,
                         double *);
void Conv2dBackwardWeight(const ConvShape &, const double *, const double *,
                          double *);
void MaxPool2dForward(const PoolShape &, const double *, double *, int32_t *);
void MaxPool2dBackward(const PoolShape &, const double *, const int32_t *,
                       double *);
}  // namespace omp

namespace {
Backend g_backend = Backend::kOpenMP;
}

Backend GetBackend() { return g_backend; }
void SetBackend(Backend backend) { g_backend = backend; }

void SetNumThreads(int n) {
  if (n > 0) omp_set_num_threads(n);
}

int NumThreads() { return omp_get_max_threads(); }

void InitFromEnv() {
  if (const char *threads = std::getenv("ASC_THREADS")) {
    const int n = std::atoi(threads);
    if (n > 0) omp_set_num_threads(n);
  }
  if (const char *which = std::getenv("ASC_KERNELS")) {
    if (std::string(which) == "serial") g_backend = Backend::kSerial;
  }
}

void MatMul(int64_t m, int64_t n, int64_t k, const double *a, bool trans_a,
            const double *b, bool trans_b, double *c, bool accumulate) {
  if (g_backend == Backend::kSerial) {
    ref::MatMul(m, n, k, a, trans_a, b, trans_b, c, accumulate);
  } else {
    omp::MatMul(m, n, k, a, trans_a, b, trans_b, c, accumulate);
  }
}

void Conv2dForward(const ConvShape &s, const double *in, const double *weight,
                   double *out) {
  if (g_backend == Backend::kSerial) {
    ref::Conv2dForward(s, in, weight, out);
  } else {
    omp::Conv2dForward(s, in, weight, out);
  }
}

void Conv2dBackwardInput(const ConvShape &s, const double *grad_out,
                         const double *weight, double *grad_in) {
  if (g_backend == Backend::kSerial) {
    ref::Conv2dBackwardInput(s, grad_out, weight, grad_in);
  } else {
    omp::Conv2dBackwardInput(s, grad_out, weight, grad_in);
  }
}

void Conv2dBackwardWeight(const ConvShape &s, const double *grad_out,
                          const double *in, double *grad_weight) {
  if (g_backend == Backend::kSerial) {
    ref::Conv2dBackwardWeight(s, grad_out, in, grad_weight);
  } else {
    omp::Conv2dBackwardWeight(s, grad_out, in, grad_weight);
  }
}

void MaxPool2dForward(const PoolShape &s, const double *in, double *out,
                      int32_t *argmax) {
  if (g_backend == Backend::kSerial) {
    ref::MaxPool2dForward(s, in, out, argmax);
  } else {
    omp::MaxPool2dForward(s, in, out, argmax);
  }
}

void MaxPool2dBackward(const PoolShape &s, const double *grad_out,
                       const int32_t *argmax, double *grad_in) {
  if (g_backend == Backend::kSerial) {
    ref::MaxPool2dBackward(s, grad_out, argmax, grad_in);
  } else {
    omp::MaxPool2dBackward(s, grad_out, argmax, grad_in);
  }
}

}  // namespace kernels
}  // namespace asc
