// src/kernels-ref.cc

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

// Serial reference backend. Naive loops, written for readability; the test
// suite checks the OpenMP backend against these. Reductions run in the same
// index order as the parallel versions (innermost ascending), which keeps
// the two backends numerically interchangeable.

#include "asc/kernels.h"

namespace asc {
namespace kernels {
namespace ref {

void MatMul(int64_t m, int64_t n, int64_t k, const double *a, bool trans_a,
            const double *b, bool trans_b, double *c, bool accumulate) {
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) {
      double sum = 0.0;
      for (int64_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        const double bv = trans_b ? b[j * k + p] : b[p * n + j];
        sum += av * bv;
      }
      if (accumulate) {
        c[i * n + j] += sum;
      } else {
        c[i * n + j] = sum;
      }
    }
  }
}

void Conv2dForward(const ConvShape &s, const double *in, const double *weight,
                   double *out) {
  const int oh = s.OutH(), ow = s.OutW();
  for (int b = 0; b < s.batch; ++b) {
    for (int co = 0; co < s.out_ch; ++co) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double sum = 0.0;
          for (int ci = 0; ci < s.in_ch; ++ci) {
            for (int ky = 0; ky < s.k_h; ++ky) {
              const int iy = oy * s.stride_h - s.pad_h + ky;
              if (iy < 0 || iy >= s.in_h) continue;
              for (int kx = 0; kx < s.k_w; ++kx) {
                const int ix = ox * s.stride_w - s.pad_w + kx;
                if (ix < 0 || ix >= s.in_w) continue;
                sum += in[((static_cast<int64_t>(b) * s.in_ch + ci) * s.in_h +
                           iy) *
                              s.in_w +
                          ix] *
                       weight[((static_cast<int64_t>(co) * s.in_ch + ci) *
                                   s.k_h +
                               ky) *
                                  s.k_w +
                              kx];
              }
            }
          }
          out[((static_cast<int64_t>(b) * s.out_ch + co) * oh + oy) * ow +
              ox] = sum;
        }
      }
    }
  }
}

void Conv2dBackwardInput(const ConvShape &s, const double *grad_out,
                         const double *weight, double *grad_in) {
  const int oh = s.OutH(), ow = s.OutW();
  for (int b = 0; b < s.batch; ++b) {
    for (int ci = 0; ci < s.in_ch; ++ci) {
      for (int co = 0; co < s.out_ch; ++co) {
        for (int ky = 0; ky < s.k_h; ++ky) {
          for (int kx = 0; kx < s.k_w; ++kx) {
            const double w =
                weight[((static_cast<int64_t>(co) * s.in_ch + ci) * s.k_h +
                        ky) *
                           s.k_w +
                       kx];
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * s.stride_h - s.pad_h + ky;
              if (iy < 0 || iy >= s.in_h) continue;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s.stride_w - s.pad_w + kx;
                if (ix < 0 || ix >= s.in_w) continue;
                grad_in[((static_cast<int64_t>(b) * s.in_ch + ci) * s.in_h +
                         iy) *
                            s.in_w +
                        ix] +=
                    w * grad_out[((static_cast<int64_t>(b) * s.out_ch + co) *
                                      oh +
                                  oy) *
                                     ow +
                                 ox];
              }
            }
          }
        }
      }
    }
  }
}

void Conv2dBackwardWeight(const ConvShape &s, const double *grad_out,
                          const double *in, double *grad_weight) {
  const int oh = s.OutH(), ow = s.OutW();
  for (int co = 0; co < s.out_ch; ++co) {
    for (int ci = 0; ci < s.in_ch; ++ci) {
      for (int ky = 0; ky < s.k_h; ++ky) {
        for (int kx = 0; kx < s.k_w; ++kx) {
          double sum = 0.0;
          for (int b = 0; b < s.batch; ++b) {
            for (int oy = 0; oy < oh; ++oy) {
              const int iy = oy * s.stride_h - s.pad_h + ky;
              if (iy < 0 || iy >= s.in_h) continue;
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s.stride_w - s.pad_w + kx;
                if (ix < 0 || ix >= s.in_w) continue;
                sum += grad_out[((static_cast<int64_t>(b) * s.out_ch + co) *
                                     oh +
                                 oy) *
                                    ow +
                                ox] *
                       in[((static_cast<int64_t>(b) * s.in_ch + ci) * s.in_h +
                           iy) *
                              s.in_w +
                          ix];
              }
            }
          }
          grad_weight[((static_cast<int64_t>(co) * s.in_ch + ci) * s.k_h +
                       ky) *
                          s.k_w +
                      kx] += sum;
        }
      }
    }
  }
}

void MaxPool2dForward(const PoolShape &s, const double *in, double *out,
                      int32_t *argmax) {
  const int oh = s.OutH(), ow = s.OutW();
  for (int b = 0; b < s.batch; ++b) {
    for (int c = 0; c < s.ch; ++c) {
      const double *plane =
          in + (static_cast<int64_t>(b) * s.ch + c) * s.in_h * s.in_w;
      const int64_t out_base = (static_cast<int64_t>(b) * s.ch + c) * oh * ow;
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          double best = 0.0;
          int32_t best_idx = -1;
          for (int wy = 0; wy < s.win_h; ++wy) {
            const int iy = oy * s.stride_h + wy;
            for (int wx = 0; wx < s.win_w; ++wx) {
              const int ix = ox * s.stride_w + wx;
              const double v = plane[static_cast<int64_t>(iy) * s.in_w + ix];
              if (best_idx < 0 || v > best) {
                best = v;
                best_idx = iy * s.in_w + ix;
              }
            }
          }
          out[out_base + static_cast<int64_t>(oy) * ow + ox] = best;
          argmax[out_base + static_cast<int64_t>(oy) * ow + ox] = best_idx;
        }
      }
    }
  }
}

void MaxPool2dBackward(const PoolShape &s, const double *grad_out,
                       const int32_t *argmax, double *grad_in) {
  const int oh = s.OutH(), ow = s.OutW();
  for (int b = 0; b < s.batch; ++b) {
    for (int c = 0; c < s.ch; ++c) {
      const int64_t out_base = (static_cast<int64_t>(b) * s.ch + c) * oh * ow;
      double *plane =
          grad_in + (static_cast<int64_t>(b) * s.ch + c) * s.in_h * s.in_w;
      for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) {
        plane[argmax[out_base + i]] += grad_out[out_base + i];
      }
    }
  }
}

}  // namespace ref
}  // namespace kernels
}  // namespace asc
