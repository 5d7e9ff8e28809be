// src/kernels-omp.cc

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

// OpenMP backend. Work is split over independent output elements (matrix
// rows, (batch, channel) planes, weight entries) with static schedule; no
// parallel reductions, so each output element sees the exact reduction
// order of the serial reference and results do not depend on thread count.
// Inner loops run over the contiguous trailing dimension so they vectorize.

#include <omp.h>

#include <cstring>

#include "asc/kernels.h"

namespace asc {
namespace kernels {
namespace omp {

void MatMul(int64_t m, int64_t n, int64_t k, const double *a, bool trans_a,
            const double *b, bool trans_b, double *c, bool accumulate) {
  if (!trans_b) {
    // c[i,:] += a(i,p) * b[p,:], row at a time.
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
      double *crow = c + i * n;
      if (!accumulate) std::memset(crow, 0, sizeof(double) * n);
      for (int64_t p = 0; p < k; ++p) {
        const double av = trans_a ? a[p * m + i] : a[i * k + p];
        const double *brow = b + p * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    // b stored (n,k): dot products of contiguous rows.
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < m; ++i) {
      double *crow = c + i * n;
      for (int64_t j = 0; j < n; ++j) {
        const double *brow = b + j * k;
        double sum = 0.0;
        if (!trans_a) {
          const double *arow = a + i * k;
          for (int64_t p = 0; p < k; ++p) sum += arow[p] * brow[p];
        } else {
          for (int64_t p = 0; p < k; ++p) sum += a[p * m + i] * brow[p];
        }
        if (accumulate) {
          crow[j] += sum;
        } else {
          crow[j] = sum;
        }
      }
    }
  }
}

void Conv2dForward(const ConvShape &s, const double *in, const double *weight,
                   double *out) {
  const int oh = s.OutH(), ow = s.OutW();
  const int64_t planes = static_cast<int64_t>(s.batch) * s.out_ch;
#pragma omp parallel for schedule(static)
  for (int64_t plane = 0; plane < planes; ++plane) {
    const int b = static_cast<int>(plane / s.out_ch);
    const int co = static_cast<int>(plane % s.out_ch);
    double *out_plane = out + plane * oh * ow;
    std::memset(out_plane, 0, sizeof(double) * oh * ow);
    for (int ci = 0; ci < s.in_ch; ++ci) {
      const double *in_plane =
          in + (static_cast<int64_t>(b) * s.in_ch + ci) * s.in_h * s.in_w;
      for (int ky = 0; ky < s.k_h; ++ky) {
        for (int kx = 0; kx < s.k_w; ++kx) {
          const double w =
              weight[((static_cast<int64_t>(co) * s.in_ch + ci) * s.k_h + ky) *
                         s.k_w +
                     kx];
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride_h - s.pad_h + ky;
            if (iy < 0 || iy >= s.in_h) continue;
            const double *in_row = in_plane + static_cast<int64_t>(iy) * s.in_w;
            double *out_row = out_plane + static_cast<int64_t>(oy) * ow;
            if (s.stride_w == 1) {
              const int shift = kx - s.pad_w;
              const int lo = shift < 0 ? -shift : 0;
              const int hi = s.in_w - shift < ow ? s.in_w - shift : ow;
              for (int ox = lo; ox < hi; ++ox) {
                out_row[ox] += w * in_row[ox + shift];
              }
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s.stride_w - s.pad_w + kx;
                if (ix < 0 || ix >= s.in_w) continue;
                out_row[ox] += w * in_row[ix];
              }
            }
          }
        }
      }
    }
  }
}

void Conv2dBackwardInput(const ConvShape &s, const double *grad_out,
                         const double *weight, double *grad_in) {
  const int oh = s.OutH(), ow = s.OutW();
  const int64_t planes = static_cast<int64_t>(s.batch) * s.in_ch;
#pragma omp parallel for schedule(static)
  for (int64_t plane = 0; plane < planes; ++plane) {
    const int b = static_cast<int>(plane / s.in_ch);
    const int ci = static_cast<int>(plane % s.in_ch);
    double *gin_plane = grad_in + plane * s.in_h * s.in_w;
    for (int co = 0; co < s.out_ch; ++co) {
      const double *gout_plane =
          grad_out + (static_cast<int64_t>(b) * s.out_ch + co) * oh * ow;
      for (int ky = 0; ky < s.k_h; ++ky) {
        for (int kx = 0; kx < s.k_w; ++kx) {
          const double w =
              weight[((static_cast<int64_t>(co) * s.in_ch + ci) * s.k_h + ky) *
                         s.k_w +
                     kx];
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride_h - s.pad_h + ky;
            if (iy < 0 || iy >= s.in_h) continue;
            double *gin_row = gin_plane + static_cast<int64_t>(iy) * s.in_w;
            const double *gout_row = gout_plane + static_cast<int64_t>(oy) * ow;
            if (s.stride_w == 1) {
              const int shift = kx - s.pad_w;
              const int lo = shift < 0 ? -shift : 0;
              const int hi = s.in_w - shift < ow ? s.in_w - shift : ow;
              for (int ox = lo; ox < hi; ++ox) {
                gin_row[ox + shift] += w * gout_row[ox];
              }
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s.stride_w - s.pad_w + kx;
                if (ix < 0 || ix >= s.in_w) continue;
                gin_row[ix] += w * gout_row[ox];
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
  const int64_t taps = static_cast<int64_t>(s.out_ch) * s.in_ch;
#pragma omp parallel for schedule(static)
  for (int64_t tap = 0; tap < taps; ++tap) {
    const int co = static_cast<int>(tap / s.in_ch);
    const int ci = static_cast<int>(tap % s.in_ch);
    for (int ky = 0; ky < s.k_h; ++ky) {
      for (int kx = 0; kx < s.k_w; ++kx) {
        double sum = 0.0;
        for (int b = 0; b < s.batch; ++b) {
          const double *gout_plane =
              grad_out + (static_cast<int64_t>(b) * s.out_ch + co) * oh * ow;
          const double *in_plane =
              in + (static_cast<int64_t>(b) * s.in_ch + ci) * s.in_h * s.in_w;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * s.stride_h - s.pad_h + ky;
            if (iy < 0 || iy >= s.in_h) continue;
            const double *gout_row = gout_plane + static_cast<int64_t>(oy) * ow;
            const double *in_row = in_plane + static_cast<int64_t>(iy) * s.in_w;
            if (s.stride_w == 1) {
              const int shift = kx - s.pad_w;
              const int lo = shift < 0 ? -shift : 0;
              const int hi = s.in_w - shift < ow ? s.in_w - shift : ow;
              for (int ox = lo; ox < hi; ++ox) {
                sum += gout_row[ox] * in_row[ox + shift];
              }
            } else {
              for (int ox = 0; ox < ow; ++ox) {
                const int ix = ox * s.stride_w - s.pad_w + kx;
                if (ix < 0 || ix >= s.in_w) continue;
                sum += gout_row[ox] * in_row[ix];
              }
            }
          }
        }
        grad_weight[(tap * s.k_h + ky) * s.k_w + kx] += sum;
      }
    }
  }
}

void MaxPool2dForward(const PoolShape &s, const double *in, double *out,
                      int32_t *argmax) {
  const int oh = s.OutH(), ow = s.OutW();
  const int64_t planes = static_cast<int64_t>(s.batch) * s.ch;
#pragma omp parallel for schedule(static)
  for (int64_t plane = 0; plane < planes; ++plane) {
    const double *in_plane = in + plane * s.in_h * s.in_w;
    double *out_plane = out + plane * oh * ow;
    int32_t *arg_plane = argmax + plane * oh * ow;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        double best = 0.0;
        int32_t best_idx = -1;
        for (int wy = 0; wy < s.win_h; ++wy) {
          const int iy = oy * s.stride_h + wy;
          for (int wx = 0; wx < s.win_w; ++wx) {
            const int ix = ox * s.stride_w + wx;
            const double v = in_plane[static_cast<int64_t>(iy) * s.in_w + ix];
            if (best_idx < 0 || v > best) {
              best = v;
              best_idx = iy * s.in_w + ix;
            }
          }
        }
        out_plane[static_cast<int64_t>(oy) * ow + ox] = best;
        arg_plane[static_cast<int64_t>(oy) * ow + ox] = best_idx;
      }
    }
  }
}

void MaxPool2dBackward(const PoolShape &s, const double *grad_out,
                       const int32_t *argmax, double *grad_in) {
  const int oh = s.OutH(), ow = s.OutW();
  const int64_t planes = static_cast<int64_t>(s.batch) * s.ch;
#pragma omp parallel for schedule(static)
  for (int64_t plane = 0; plane < planes; ++plane) {
    const double *gout_plane = grad_out + plane * oh * ow;
    const int32_t *arg_plane = argmax + plane * oh * ow;
    double *gin_plane = grad_in + plane * s.in_h * s.in_w;
    for (int64_t i = 0; i < static_cast<int64_t>(oh) * ow; ++i) {
      gin_plane[arg_plane[i]] += gout_plane[i];
    }
  }
}

}  // namespace omp
}  // namespace kernels
}  // namespace asc
