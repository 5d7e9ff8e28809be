// src/ops.cc

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

#include "asc/ops.h"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>

#include "asc/kernels.h"

namespace asc {
namespace nn {

namespace {

bool AnyRequiresGrad(std::initializer_list<TensorPtr> inputs) {
  if (!GradEnabled()) return false;
  for (const auto &t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// Registers `out` as depending on `inputs`. All inputs become parents so
// their values stay alive for the backward closure.
void Attach(const TensorPtr &out, std::initializer_list<TensorPtr> inputs,
            std::function<void(Tensor &)> backward) {
  out->set_requires_grad(true);
  for (const auto &t : inputs) out->AddParent(t);
  out->SetBackward(std::move(backward));
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void ExpectRank(const TensorPtr &t, int rank, const char *op) {
  if (t->rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + " tensor, got " +
                         ShapeStr(t->shape()));
  }
}

}  // namespace

TensorPtr Conv2d(const TensorPtr &x, const TensorPtr &w, int stride_h,
                 int stride_w, int pad_h, int pad_w) {
  ExpectRank(x, 4, "conv2d");
  ExpectRank(w, 4, "conv2d");
  if (x->dim(1) != w->dim(1)) {
    throw DimensionError("conv2d: input channels of " + ShapeStr(x->shape()) +
                         " do not match kernel " + ShapeStr(w->shape()));
  }
  if (stride_h < 1 || stride_w < 1) {
    throw ConfigError("conv2d: stride must be >= 1");
  }
  kernels::ConvShape s;
  s.batch = x->dim(0);
  s.in_ch = x->dim(1);
  s.in_h = x->dim(2);
  s.in_w = x->dim(3);
  s.out_ch = w->dim(0);
  s.k_h = w->dim(2);
  s.k_w = w->dim(3);
  s.stride_h = stride_h;
  s.stride_w = stride_w;
  s.pad_h = pad_h;
  s.pad_w = pad_w;
  if (s.k_h > s.in_h + 2 * pad_h || s.k_w > s.in_w + 2 * pad_w) {
    throw DimensionError("conv2d: kernel " + ShapeStr(w->shape()) +
                         " exceeds padded input " + ShapeStr(x->shape()));
  }
  auto out = Tensor::New({s.batch, s.out_ch, s.OutH(), s.OutW()});
  kernels::Conv2dForward(s, x->data(), w->data(), out->data());
  out->CheckFinite("conv2d");
  if (AnyRequiresGrad({x, w})) {
    Attach(out, {x, w}, [s](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      const TensorPtr &w_in = self.parents()[1];
      if (x_in->requires_grad()) {
        kernels::Conv2dBackwardInput(s, self.grad(), w_in->data(),
                                     x_in->grad());
      }
      if (w_in->requires_grad()) {
        kernels::Conv2dBackwardWeight(s, self.grad(), x_in->data(),
                                      w_in->grad());
      }
    });
  }
  return out;
}

TensorPtr MaxPool2d(const TensorPtr &x, int win_h, int win_w, int stride_h,
                    int stride_w) {
  ExpectRank(x, 4, "maxpool2d");
  kernels::PoolShape s;
  s.batch = x->dim(0);
  s.ch = x->dim(1);
  s.in_h = x->dim(2);
  s.in_w = x->dim(3);
  s.win_h = win_h;
  s.win_w = win_w;
  s.stride_h = stride_h;
  s.stride_w = stride_w;
  if (win_h > s.in_h || win_w > s.in_w) {
    throw DimensionError("maxpool2d: window " + std::to_string(win_h) + "x" +
                         std::to_string(win_w) + " larger than input " +
                         ShapeStr(x->shape()));
  }
  auto out = Tensor::New({s.batch, s.ch, s.OutH(), s.OutW()});
  auto argmax = std::make_shared<std::vector<int32_t>>(
      static_cast<size_t>(out->size()));
  kernels::MaxPool2dForward(s, x->data(), out->data(), argmax->data());
  out->CheckFinite("maxpool2d");
  if (AnyRequiresGrad({x})) {
    Attach(out, {x}, [s, argmax](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (x_in->requires_grad()) {
        kernels::MaxPool2dBackward(s, self.grad(), argmax->data(),
                                   x_in->grad());
      }
    });
  }
  return out;
}

TensorPtr BatchNorm2d(const TensorPtr &x, const TensorPtr &gamma,
                      const TensorPtr &beta, const TensorPtr &running_mean,
                      const TensorPtr &running_var, double momentum, double eps,
                      bool train, bool update_running) {
  ExpectRank(x, 4, "batchnorm");
  const int batch = x->dim(0), ch = x->dim(1), h = x->dim(2), w = x->dim(3);
  if (gamma->size() != ch || beta->size() != ch ||
      running_mean->size() != ch || running_var->size() != ch) {
    throw DimensionError("batchnorm: parameter size does not match " +
                         std::to_string(ch) + " channels");
  }
  const int64_t plane = static_cast<int64_t>(h) * w;
  const int64_t per_ch = static_cast<int64_t>(batch) * plane;

  auto mean = std::make_shared<std::vector<double>>(ch, 0.0);
  auto inv_std = std::make_shared<std::vector<double>>(ch, 0.0);
  if (train) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < ch; ++c) {
      double sum = 0.0, sumsq = 0.0;
      for (int b = 0; b < batch; ++b) {
        const double *p = x->data() + (static_cast<int64_t>(b) * ch + c) * plane;
        for (int64_t i = 0; i < plane; ++i) {
          sum += p[i];
          sumsq += p[i] * p[i];
        }
      }
      const double m = sum / static_cast<double>(per_ch);
      const double var =
          std::max(0.0, sumsq / static_cast<double>(per_ch) - m * m);
      (*mean)[c] = m;
      (*inv_std)[c] = 1.0 / std::sqrt(var + eps);
    }
    if (update_running) {
      for (int c = 0; c < ch; ++c) {
        const double var = 1.0 / ((*inv_std)[c] * (*inv_std)[c]) - eps;
        running_mean->data()[c] =
            (1.0 - momentum) * running_mean->data()[c] + momentum * (*mean)[c];
        running_var->data()[c] =
            (1.0 - momentum) * running_var->data()[c] + momentum * var;
      }
    }
  } else {
    for (int c = 0; c < ch; ++c) {
      (*mean)[c] = running_mean->data()[c];
      (*inv_std)[c] = 1.0 / std::sqrt(running_var->data()[c] + eps);
    }
  }

  auto out = Tensor::New(x->shape());
#pragma omp parallel for schedule(static)
  for (int64_t bc = 0; bc < static_cast<int64_t>(batch) * ch; ++bc) {
    const int c = static_cast<int>(bc % ch);
    const double m = (*mean)[c], is = (*inv_std)[c];
    const double g = gamma->data()[c], bt = beta->data()[c];
    const double *src = x->data() + bc * plane;
    double *dst = out->data() + bc * plane;
    for (int64_t i = 0; i < plane; ++i) {
      dst[i] = (src[i] - m) * is * g + bt;
    }
  }
  out->CheckFinite("batchnorm");

  if (AnyRequiresGrad({x, gamma, beta})) {
    Attach(out, {x, gamma, beta}, [mean, inv_std, train, batch, ch, plane,
                                   per_ch](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      const TensorPtr &gamma_in = self.parents()[1];
      const TensorPtr &beta_in = self.parents()[2];
      const double *gy = self.grad_values().data();
      // Per-channel reductions of dy and dy * xhat.
      std::vector<double> sum_dy(ch, 0.0), sum_dy_xhat(ch, 0.0);
#pragma omp parallel for schedule(static)
      for (int c = 0; c < ch; ++c) {
        const double m = (*mean)[c], is = (*inv_std)[c];
        double sdy = 0.0, sdyx = 0.0;
        for (int b = 0; b < batch; ++b) {
          const int64_t base = (static_cast<int64_t>(b) * ch + c) * plane;
          const double *xp = x_in->data() + base;
          const double *gp = gy + base;
          for (int64_t i = 0; i < plane; ++i) {
            sdy += gp[i];
            sdyx += gp[i] * (xp[i] - m) * is;
          }
        }
        sum_dy[c] = sdy;
        sum_dy_xhat[c] = sdyx;
      }
      if (gamma_in->requires_grad()) {
        for (int c = 0; c < ch; ++c) gamma_in->grad()[c] += sum_dy_xhat[c];
      }
      if (beta_in->requires_grad()) {
        for (int c = 0; c < ch; ++c) beta_in->grad()[c] += sum_dy[c];
      }
      if (x_in->requires_grad()) {
        double *gx = x_in->grad();
#pragma omp parallel for schedule(static)
        for (int64_t bc = 0; bc < static_cast<int64_t>(batch) * ch; ++bc) {
          const int c = static_cast<int>(bc % ch);
          const double m = (*mean)[c], is = (*inv_std)[c];
          const double g = gamma_in->data()[c];
          const double *xp = x_in->data() + bc * plane;
          const double *gp = gy + bc * plane;
          double *out_p = gx + bc * plane;
          if (train) {
            const double mean_dy = sum_dy[c] / static_cast<double>(per_ch);
            const double mean_dy_xhat =
                sum_dy_xhat[c] / static_cast<double>(per_ch);
            for (int64_t i = 0; i < plane; ++i) {
              const double xhat = (xp[i] - m) * is;
              out_p[i] += g * is * (gp[i] - mean_dy - xhat * mean_dy_xhat);
            }
          } else {
            for (int64_t i = 0; i < plane; ++i) {
              out_p[i] += g * is * gp[i];
            }
          }
        }
      }
    });
  }
  return out;
}

TensorPtr Relu(const TensorPtr &x) {
  auto out = Tensor::New(x->shape());
  const double *src = x->data();
  double *dst = out->data();
  const int64_t n = x->size();
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) dst[i] = src[i] > 0.0 ? src[i] : 0.0;
  if (AnyRequiresGrad({x})) {
    Attach(out, {x}, [](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (!x_in->requires_grad()) return;
      const double *gy = self.grad_values().data();
      const double *y = self.data();
      double *gx = x_in->grad();
      for (int64_t i = 0; i < self.size(); ++i) {
        if (y[i] > 0.0) gx[i] += gy[i];
      }
    });
  }
  return out;
}

TensorPtr Dropout(const TensorPtr &x, double rate, bool train, Rng *rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ConfigError("dropout: rate must be in [0, 1), got " +
                      std::to_string(rate));
  }
  if (!train || rate == 0.0) return x;  // identity
  if (rng == nullptr) throw ConfigError("dropout: train mode needs an rng");
  const double scale = 1.0 / (1.0 - rate);
  auto mask = std::make_shared<std::vector<uint8_t>>(
      static_cast<size_t>(x->size()));
  auto out = Tensor::New(x->shape());
  const double *src = x->data();
  double *dst = out->data();
  for (int64_t i = 0; i < x->size(); ++i) {
    const bool keep = rng->Uniform() >= rate;
    (*mask)[static_cast<size_t>(i)] = keep;
    dst[i] = keep ? src[i] * scale : 0.0;
  }
  out->CheckFinite("dropout");
  if (AnyRequiresGrad({x})) {
    Attach(out, {x}, [mask, scale](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (!x_in->requires_grad()) return;
      const double *gy = self.grad_values().data();
      double *gx = x_in->grad();
      for (int64_t i = 0; i < self.size(); ++i) {
        if ((*mask)[static_cast<size_t>(i)]) gx[i] += gy[i] * scale;
      }
    });
  }
  return out;
}

TensorPtr MatMul(const TensorPtr &a, const TensorPtr &b, bool trans_b) {
  ExpectRank(a, 2, "matmul");
  ExpectRank(b, 2, "matmul");
  const int m = a->dim(0), k = a->dim(1);
  const int n = trans_b ? b->dim(0) : b->dim(1);
  const int bk = trans_b ? b->dim(1) : b->dim(0);
  if (bk != k) {
    throw DimensionError("matmul: inner dimensions of " + ShapeStr(a->shape()) +
                         " and " + ShapeStr(b->shape()) + " do not match");
  }
  auto out = Tensor::New({m, n});
  kernels::MatMul(m, n, k, a->data(), false, b->data(), trans_b, out->data(),
                  false);
  out->CheckFinite("matmul");
  if (AnyRequiresGrad({a, b})) {
    Attach(out, {a, b}, [m, n, k, trans_b](Tensor &self) {
      const TensorPtr &a_in = self.parents()[0];
      const TensorPtr &b_in = self.parents()[1];
      const double *gy = self.grad_values().data();
      if (a_in->requires_grad()) {
        // ga += gy @ op(b)^T
        kernels::MatMul(m, k, n, gy, false, b_in->data(), !trans_b,
                        a_in->grad(), true);
      }
      if (b_in->requires_grad()) {
        if (!trans_b) {
          kernels::MatMul(k, n, m, a_in->data(), true, gy, false, b_in->grad(),
                          true);
        } else {
          kernels::MatMul(n, k, m, gy, true, a_in->data(), false, b_in->grad(),
                          true);
        }
      }
    });
  }
  return out;
}

TensorPtr Linear(const TensorPtr &x, const TensorPtr &w, const TensorPtr &b) {
  ExpectRank(x, 2, "linear");
  ExpectRank(w, 2, "linear");
  const int batch = x->dim(0), in = x->dim(1), out_dim = w->dim(1);
  if (w->dim(0) != in || b->size() != out_dim) {
    throw DimensionError("linear: " + ShapeStr(x->shape()) + " @ " +
                         ShapeStr(w->shape()) + " + " + ShapeStr(b->shape()));
  }
  auto out = Tensor::New({batch, out_dim});
  kernels::MatMul(batch, out_dim, in, x->data(), false, w->data(), false,
                  out->data(), false);
  for (int i = 0; i < batch; ++i) {
    double *row = out->data() + static_cast<int64_t>(i) * out_dim;
    for (int j = 0; j < out_dim; ++j) row[j] += b->data()[j];
  }
  out->CheckFinite("linear");
  if (AnyRequiresGrad({x, w, b})) {
    Attach(out, {x, w, b}, [batch, in, out_dim](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      const TensorPtr &w_in = self.parents()[1];
      const TensorPtr &b_in = self.parents()[2];
      const double *gy = self.grad_values().data();
      if (x_in->requires_grad()) {
        kernels::MatMul(batch, in, out_dim, gy, false, w_in->data(), true,
                        x_in->grad(), true);
      }
      if (w_in->requires_grad()) {
        kernels::MatMul(in, out_dim, batch, x_in->data(), true, gy, false,
                        w_in->grad(), true);
      }
      if (b_in->requires_grad()) {
        double *gb = b_in->grad();
        for (int j = 0; j < out_dim; ++j) {
          double sum = 0.0;
          for (int i = 0; i < batch; ++i) {
            sum += gy[static_cast<int64_t>(i) * out_dim + j];
          }
          gb[j] += sum;
        }
      }
    });
  }
  return out;
}

TensorPtr Bmm(const TensorPtr &a, const TensorPtr &b) {
  ExpectRank(a, 3, "bmm");
  ExpectRank(b, 3, "bmm");
  const int batch = a->dim(0), m = a->dim(1), k = a->dim(2), n = b->dim(2);
  if (b->dim(0) != batch || b->dim(1) != k) {
    throw DimensionError("bmm: " + ShapeStr(a->shape()) + " @ " +
                         ShapeStr(b->shape()));
  }
  auto out = Tensor::New({batch, m, n});
  for (int i = 0; i < batch; ++i) {
    kernels::MatMul(m, n, k, a->data() + static_cast<int64_t>(i) * m * k, false,
                    b->data() + static_cast<int64_t>(i) * k * n, false,
                    out->data() + static_cast<int64_t>(i) * m * n, false);
  }
  out->CheckFinite("bmm");
  if (AnyRequiresGrad({a, b})) {
    Attach(out, {a, b}, [batch, m, k, n](Tensor &self) {
      const TensorPtr &a_in = self.parents()[0];
      const TensorPtr &b_in = self.parents()[1];
      const double *gy = self.grad_values().data();
      for (int i = 0; i < batch; ++i) {
        const double *gyi = gy + static_cast<int64_t>(i) * m * n;
        if (a_in->requires_grad()) {
          kernels::MatMul(m, k, n, gyi, false,
                          b_in->data() + static_cast<int64_t>(i) * k * n, true,
                          a_in->grad() + static_cast<int64_t>(i) * m * k, true);
        }
        if (b_in->requires_grad()) {
          kernels::MatMul(k, n, m,
                          a_in->data() + static_cast<int64_t>(i) * m * k, true,
                          gyi, false,
                          b_in->grad() + static_cast<int64_t>(i) * k * n, true);
        }
      }
    });
  }
  return out;
}

TensorPtr Lstm(const TensorPtr &x, const TensorPtr &wx, const TensorPtr &wh,
               const TensorPtr &bias, bool reverse) {
  ExpectRank(x, 3, "lstm");
  ExpectRank(wx, 2, "lstm");
  ExpectRank(wh, 2, "lstm");
  const int batch = x->dim(0), steps = x->dim(1), in_dim = x->dim(2);
  const int hidden = wh->dim(0), gates = 4 * hidden;
  if (steps < 1) throw DimensionError("lstm: empty sequence");
  if (wx->dim(0) != in_dim || wx->dim(1) != gates || wh->dim(1) != gates ||
      bias->size() != gates) {
    throw DimensionError("lstm: weight shapes " + ShapeStr(wx->shape()) + "/" +
                         ShapeStr(wh->shape()) + " inconsistent with input " +
                         ShapeStr(x->shape()));
  }
  const int64_t bt = static_cast<int64_t>(batch) * steps;

  // Input contribution for all steps at once: (B*T, 4H).
  std::vector<double> xw(static_cast<size_t>(bt * gates));
  kernels::MatMul(bt, gates, in_dim, x->data(), false, wx->data(), false,
                  xw.data(), false);
  for (int64_t r = 0; r < bt; ++r) {
    double *row = xw.data() + r * gates;
    for (int g = 0; g < gates; ++g) row[g] += bias->data()[g];
  }

  auto out = Tensor::New({batch, steps, hidden});
  // Saved activations for backward, laid out (B, T, H) by absolute time.
  struct Saved {
    std::vector<double> i, f, g, o, c, tanh_c;
  };
  auto sv = std::make_shared<Saved>();
  const size_t bth = static_cast<size_t>(bt) * hidden;
  sv->i.resize(bth);
  sv->f.resize(bth);
  sv->g.resize(bth);
  sv->o.resize(bth);
  sv->c.resize(bth);
  sv->tanh_c.resize(bth);

  std::vector<double> h_prev(static_cast<size_t>(batch) * hidden, 0.0);
  std::vector<double> c_prev(static_cast<size_t>(batch) * hidden, 0.0);
  std::vector<double> z(static_cast<size_t>(batch) * gates);
  for (int s = 0; s < steps; ++s) {
    const int t = reverse ? steps - 1 - s : s;
    for (int b = 0; b < batch; ++b) {
      std::memcpy(z.data() + static_cast<int64_t>(b) * gates,
                  xw.data() + (static_cast<int64_t>(b) * steps + t) * gates,
                  sizeof(double) * gates);
    }
    kernels::MatMul(batch, gates, hidden, h_prev.data(), false, wh->data(),
                    false, z.data(), true);
    for (int b = 0; b < batch; ++b) {
      const double *zb = z.data() + static_cast<int64_t>(b) * gates;
      const int64_t idx = (static_cast<int64_t>(b) * steps + t) * hidden;
      double *hp = h_prev.data() + static_cast<int64_t>(b) * hidden;
      double *cp = c_prev.data() + static_cast<int64_t>(b) * hidden;
      for (int kk = 0; kk < hidden; ++kk) {
        const double ig = Sigmoid(zb[kk]);
        const double fg = Sigmoid(zb[hidden + kk]);
        const double gg = std::tanh(zb[2 * hidden + kk]);
        const double og = Sigmoid(zb[3 * hidden + kk]);
        const double cc = fg * cp[kk] + ig * gg;
        const double tc = std::tanh(cc);
        sv->i[idx + kk] = ig;
        sv->f[idx + kk] = fg;
        sv->g[idx + kk] = gg;
        sv->o[idx + kk] = og;
        sv->c[idx + kk] = cc;
        sv->tanh_c[idx + kk] = tc;
        cp[kk] = cc;
        hp[kk] = og * tc;
        out->data()[idx + kk] = hp[kk];
      }
    }
  }
  out->CheckFinite("lstm");

  if (AnyRequiresGrad({x, wx, wh, bias})) {
    Attach(out, {x, wx, wh, bias}, [sv, batch, steps, in_dim, hidden, gates,
                                    reverse](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      const TensorPtr &wx_in = self.parents()[1];
      const TensorPtr &wh_in = self.parents()[2];
      const TensorPtr &b_in = self.parents()[3];
      const double *gh = self.grad_values().data();
      const double *h_all = self.data();
      const int64_t bt = static_cast<int64_t>(batch) * steps;

      std::vector<double> dz_all(static_cast<size_t>(bt * gates), 0.0);
      std::vector<double> dz_t(static_cast<size_t>(batch) * gates);
      std::vector<double> dh_carry(static_cast<size_t>(batch) * hidden, 0.0);
      std::vector<double> dc(static_cast<size_t>(batch) * hidden, 0.0);
      for (int s = steps - 1; s >= 0; --s) {
        const int t = reverse ? steps - 1 - s : s;
        const int prev_t = s > 0 ? (reverse ? t + 1 : t - 1) : -1;
        for (int b = 0; b < batch; ++b) {
          const int64_t idx = (static_cast<int64_t>(b) * steps + t) * hidden;
          const int64_t pidx =
              prev_t < 0
                  ? -1
                  : (static_cast<int64_t>(b) * steps + prev_t) * hidden;
          double *dzb = dz_t.data() + static_cast<int64_t>(b) * gates;
          double *dcb = dc.data() + static_cast<int64_t>(b) * hidden;
          const double *carry = dh_carry.data() +
                                static_cast<int64_t>(b) * hidden;
          for (int kk = 0; kk < hidden; ++kk) {
            const double dh = gh[idx + kk] + carry[kk];
            const double ig = sv->i[idx + kk], fg = sv->f[idx + kk];
            const double gg = sv->g[idx + kk], og = sv->o[idx + kk];
            const double tc = sv->tanh_c[idx + kk];
            const double c_before = pidx < 0 ? 0.0 : sv->c[pidx + kk];
            const double do_ = dh * tc;
            const double dcell = dcb[kk] + dh * og * (1.0 - tc * tc);
            const double di = dcell * gg;
            const double dg = dcell * ig;
            const double df = dcell * c_before;
            dcb[kk] = dcell * fg;
            dzb[kk] = di * ig * (1.0 - ig);
            dzb[hidden + kk] = df * fg * (1.0 - fg);
            dzb[2 * hidden + kk] = dg * (1.0 - gg * gg);
            dzb[3 * hidden + kk] = do_ * og * (1.0 - og);
          }
          std::memcpy(dz_all.data() +
                          (static_cast<int64_t>(b) * steps + t) * gates,
                      dzb, sizeof(double) * gates);
        }
        // dh for the previous step in processing order.
        kernels::MatMul(batch, hidden, gates, dz_t.data(), false,
                        wh_in->data(), true, dh_carry.data(), false);
      }

      if (x_in->requires_grad()) {
        kernels::MatMul(bt, in_dim, gates, dz_all.data(), false,
                        wx_in->data(), true, x_in->grad(), true);
      }
      if (wx_in->requires_grad()) {
        kernels::MatMul(in_dim, gates, bt, x_in->data(), true, dz_all.data(),
                        false, wx_in->grad(), true);
      }
      if (wh_in->requires_grad()) {
        // h at the previous processing step, zeros at the sequence start.
        std::vector<double> h_prev_all(static_cast<size_t>(bt * hidden), 0.0);
        for (int s = 1; s < steps; ++s) {
          const int t = reverse ? steps - 1 - s : s;
          const int prev_t = reverse ? t + 1 : t - 1;
          for (int b = 0; b < batch; ++b) {
            std::memcpy(
                h_prev_all.data() +
                    (static_cast<int64_t>(b) * steps + t) * hidden,
                h_all + (static_cast<int64_t>(b) * steps + prev_t) * hidden,
                sizeof(double) * hidden);
          }
        }
        kernels::MatMul(hidden, gates, bt, h_prev_all.data(), true,
                        dz_all.data(), false, wh_in->grad(), true);
      }
      if (b_in->requires_grad()) {
        double *gb = b_in->grad();
        for (int g = 0; g < gates; ++g) {
          double sum = 0.0;
          for (int64_t r = 0; r < bt; ++r) sum += dz_all[r * gates + g];
          gb[g] += sum;
        }
      }
    });
  }
  return out;
}

TensorPtr ConcatLast(const std::vector<TensorPtr> &parts) {
  if (parts.empty()) throw DimensionError("concat: no inputs");
  const Shape &lead = parts[0]->shape();
  int total_last = 0;
  for (const auto &p : parts) {
    if (p->rank() != parts[0]->rank()) {
      throw DimensionError("concat: rank mismatch");
    }
    for (int d = 0; d + 1 < p->rank(); ++d) {
      if (p->dim(d) != lead[static_cast<size_t>(d)]) {
        throw DimensionError("concat: leading dims " + ShapeStr(p->shape()) +
                             " vs " + ShapeStr(lead));
      }
    }
    total_last += p->dim(p->rank() - 1);
  }
  Shape out_shape = lead;
  out_shape.back() = total_last;
  auto out = Tensor::New(out_shape);
  const int64_t rows = NumElements(lead) / lead.back();
  int64_t offset = 0;
  for (const auto &p : parts) {
    const int64_t width = p->dim(p->rank() - 1);
    for (int64_t r = 0; r < rows; ++r) {
      std::memcpy(out->data() + r * total_last + offset,
                  p->data() + r * width, sizeof(double) * width);
    }
    offset += width;
  }
  bool track = GradEnabled();
  if (track) {
    bool any = false;
    for (const auto &p : parts) any = any || p->requires_grad();
    track = any;
  }
  if (track) {
    out->set_requires_grad(true);
    for (const auto &p : parts) out->AddParent(p);
    out->SetBackward([rows, total_last](Tensor &self) {
      const double *gy = self.grad_values().data();
      int64_t off = 0;
      for (const auto &p : self.parents()) {
        const int64_t width = p->dim(p->rank() - 1);
        if (p->requires_grad()) {
          double *gp = p->grad();
          for (int64_t r = 0; r < rows; ++r) {
            const double *src = gy + r * total_last + off;
            double *dst = gp + r * width;
            for (int64_t j = 0; j < width; ++j) dst[j] += src[j];
          }
        }
        off += width;
      }
    });
  }
  return out;
}

TensorPtr Reshape(const TensorPtr &x, Shape shape) {
  if (NumElements(shape) != x->size()) {
    throw DimensionError("reshape: " + ShapeStr(x->shape()) + " to " +
                         ShapeStr(shape) + " changes element count");
  }
  auto out = Tensor::FromData(std::move(shape), x->values());
  if (AnyRequiresGrad({x})) {
    Attach(out, {x}, [](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (!x_in->requires_grad()) return;
      const double *gy = self.grad_values().data();
      double *gx = x_in->grad();
      for (int64_t i = 0; i < self.size(); ++i) gx[i] += gy[i];
    });
  }
  return out;
}

TensorPtr FlattenFreqTime(const TensorPtr &x) {
  ExpectRank(x, 4, "flatten_freq_time");
  const int batch = x->dim(0), ch = x->dim(1), freq = x->dim(2),
            time = x->dim(3);
  auto out = Tensor::New({batch, time, freq * ch});
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < ch; ++c) {
      for (int f = 0; f < freq; ++f) {
        const double *src =
            x->data() +
            ((static_cast<int64_t>(b) * ch + c) * freq + f) * time;
        for (int t = 0; t < time; ++t) {
          out->data()[(static_cast<int64_t>(b) * time + t) * freq * ch +
                      f * ch + c] = src[t];
        }
      }
    }
  }
  if (AnyRequiresGrad({x})) {
    Attach(out, {x}, [batch, ch, freq, time](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (!x_in->requires_grad()) return;
      const double *gy = self.grad_values().data();
      double *gx = x_in->grad();
      for (int b = 0; b < batch; ++b) {
        for (int c = 0; c < ch; ++c) {
          for (int f = 0; f < freq; ++f) {
            double *dst =
                gx + ((static_cast<int64_t>(b) * ch + c) * freq + f) * time;
            for (int t = 0; t < time; ++t) {
              dst[t] += gy[(static_cast<int64_t>(b) * time + t) * freq * ch +
                           f * ch + c];
            }
          }
        }
      }
    });
  }
  return out;
}

TensorPtr Transpose12(const TensorPtr &x) {
  ExpectRank(x, 3, "transpose12");
  const int b = x->dim(0), t = x->dim(1), m = x->dim(2);
  auto out = Tensor::New({b, m, t});
  for (int i = 0; i < b; ++i) {
    const double *src = x->data() + static_cast<int64_t>(i) * t * m;
    double *dst = out->data() + static_cast<int64_t>(i) * t * m;
    for (int a = 0; a < t; ++a) {
      for (int c = 0; c < m; ++c) {
        dst[static_cast<int64_t>(c) * t + a] =
            src[static_cast<int64_t>(a) * m + c];
      }
    }
  }
  if (AnyRequiresGrad({x})) {
    Attach(out, {x}, [b, t, m](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (!x_in->requires_grad()) return;
      const double *gy = self.grad_values().data();
      double *gx = x_in->grad();
      for (int i = 0; i < b; ++i) {
        const double *src = gy + static_cast<int64_t>(i) * t * m;
        double *dst = gx + static_cast<int64_t>(i) * t * m;
        for (int c = 0; c < m; ++c) {
          for (int a = 0; a < t; ++a) {
            dst[static_cast<int64_t>(a) * m + c] +=
                src[static_cast<int64_t>(c) * t + a];
          }
        }
      }
    });
  }
  return out;
}

TensorPtr Softmax(const TensorPtr &x, double temperature) {
  if (!(temperature > 0.0)) {
    throw ConfigError("softmax: temperature must be positive, got " +
                      std::to_string(temperature));
  }
  if (x->rank() < 1) throw DimensionError("softmax: scalar input");
  const int n = x->dim(x->rank() - 1);
  const int64_t rows = x->size() / n;
  auto out = Tensor::New(x->shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double *src = x->data() + r * n;
    double *dst = out->data() + r * n;
    double max_v = src[0];
    for (int j = 1; j < n; ++j) max_v = std::max(max_v, src[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      dst[j] = std::exp((src[j] - max_v) / temperature);
      sum += dst[j];
    }
    for (int j = 0; j < n; ++j) dst[j] /= sum;
  }
  out->CheckFinite("softmax");
  if (AnyRequiresGrad({x})) {
    Attach(out, {x}, [n, rows, temperature](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (!x_in->requires_grad()) return;
      const double *gy = self.grad_values().data();
      const double *y = self.data();
      double *gx = x_in->grad();
      for (int64_t r = 0; r < rows; ++r) {
        const double *yr = y + r * n;
        const double *gr = gy + r * n;
        double dot = 0.0;
        for (int j = 0; j < n; ++j) dot += yr[j] * gr[j];
        for (int j = 0; j < n; ++j) {
          gx[r * n + j] += yr[j] * (gr[j] - dot) / temperature;
        }
      }
    });
  }
  return out;
}

TensorPtr TimeMax(const TensorPtr &x) {
  ExpectRank(x, 3, "time_max");
  const int batch = x->dim(0), steps = x->dim(1), dim = x->dim(2);
  auto out = Tensor::New({batch, dim});
  auto argmax = std::make_shared<std::vector<int32_t>>(
      static_cast<size_t>(batch) * dim);
  for (int b = 0; b < batch; ++b) {
    const double *base = x->data() + static_cast<int64_t>(b) * steps * dim;
    double *dst = out->data() + static_cast<int64_t>(b) * dim;
    int32_t *arg = argmax->data() + static_cast<int64_t>(b) * dim;
    for (int j = 0; j < dim; ++j) {
      double best = base[j];
      int32_t best_t = 0;
      for (int t = 1; t < steps; ++t) {
        const double v = base[static_cast<int64_t>(t) * dim + j];
        if (v > best) {
          best = v;
          best_t = t;
        }
      }
      dst[j] = best;
      arg[j] = best_t;
    }
  }
  if (AnyRequiresGrad({x})) {
    Attach(out, {x}, [argmax, batch, steps, dim](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (!x_in->requires_grad()) return;
      const double *gy = self.grad_values().data();
      double *gx = x_in->grad();
      for (int b = 0; b < batch; ++b) {
        const int32_t *arg = argmax->data() + static_cast<int64_t>(b) * dim;
        for (int j = 0; j < dim; ++j) {
          gx[(static_cast<int64_t>(b) * steps + arg[j]) * dim + j] +=
              gy[static_cast<int64_t>(b) * dim + j];
        }
      }
    });
  }
  return out;
}

TensorPtr Scale(const TensorPtr &x, double c) {
  auto out = Tensor::New(x->shape());
  for (int64_t i = 0; i < x->size(); ++i) out->data()[i] = x->data()[i] * c;
  out->CheckFinite("scale");
  if (AnyRequiresGrad({x})) {
    Attach(out, {x}, [c](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (!x_in->requires_grad()) return;
      const double *gy = self.grad_values().data();
      double *gx = x_in->grad();
      for (int64_t i = 0; i < self.size(); ++i) gx[i] += gy[i] * c;
    });
  }
  return out;
}

TensorPtr Add(const TensorPtr &a, const TensorPtr &b) {
  if (a->shape() != b->shape()) {
    throw DimensionError("add: " + ShapeStr(a->shape()) + " vs " +
                         ShapeStr(b->shape()));
  }
  auto out = Tensor::New(a->shape());
  for (int64_t i = 0; i < a->size(); ++i) {
    out->data()[i] = a->data()[i] + b->data()[i];
  }
  out->CheckFinite("add");
  if (AnyRequiresGrad({a, b})) {
    Attach(out, {a, b}, [](Tensor &self) {
      const double *gy = self.grad_values().data();
      for (const auto &p : self.parents()) {
        if (!p->requires_grad()) continue;
        double *gp = p->grad();
        for (int64_t i = 0; i < self.size(); ++i) gp[i] += gy[i];
      }
    });
  }
  return out;
}

TensorPtr Mul(const TensorPtr &a, const TensorPtr &b) {
  if (a->shape() != b->shape()) {
    throw DimensionError("mul: " + ShapeStr(a->shape()) + " vs " +
                         ShapeStr(b->shape()));
  }
  auto out = Tensor::New(a->shape());
  for (int64_t i = 0; i < a->size(); ++i) {
    out->data()[i] = a->data()[i] * b->data()[i];
  }
  out->CheckFinite("mul");
  if (AnyRequiresGrad({a, b})) {
    Attach(out, {a, b}, [](Tensor &self) {
      const TensorPtr &a_in = self.parents()[0];
      const TensorPtr &b_in = self.parents()[1];
      const double *gy = self.grad_values().data();
      if (a_in->requires_grad()) {
        double *ga = a_in->grad();
        for (int64_t i = 0; i < self.size(); ++i) {
          ga[i] += gy[i] * b_in->data()[i];
        }
      }
      if (b_in->requires_grad()) {
        double *gb = b_in->grad();
        for (int64_t i = 0; i < self.size(); ++i) {
          gb[i] += gy[i] * a_in->data()[i];
        }
      }
    });
  }
  return out;
}

TensorPtr WeightedSum(const TensorPtr &x, const std::vector<double> &weights) {
  if (static_cast<int64_t>(weights.size()) != x->size()) {
    throw DimensionError("weighted_sum: weight count mismatch");
  }
  double sum = 0.0;
  for (int64_t i = 0; i < x->size(); ++i) sum += x->data()[i] * weights[i];
  auto out = Tensor::Scalar(sum);
  out->CheckFinite("weighted_sum");
  if (AnyRequiresGrad({x})) {
    auto w = std::make_shared<std::vector<double>>(weights);
    Attach(out, {x}, [w](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (!x_in->requires_grad()) return;
      const double g0 = self.grad_values()[0];
      double *gx = x_in->grad();
      for (int64_t i = 0; i < x_in->size(); ++i) gx[i] += g0 * (*w)[i];
    });
  }
  return out;
}

TensorPtr SoftmaxCrossEntropy(const TensorPtr &logits,
                              const std::vector<int> &labels,
                              std::vector<double> *probs_out) {
  ExpectRank(logits, 2, "softmax_cross_entropy");
  const int batch = logits->dim(0), n = logits->dim(1);
  if (static_cast<int>(labels.size()) != batch) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(batch) +
                         " rows vs " + std::to_string(labels.size()) +
                         " labels");
  }
  for (int lab : labels) {
    if (lab < 0 || lab >= n) {
      throw DimensionError("softmax_cross_entropy: label " +
                           std::to_string(lab) + " out of range [0," +
                           std::to_string(n) + ")");
    }
  }
  auto probs = std::make_shared<std::vector<double>>(
      static_cast<size_t>(logits->size()));
  double loss = 0.0;
  for (int b = 0; b < batch; ++b) {
    const double *src = logits->data() + static_cast<int64_t>(b) * n;
    double *p = probs->data() + static_cast<int64_t>(b) * n;
    double max_v = src[0];
    for (int j = 1; j < n; ++j) max_v = std::max(max_v, src[j]);
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
      p[j] = std::exp(src[j] - max_v);
      sum += p[j];
    }
    for (int j = 0; j < n; ++j) p[j] /= sum;
    loss -= src[labels[static_cast<size_t>(b)]] - max_v - std::log(sum);
  }
  loss /= batch;
  if (probs_out != nullptr) *probs_out = *probs;
  auto out = Tensor::Scalar(loss);
  out->CheckFinite("softmax_cross_entropy");
  if (AnyRequiresGrad({logits})) {
    auto labs = std::make_shared<std::vector<int>>(labels);
    Attach(out, {logits}, [probs, labs, batch, n](Tensor &self) {
      const TensorPtr &x_in = self.parents()[0];
      if (!x_in->requires_grad()) return;
      const double g0 = self.grad_values()[0] / batch;
      double *gx = x_in->grad();
      for (int b = 0; b < batch; ++b) {
        const double *p = probs->data() + static_cast<int64_t>(b) * n;
        double *g = gx + static_cast<int64_t>(b) * n;
        const int lab = (*labs)[static_cast<size_t>(b)];
        for (int j = 0; j < n; ++j) {
          g[j] += g0 * (p[j] - (j == lab ? 1.0 : 0.0));
        }
      }
    });
  }
  return out;
}

}  // namespace nn
}  // namespace asc
