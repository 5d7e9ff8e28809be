// src/optim.cc

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

#include "asc/optim.h"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace asc {
namespace nn {

TensorPtr ParamStore::Create(const std::string &name, Shape shape) {
  if (slots_.count(name)) {
    throw ConfigError("parameter slot '" + name + "' already exists");
  }
  auto t = Tensor::New(std::move(shape), /*requires_grad=*/true);
  slots_[name] = t;
  return t;
}

TensorPtr ParamStore::Get(const std::string &name) const {
  auto it = slots_.find(name);
  if (it == slots_.end()) {
    throw ConfigError("no parameter slot named '" + name + "'");
  }
  return it->second;
}

bool ParamStore::Has(const std::string &name) const {
  return slots_.count(name) > 0;
}

void ParamStore::ZeroGrads() {
  for (auto &[name, t] : slots_) t->ZeroGrad();
}

int64_t ParamStore::TotalParams() const {
  int64_t n = 0;
  for (const auto &[name, t] : slots_) n += t->size();
  return n;
}

void AdamState::Step(ParamStore &params, double lr) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (auto &[name, t] : params.slots()) {
    if (!t->has_grad()) {
      throw Error("adam: no gradient populated for slot '" + name + "'");
    }
    auto &m = m_[name];
    auto &v = v_[name];
    if (m.empty()) m.assign(static_cast<size_t>(t->size()), 0.0);
    if (v.empty()) v.assign(static_cast<size_t>(t->size()), 0.0);
    const double *g = t->grad_values().data();
    double *theta = t->data();
    for (int64_t i = 0; i < t->size(); ++i) {
      m[static_cast<size_t>(i)] =
          cfg_.beta1 * m[static_cast<size_t>(i)] + (1.0 - cfg_.beta1) * g[i];
      v[static_cast<size_t>(i)] = cfg_.beta2 * v[static_cast<size_t>(i)] +
                                  (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[static_cast<size_t>(i)] / bc1;
      const double v_hat = v[static_cast<size_t>(i)] / bc2;
      theta[i] -= lr * m_hat / (std::sqrt(v_hat) + cfg_.eps);
    }
  }
  for (auto &[name, t] : params.slots()) t->ZeroGrad();
}

double GlobalGradNorm(const ParamStore &params) {
  double sumsq = 0.0;
  for (const auto &[name, t] : params.slots()) {
    for (double g : t->grad_values()) sumsq += g * g;
  }
  return std::sqrt(sumsq);
}

void ScaleGrads(ParamStore &params, double factor) {
  for (auto &[name, t] : params.slots()) {
    if (!t->has_grad()) continue;
    double *g = t->grad();
    for (int64_t i = 0; i < t->size(); ++i) g[i] *= factor;
  }
}

void InitUniformFanIn(Tensor *t, int fan_in, Rng *rng) {
  const double k = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (int64_t i = 0; i < t->size(); ++i) {
    t->data()[i] = rng->Uniform(-k, k);
  }
}

void InitGauss(Tensor *t, double stddev, Rng *rng) {
  for (int64_t i = 0; i < t->size(); ++i) {
    t->data()[i] = rng->Gauss() * stddev;
  }
}

FdReport FiniteDiffCheck(const std::function<TensorPtr()> &loss_builder,
                         ParamStore &params, const FdOptions &opts) {
  params.ZeroGrads();
  auto loss = loss_builder();
  Backward(loss);

  std::map<std::string, std::vector<double>> analytic;
  for (const auto &[name, t] : params.slots()) {
    analytic[name] = t->grad_values();
    if (analytic[name].empty()) {
      analytic[name].assign(static_cast<size_t>(t->size()), 0.0);
    }
  }
  if (!opts.corrupt_slot.empty()) {
    auto it = analytic.find(opts.corrupt_slot);
    if (it == analytic.end()) {
      throw ConfigError("gradcheck: unknown slot '" + opts.corrupt_slot + "'");
    }
    it->second[0] += 1.0;
  }

  FdReport report;
  NoGradGuard no_grad;
  for (auto &[name, t] : params.slots()) {
    const auto &g = analytic[name];
    std::vector<int64_t> coords(static_cast<size_t>(t->size()));
    std::iota(coords.begin(), coords.end(), 0);
    if (t->size() > opts.max_coords_per_slot) {
      // The largest-|gradient| coordinates; ties by index for determinism.
      std::sort(coords.begin(), coords.end(), [&g](int64_t a, int64_t b) {
        const double ga = std::fabs(g[static_cast<size_t>(a)]);
        const double gb = std::fabs(g[static_cast<size_t>(b)]);
        if (ga != gb) return ga > gb;
        return a < b;
      });
      coords.resize(static_cast<size_t>(opts.max_coords_per_slot));
    }

    FdSlotReport slot;
    slot.name = name;
    slot.coords_checked = static_cast<int64_t>(coords.size());
    for (int64_t c : coords) {
      double *theta = t->data() + c;
      const double saved = *theta;
      const double h = opts.epsilon * std::max(1.0, std::fabs(saved));
      *theta = saved + h;
      const double up = loss_builder()->item();
      *theta = saved - h;
      const double down = loss_builder()->item();
      *theta = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = g[static_cast<size_t>(c)];
      const double rel = std::fabs(a - numeric) /
                         std::max({std::fabs(a), std::fabs(numeric), 1e-12});
      if (rel >= slot.max_rel_err) {
        slot.max_rel_err = rel;
        slot.worst_coord = c;
        slot.analytic = a;
        slot.numeric = numeric;
      }
    }
    slot.passed = slot.max_rel_err < opts.tolerance;
    report.worst_rel_err = std::max(report.worst_rel_err, slot.max_rel_err);
    report.all_passed = report.all_passed && slot.passed;
    report.slots.push_back(std::move(slot));
  }
  params.ZeroGrads();
  return report;
}

}  // namespace nn
}  // namespace asc
