// asc/optim.h

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

#ifndef ASC_OPTIM_H_
#define ASC_OPTIM_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "asc/rng.h"
#include "asc/tensor.h"

namespace asc {
namespace nn {

// Named learnable parameters. std::map keeps iteration lexicographic, which
// pins the parameter visitation order everywhere (Adam, checkpoints,
// gradient checks).
class ParamStore {
 public:
  TensorPtr Create(const std::string &name, Shape shape);
  TensorPtr Get(const std::string &name) const;
  bool Has(const std::string &name) const;
  const std::map<std::string, TensorPtr> &slots() const { return slots_; }
  void ZeroGrads();
  int64_t TotalParams() const;

 private:
  std::map<std::string, TensorPtr> slots_;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Standard Adam with bias correction. Step() consumes and clears the
// gradients; a slot without a populated gradient is a consistency error.
class AdamState {
 public:
  explicit AdamState(AdamConfig cfg = AdamConfig()) : cfg_(cfg) {}

  void Step(ParamStore &params, double lr);

  int64_t step_count() const { return step_; }
  void set_step_count(int64_t t) { step_ = t; }
  const AdamConfig &config() const { return cfg_; }

  // Moment access for checkpointing; keyed like the ParamStore.
  std::map<std::string, std::vector<double>> &first_moments() { return m_; }
  std::map<std::string, std::vector<double>> &second_moments() { return v_; }

 private:
  AdamConfig cfg_;
  int64_t step_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

double GlobalGradNorm(const ParamStore &params);
void ScaleGrads(ParamStore &params, double factor);

// U(-k, k) with k = 1/sqrt(fan_in).
void InitUniformFanIn(Tensor *t, int fan_in, Rng *rng);
void InitGauss(Tensor *t, double stddev, Rng *rng);

struct FdOptions {
  double epsilon = 1e-5;     // step = epsilon * max(1, |theta|)
  double tolerance = 1e-4;   // rel-err threshold per slot
  int max_coords_per_slot = 8;
  std::string corrupt_slot;  // test hook: breaks this slot's analytic grad
};

struct FdSlotReport {
  std::string name;
  int64_t coords_checked = 0;
  double max_rel_err = 0.0;
  int64_t worst_coord = -1;
  double analytic = 0.0, numeric = 0.0;  // at the worst coordinate
  bool passed = false;
};

struct FdReport {
  std::vector<FdSlotReport> slots;
  double worst_rel_err = 0.0;
  bool all_passed = true;
};

// Central finite differences against the analytic gradients of
// loss_builder(), which must be pure and deterministic (dropout off or
// seed-pinned, batchnorm running updates disabled). Large slots check the
// coordinates with the largest |analytic gradient|; rel-err uses
// |a - n| / max(|a|, |n|, 1e-12).
FdReport FiniteDiffCheck(const std::function<TensorPtr()> &loss_builder,
                         ParamStore &params, const FdOptions &opts);

}  // namespace nn
}  // namespace asc

#endif  // ASC_OPTIM_H_
