// asc/tensor.h

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

#ifndef ASC_TENSOR_H_
#define ASC_TENSOR_H_

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "asc/error.h"

namespace asc {
namespace nn {

using Shape = std::vector<int>;

int64_t NumElements(const Shape &shape);
std::string ShapeStr(const Shape &shape);

class Tensor;
using TensorPtr = std::shared_ptr<Tensor>;

// Dense row-major tensor of doubles carrying an optional gradient and, when
// produced by an op with gradient tracking enabled, the edge back into the
// computation graph. Ops record a backward closure on the output node;
// Backward() runs the closures in reverse topological order.
class Tensor {
 public:
  static TensorPtr New(Shape shape, bool requires_grad = false);
  static TensorPtr FromData(Shape shape, std::vector<double> values,
                            bool requires_grad = false);
  static TensorPtr Scalar(double value);

  const Shape &shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }

  double *data() { return data_.data(); }
  const double *data() const { return data_.data(); }
  std::vector<double> &values() { return data_; }
  const std::vector<double> &values() const { return data_; }
  double item() const;  // scalar tensors only

  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool v) { requires_grad_ = v; }

  // Lazily allocated, zero-initialized gradient of the same extent.
  double *grad();
  const std::vector<double> &grad_values() const { return grad_; }
  bool has_grad() const { return !grad_.empty(); }
  void ZeroGrad();

  // Graph edges; used by ops only.
  void AddParent(TensorPtr parent) { parents_.push_back(std::move(parent)); }
  void SetBackward(std::function<void(Tensor &)> fn) {
    backward_ = std::move(fn);
  }
  const std::vector<TensorPtr> &parents() const { return parents_; }

  // Throws NumericError naming `op` if any value is NaN/Inf.
  void CheckFinite(const char *op) const;

 private:
  Tensor() = default;

  Shape shape_;
  std::vector<double> data_;
  std::vector<double> grad_;
  bool requires_grad_ = false;
  std::vector<TensorPtr> parents_;
  std::function<void(Tensor &)> backward_;

  friend void Backward(const TensorPtr &root);
};

// Reverse-mode sweep from a scalar root; seeds d(root)/d(root) = 1.
void Backward(const TensorPtr &root);

// Gradient-tracking mode. Ops skip graph recording while disabled, so
// intermediate activations free as soon as the forward pass drops them.
bool GradEnabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard &) = delete;
  NoGradGuard &operator=(const NoGradGuard &) = delete;

 private:
  bool prev_;
};

// Finite checks after every op (on by default). The hot training loop keeps
// them on; the flag exists for benchmarks.
bool FiniteChecksEnabled();
void SetFiniteChecks(bool enabled);

}  // namespace nn
}  // namespace asc

#endif  // ASC_TENSOR_H_
