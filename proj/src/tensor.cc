// src/tensor.cc

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

#include "asc/tensor.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>

namespace asc {
namespace nn {

namespace {
thread_local bool g_grad_enabled = true;
bool g_finite_checks = true;
}  // namespace

int64_t NumElements(const Shape &shape) {
  int64_t n = 1;
  for (int d : shape) n *= d;
  return n;
}

std::string ShapeStr(const Shape &shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ",";
    os << shape[i];
  }
  os << ")";
  return os.str();
}

TensorPtr Tensor::New(Shape shape, bool requires_grad) {
  for (int d : shape) {
    if (d <= 0) {
      throw DimensionError("tensor dimensions must be positive, got " +
                           ShapeStr(shape));
    }
  }
  auto t = TensorPtr(new Tensor());
  t->shape_ = std::move(shape);
  t->data_.assign(static_cast<size_t>(NumElements(t->shape_)), 0.0);
  t->requires_grad_ = requires_grad;
  return t;
}

TensorPtr Tensor::FromData(Shape shape, std::vector<double> values,
                           bool requires_grad) {
  if (NumElements(shape) != static_cast<int64_t>(values.size())) {
    throw DimensionError("value count " + std::to_string(values.size()) +
                         " does not match shape " + ShapeStr(shape));
  }
  auto t = New(std::move(shape), requires_grad);
  t->data_ = std::move(values);
  return t;
}

TensorPtr Tensor::Scalar(double value) { return FromData({1}, {value}); }

double Tensor::item() const {
  if (size() != 1) {
    throw DimensionError("item() on non-scalar tensor " + ShapeStr(shape_));
  }
  return data_[0];
}

double *Tensor::grad() {
  if (grad_.empty()) grad_.assign(data_.size(), 0.0);
  return grad_.data();
}

void Tensor::ZeroGrad() {
  std::fill(grad_.begin(), grad_.end(), 0.0);
}

void Tensor::CheckFinite(const char *op) const {
  if (!g_finite_checks) return;
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw NumericError(std::string("non-finite value produced by ") + op);
    }
  }
}

void Backward(const TensorPtr &root) {
  if (root->size() != 1) {
    throw DimensionError("Backward() expects a scalar root, got " +
                         ShapeStr(root->shape()));
  }
  // Iterative post-order DFS; recursion would overflow on long LSTM chains.
  std::vector<Tensor *> order;
  std::unordered_set<Tensor *> seen;
  std::vector<std::pair<Tensor *, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto &[node, next] = stack.back();
    if (next < node->parents_.size()) {
      Tensor *parent = node->parents_[next++].get();
      if (parent->requires_grad_ && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->grad()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Tensor *node = *it;
    if (node->backward_) node->backward_(*node);
  }
}

bool GradEnabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

bool FiniteChecksEnabled() { return g_finite_checks; }
void SetFiniteChecks(bool enabled) { g_finite_checks = enabled; }

}  // namespace nn
}  // namespace asc
