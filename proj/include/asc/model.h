// asc/model.h

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

#ifndef ASC_MODEL_H_
#define ASC_MODEL_H_

#include <map>
#include <string>
#include <vector>

#include "asc/optim.h"
#include "asc/rng.h"
#include "asc/tensor.h"

namespace asc {
namespace model {

struct ConvBlockSpec {
  std::vector<int> filters;  // one conv (3x3, stride 1, same) per entry
  int pool_h = 2, pool_w = 2;
};

// The `full` profile is the five-block VGG-style stack ending in (512, 2, T/8)
// with a 256-unit BiLSTM and 512-unit classifier; `toy` shrinks it to two
// blocks (16/32 filters), a 32-unit BiLSTM and a 64-unit classifier so the
// whole pipeline trains in minutes on a CPU.
struct ModelConfig {
  std::string profile = "toy";
  int n_mels = 64;
  int classes = 9;
  int heads = 6;        // M
  double sigma = 0.2;   // attention temperature
  int lstm_hidden = 0;  // 0 = profile default
  int classifier_hidden = 0;
  double dropout_s = 0.3;       // on the utterance vector s
  double dropout_hidden = 0.3;  // in the classifier hidden layers
  std::string pooling = "attention";  // attention | maxpool
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;
  uint64_t init_seed = 1;

  std::vector<ConvBlockSpec> Blocks() const;
  int LstmHidden() const;
  int ClassifierHidden() const;
  int FeatureDim() const { return 2 * LstmHidden(); }  // p
  int PooledDim() const;  // M*p under attention, p under maxpool
  int MinFrames() const;  // product of the time pooling factors
  void Validate() const;
};

struct ForwardOptions {
  bool train = false;
  // Gradcheck needs train-mode statistics without the running-buffer side
  // effect.
  bool update_batchnorm = true;
  Rng *rng = nullptr;  // required when train and any dropout rate > 0
};

struct BlockShape {
  int ch = 0, freq = 0, time = 0;
};

struct ModelOutput {
  nn::TensorPtr logits;             // (B, N)
  std::vector<double> probs;        // row-major (B, N), softmax of logits
  nn::TensorPtr features;           // H: (B, T, p)
  nn::TensorPtr scores;             // (B, M, T); null under maxpool
  nn::TensorPtr pooled;             // s: (B, M*p) or (B, p)
  std::vector<BlockShape> shape_trace;  // input + after every pooling stage
};

class Model {
 public:
  explicit Model(const ModelConfig &cfg);

  // x: (B, 1, n_mels, frames).
  ModelOutput Forward(const nn::TensorPtr &x, const ForwardOptions &opts);

  nn::ParamStore &params() { return params_; }
  std::map<std::string, nn::TensorPtr> &buffers() { return buffers_; }
  const ModelConfig &config() const { return cfg_; }

 private:
  ModelConfig cfg_;
  nn::ParamStore params_;
  // Batchnorm running statistics; serialized with checkpoints but not
  // touched by the optimizer.
  std::map<std::string, nn::TensorPtr> buffers_;
};

}  // namespace model
}  // namespace asc

#endif  // ASC_MODEL_H_
