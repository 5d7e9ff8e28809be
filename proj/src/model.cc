// src/model.cc

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

#include "asc/model.h"

#include <algorithm>
#include <cmath>

#include "asc/ops.h"

namespace asc {
namespace model {

std::vector<ConvBlockSpec> ModelConfig::Blocks() const {
  if (profile == "full") {
    return {{{64, 64}, 2, 2},
            {{128, 128}, 2, 2},
            {{256, 256, 256}, 2, 2},
            {{512, 512, 512}, 2, 1},
            {{512, 512, 512}, 2, 1}};
  }
  if (profile == "toy") {
    return {{{16}, 2, 2}, {{32}, 2, 2}};
  }
  throw ConfigError("unknown model profile '" + profile + "'");
}

int ModelConfig::LstmHidden() const {
  if (lstm_hidden > 0) return lstm_hidden;
  return profile == "full" ? 256 : 32;
}

int ModelConfig::ClassifierHidden() const {
  if (classifier_hidden > 0) return classifier_hidden;
  return profile == "full" ? 512 : 64;
}

int ModelConfig::PooledDim() const {
  return pooling == "maxpool" ? FeatureDim() : heads * FeatureDim();
}

int ModelConfig::MinFrames() const {
  int factor = 1;
  for (const auto &block : Blocks()) factor *= block.pool_w;
  return factor;
}

void ModelConfig::Validate() const {
  if (heads < 1) throw ConfigError("model.heads must be >= 1");
  if (!(sigma > 0.0)) throw ConfigError("model.sigma must be > 0");
  if (classes < 2) throw ConfigError("model.classes must be >= 2");
  if (n_mels < 1) throw ConfigError("model.n_mels must be >= 1");
  if (pooling != "attention" && pooling != "maxpool") {
    throw ConfigError("model.pooling must be 'attention' or 'maxpool', got '" +
                      pooling + "'");
  }
  int freq = n_mels;
  for (const auto &block : Blocks()) {
    if (freq < block.pool_h) {
      throw ConfigError("model.n_mels too small for the conv stack");
    }
    freq /= block.pool_h;
  }
  Blocks();  // validates the profile name
}

Model::Model(const ModelConfig &cfg) : cfg_(cfg) {
  cfg_.Validate();
  Rng rng(cfg_.init_seed);

  int in_ch = 1;
  int conv_idx = 0;
  for (const auto &block : cfg_.Blocks()) {
    for (int filters : block.filters) {
      ++conv_idx;
      const std::string id = std::to_string(conv_idx);
      auto w = params_.Create("conv" + id + ".weight", {filters, in_ch, 3, 3});
      nn::InitUniformFanIn(w.get(), in_ch * 9, &rng);
      auto gamma = params_.Create("bn" + id + ".gamma", {filters});
      std::fill(gamma->values().begin(), gamma->values().end(), 1.0);
      params_.Create("bn" + id + ".beta", {filters});
      auto rm = nn::Tensor::New({filters});
      auto rv = nn::Tensor::New({filters});
      std::fill(rv->values().begin(), rv->values().end(), 1.0);
      buffers_["bn" + id + ".running_mean"] = rm;
      buffers_["bn" + id + ".running_var"] = rv;
      in_ch = filters;
    }
  }

  int freq = cfg_.n_mels;
  for (const auto &block : cfg_.Blocks()) freq /= block.pool_h;
  const int lstm_in = freq * in_ch;
  const int hidden = cfg_.LstmHidden();
  for (const char *dir : {"fw", "bw"}) {
    const std::string prefix = std::string("lstm.") + dir;
    auto wx = params_.Create(prefix + ".wx", {lstm_in, 4 * hidden});
    nn::InitUniformFanIn(wx.get(), lstm_in, &rng);
    auto wh = params_.Create(prefix + ".wh", {hidden, 4 * hidden});
    nn::InitUniformFanIn(wh.get(), hidden, &rng);
    auto bias = params_.Create(prefix + ".bias", {4 * hidden});
    // Forget gate opens at init.
    for (int i = 0; i < hidden; ++i) bias->data()[hidden + i] = 1.0;
  }

  const int p = cfg_.FeatureDim();
  if (cfg_.pooling == "attention") {
    auto v = params_.Create("attn.v", {cfg_.heads, p});
    nn::InitGauss(v.get(), 1.0 / std::sqrt(static_cast<double>(p)), &rng);
  }

  const int pooled = cfg_.PooledDim();
  const int cls_hidden = cfg_.ClassifierHidden();
  auto w1 = params_.Create("cls.fc1.weight", {pooled, cls_hidden});
  nn::InitUniformFanIn(w1.get(), pooled, &rng);
  params_.Create("cls.fc1.bias", {cls_hidden});
  auto w2 = params_.Create("cls.fc2.weight", {cls_hidden, cls_hidden});
  nn::InitUniformFanIn(w2.get(), cls_hidden, &rng);
  params_.Create("cls.fc2.bias", {cls_hidden});
  auto w3 = params_.Create("cls.out.weight", {cls_hidden, cfg_.classes});
  nn::InitUniformFanIn(w3.get(), cls_hidden, &rng);
  params_.Create("cls.out.bias", {cfg_.classes});
}

ModelOutput Model::Forward(const nn::TensorPtr &x, const ForwardOptions &opts) {
  if (x->rank() != 4 || x->dim(1) != 1 || x->dim(2) != cfg_.n_mels) {
    throw DimensionError("model: expected input (B,1," +
                         std::to_string(cfg_.n_mels) + ",T), got " +
                         nn::ShapeStr(x->shape()));
  }
  if (x->dim(3) < cfg_.MinFrames()) {
    throw DimensionError("model: " + std::to_string(x->dim(3)) +
                         " frames is fewer than the " +
                         std::to_string(cfg_.MinFrames()) +
                         " required by the profile's time poolings");
  }
  const bool needs_rng =
      opts.train && (cfg_.dropout_s > 0.0 || cfg_.dropout_hidden > 0.0);
  if (needs_rng && opts.rng == nullptr) {
    throw ConfigError("model: train-mode forward needs an rng for dropout");
  }

  ModelOutput out;
  out.shape_trace.push_back({1, x->dim(2), x->dim(3)});

  nn::TensorPtr h = x;
  int conv_idx = 0;
  for (const auto &block : cfg_.Blocks()) {
    for (size_t i = 0; i < block.filters.size(); ++i) {
      ++conv_idx;
      const std::string id = std::to_string(conv_idx);
      h = nn::Conv2d(h, params_.Get("conv" + id + ".weight"), 1, 1, 1, 1);
      h = nn::BatchNorm2d(h, params_.Get("bn" + id + ".gamma"),
                          params_.Get("bn" + id + ".beta"),
                          buffers_.at("bn" + id + ".running_mean"),
                          buffers_.at("bn" + id + ".running_var"),
                          cfg_.bn_momentum, cfg_.bn_eps, opts.train,
                          opts.train && opts.update_batchnorm);
      h = nn::Relu(h);
    }
    h = nn::MaxPool2d(h, block.pool_h, block.pool_w, block.pool_h,
                      block.pool_w);
    out.shape_trace.push_back({h->dim(1), h->dim(2), h->dim(3)});
  }

  auto flat = nn::FlattenFreqTime(h);  // (B, T, freq*ch)
  auto fw = nn::Lstm(flat, params_.Get("lstm.fw.wx"),
                     params_.Get("lstm.fw.wh"), params_.Get("lstm.fw.bias"),
                     /*reverse=*/false);
  auto bw = nn::Lstm(flat, params_.Get("lstm.bw.wx"),
                     params_.Get("lstm.bw.wh"), params_.Get("lstm.bw.bias"),
                     /*reverse=*/true);
  out.features = nn::ConcatLast({fw, bw});  // (B, T, p)

  const int batch = out.features->dim(0);
  const int steps = out.features->dim(1);
  const int p = cfg_.FeatureDim();

  if (cfg_.pooling == "attention") {
    auto h2d = nn::Reshape(out.features, {batch * steps, p});
    auto head_logits =
        nn::Reshape(nn::MatMul(h2d, params_.Get("attn.v"), /*trans_b=*/true),
                    {batch, steps, cfg_.heads});
    out.scores = nn::Softmax(nn::Transpose12(head_logits), cfg_.sigma);
    auto summaries = nn::Bmm(out.scores, out.features);  // (B, M, p)
    out.pooled = nn::Reshape(summaries, {batch, cfg_.heads * p});
  } else {
    out.pooled = nn::TimeMax(out.features);
  }

  auto s = nn::Dropout(out.pooled, cfg_.dropout_s, opts.train, opts.rng);
  auto h1 = nn::Relu(nn::Linear(s, params_.Get("cls.fc1.weight"),
                                params_.Get("cls.fc1.bias")));
  h1 = nn::Dropout(h1, cfg_.dropout_hidden, opts.train, opts.rng);
  auto h2 = nn::Relu(nn::Linear(h1, params_.Get("cls.fc2.weight"),
                                params_.Get("cls.fc2.bias")));
  h2 = nn::Dropout(h2, cfg_.dropout_hidden, opts.train, opts.rng);
  out.logits = nn::Linear(h2, params_.Get("cls.out.weight"),
                          params_.Get("cls.out.bias"));

  {
    nn::NoGradGuard no_grad;
    auto probs = nn::Softmax(out.logits, 1.0);
    out.probs = probs->values();
  }
  return out;
}

}  // namespace model
}  // namespace asc
