// asc/dataset.h

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

#ifndef ASC_DATASET_H_
#define ASC_DATASET_H_

#include <string>
#include <vector>

#include "asc/logmel.h"
#include "asc/manifest.h"
#include "asc/rng.h"
#include "asc/tensor.h"

namespace asc {
namespace data {

// One training example: a single channel of a labeled clip.
struct SceneExample {
  std::string clip_id;
  int channel = 0;
  int class_index = 0;
  std::string path;  // wav or .afc
};

struct DatasetIndex {
  std::string split;
  int num_classes = 0;
  std::vector<SceneExample> examples;
  std::vector<std::vector<int>> by_class;  // example indices per class

  std::vector<int64_t> ClassCounts() const;
  int64_t MinClassCount() const;
};

// Groups manifest entries by class; channels are already expanded (one row
// per channel). Unknown labels and duplicate (clip, channel) rows are
// rejected.
DatasetIndex IndexDataset(const std::vector<features::ManifestEntry> &entries,
                          int num_classes, const std::string &split);

// Classes whose training count is below half the largest class count. On
// the DCASE Table 1 distribution this reproduces the six augmented classes.
std::vector<int> MinorityClasses(const DatasetIndex &index);

// Balanced epoch: every class contributes exactly min-class-count examples,
// freshly down-sampled, then the whole epoch is shuffled. Deterministic
// under the rng state.
std::vector<int> SampleEpoch(const DatasetIndex &index, Rng *rng);

struct AugmentResult {
  std::vector<double> samples;  // exactly 10 s
  double offset_a_sec = 0.0;    // chosen segment starts, in [0, 5]
  double offset_b_sec = 0.0;
};

// 5 s from each source clip (both >= 10 s, same class by contract),
// concatenated into a fresh 10 s clip. Offsets are uniform on [0, 5] s,
// quantized to whole samples.
AugmentResult AugmentPair(const std::vector<double> &clip_a,
                          const std::vector<double> &clip_b, int sample_rate,
                          Rng *rng);

// Resolves examples to mean-subtracted log-Mel matrices. WAV-backed entries
// go through the feature cache when cache_dir is set (computed on first
// touch); all outputs are rounded through f32 so cached and uncached runs
// match bit for bit.
class FeatureSource {
 public:
  FeatureSource(features::FeatureConfig cfg, std::string cache_dir,
                std::string split);

  features::LogMel Get(const SceneExample &example) const;
  std::vector<double> GetWaveform(const SceneExample &example) const;
  features::LogMel FromWaveform(const std::vector<double> &samples) const;
  const features::FeatureConfig &config() const { return cfg_; }

 private:
  features::FeatureConfig cfg_;
  std::string cache_dir_;
  std::string split_;
};

struct AugmentPolicy {
  double prob = 0.0;                // replacement probability per example
  std::vector<bool> is_minority;    // per class
  bool enabled = false;
};

struct Batch {
  nn::TensorPtr x;  // (B, 1, n_mels, frames)
  std::vector<int> labels;
  std::vector<int> example_indices;
};

// Fixed-size batches over an epoch order; the final partial batch is kept.
// Augmentation draws (decision, partner, offsets) come from the rng in
// example order, so batch composition is deterministic under a fixed seed.
class Minibatcher {
 public:
  Minibatcher(const DatasetIndex &index, std::vector<int> order,
              int batch_size, const FeatureSource *source,
              AugmentPolicy policy, Rng *rng);

  bool Next(Batch *out);
  int64_t NumBatches() const;

 private:
  const DatasetIndex &index_;
  std::vector<int> order_;
  int batch_size_;
  const FeatureSource *source_;
  AugmentPolicy policy_;
  Rng *rng_;
  int64_t cursor_ = 0;
};

}  // namespace data
}  // namespace asc

#endif  // ASC_DATASET_H_
