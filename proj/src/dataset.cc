// src/dataset.cc

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

#include "asc/dataset.h"

#include <algorithm>
#include <filesystem>
#include <set>

#include "asc/wav.h"

namespace fs = std::filesystem;

namespace asc {
namespace data {

std::vector<int64_t> DatasetIndex::ClassCounts() const {
  std::vector<int64_t> counts;
  counts.reserve(by_class.size());
  for (const auto &group : by_class) {
    counts.push_back(static_cast<int64_t>(group.size()));
  }
  return counts;
}

int64_t DatasetIndex::MinClassCount() const {
  int64_t min_count = -1;
  for (const auto &group : by_class) {
    const int64_t n = static_cast<int64_t>(group.size());
    if (min_count < 0 || n < min_count) min_count = n;
  }
  return min_count < 0 ? 0 : min_count;
}

DatasetIndex IndexDataset(const std::vector<features::ManifestEntry> &entries,
                          int num_classes, const std::string &split) {
  DatasetIndex index;
  index.split = split;
  index.num_classes = num_classes;
  index.by_class.assign(static_cast<size_t>(num_classes), {});
  std::set<std::pair<std::string, int>> seen;
  for (const auto &e : entries) {
    if (e.class_index < 0 || e.class_index >= num_classes) {
      throw DataError(split + " manifest: unknown class label " +
                      std::to_string(e.class_index) + " for clip " +
                      e.clip_id + " (expected 0.." +
                      std::to_string(num_classes - 1) + ")");
    }
    if (!seen.insert({e.clip_id, e.channel}).second) {
      throw DataError(split + " manifest: duplicate row for clip " +
                      e.clip_id + " channel " + std::to_string(e.channel));
    }
    SceneExample ex;
    ex.clip_id = e.clip_id;
    ex.channel = e.channel;
    ex.class_index = e.class_index;
    ex.path = e.path;
    index.by_class[static_cast<size_t>(e.class_index)].push_back(
        static_cast<int>(index.examples.size()));
    index.examples.push_back(std::move(ex));
  }
  return index;
}

std::vector<int> MinorityClasses(const DatasetIndex &index) {
  const auto counts = index.ClassCounts();
  int64_t max_count = 0;
  for (int64_t c : counts) max_count = std::max(max_count, c);
  std::vector<int> minority;
  for (size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] * 2 < max_count) minority.push_back(static_cast<int>(c));
  }
  return minority;
}

std::vector<int> SampleEpoch(const DatasetIndex &index, Rng *rng) {
  const int64_t min_count = index.MinClassCount();
  for (size_t c = 0; c < index.by_class.size(); ++c) {
    if (index.by_class[c].empty()) {
      throw ConfigError("epoch sampler: class " + std::to_string(c) +
                        " has no examples");
    }
  }
  std::vector<int> epoch;
  epoch.reserve(static_cast<size_t>(min_count) * index.by_class.size());
  for (const auto &group : index.by_class) {
    if (static_cast<int64_t>(group.size()) == min_count) {
      epoch.insert(epoch.end(), group.begin(), group.end());
    } else {
      // Partial Fisher-Yates: the first min_count entries are a uniform
      // without-replacement sample.
      std::vector<int> pool = group;
      for (int64_t i = 0; i < min_count; ++i) {
        const int64_t j =
            i + rng->UniformInt(static_cast<int64_t>(pool.size()) - i);
        std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
      }
      epoch.insert(epoch.end(), pool.begin(), pool.begin() + min_count);
    }
  }
  rng->Shuffle(&epoch);
  return epoch;
}

AugmentResult AugmentPair(const std::vector<double> &clip_a,
                          const std::vector<double> &clip_b, int sample_rate,
                          Rng *rng) {
  const int64_t ten_sec = static_cast<int64_t>(10) * sample_rate;
  const int64_t five_sec = ten_sec / 2;
  if (static_cast<int64_t>(clip_a.size()) < ten_sec ||
      static_cast<int64_t>(clip_b.size()) < ten_sec) {
    throw DataError("augment_pair: both source clips have to be >= 10 s");
  }
  const int64_t off_a = rng->UniformInt(five_sec + 1);
  const int64_t off_b = rng->UniformInt(five_sec + 1);
  AugmentResult result;
  result.offset_a_sec = static_cast<double>(off_a) / sample_rate;
  result.offset_b_sec = static_cast<double>(off_b) / sample_rate;
  result.samples.reserve(static_cast<size_t>(ten_sec));
  result.samples.insert(result.samples.end(),
                        clip_a.begin() + static_cast<int64_t>(off_a),
                        clip_a.begin() + off_a + five_sec);
  result.samples.insert(result.samples.end(),
                        clip_b.begin() + static_cast<int64_t>(off_b),
                        clip_b.begin() + off_b + five_sec);
  return result;
}

namespace {

bool EndsWith(const std::string &s, const std::string &suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

void RoundToF32(features::LogMel *mel) {
  for (double &v : mel->values) v = static_cast<float>(v);
}

}  // namespace

FeatureSource::FeatureSource(features::FeatureConfig cfg, std::string cache_dir,
                             std::string split)
    : cfg_(cfg), cache_dir_(std::move(cache_dir)), split_(std::move(split)) {
  if (!cache_dir_.empty()) {
    fs::create_directories(fs::path(cache_dir_) / split_);
  }
}

features::LogMel FeatureSource::Get(const SceneExample &example) const {
  if (EndsWith(example.path, ".afc")) {
    return features::ReadFeatureFile(example.path);
  }
  if (!cache_dir_.empty()) {
    const fs::path dst = fs::path(cache_dir_) / split_ /
                         (example.clip_id + "_ch" +
                          std::to_string(example.channel) + ".afc");
    if (!fs::exists(dst)) {
      features::WriteFeatureFile(dst.string(),
                                 FromWaveform(GetWaveform(example)));
    }
    return features::ReadFeatureFile(dst.string());
  }
  auto mel = FromWaveform(GetWaveform(example));
  return mel;
}

std::vector<double> FeatureSource::GetWaveform(
    const SceneExample &example) const {
  if (EndsWith(example.path, ".afc")) {
    throw DataError("no waveform available for cached example " +
                    example.clip_id);
  }
  auto clip = features::ReadWav(example.path);
  if (example.channel < 0 || example.channel >= clip.NumChannels()) {
    throw DataError(example.clip_id + ": channel " +
                    std::to_string(example.channel) + " not present in " +
                    example.path);
  }
  return std::move(clip.channels[static_cast<size_t>(example.channel)]);
}

features::LogMel FeatureSource::FromWaveform(
    const std::vector<double> &samples) const {
  auto mel = features::ComputeLogMel(samples, cfg_);
  RoundToF32(&mel);  // match the cached representation exactly
  return mel;
}

Minibatcher::Minibatcher(const DatasetIndex &index, std::vector<int> order,
                         int batch_size, const FeatureSource *source,
                         AugmentPolicy policy, Rng *rng)
    : index_(index),
      order_(std::move(order)),
      batch_size_(batch_size),
      source_(source),
      policy_(std::move(policy)),
      rng_(rng) {
  if (batch_size_ < 1) throw ConfigError("batch size must be >= 1");
}

int64_t Minibatcher::NumBatches() const {
  return (static_cast<int64_t>(order_.size()) + batch_size_ - 1) / batch_size_;
}

bool Minibatcher::Next(Batch *out) {
  if (cursor_ >= static_cast<int64_t>(order_.size())) return false;
  const int64_t end = std::min(cursor_ + batch_size_,
                               static_cast<int64_t>(order_.size()));
  const int b = static_cast<int>(end - cursor_);

  std::vector<features::LogMel> mels;
  mels.reserve(static_cast<size_t>(b));
  out->labels.clear();
  out->example_indices.clear();
  for (int64_t i = cursor_; i < end; ++i) {
    const int ex_idx = order_[static_cast<size_t>(i)];
    const SceneExample &ex = index_.examples[static_cast<size_t>(ex_idx)];
    bool augmented = false;
    if (policy_.enabled &&
        policy_.is_minority[static_cast<size_t>(ex.class_index)] &&
        rng_->Bernoulli(policy_.prob)) {
      const auto &group =
          index_.by_class[static_cast<size_t>(ex.class_index)];
      int partner = ex_idx;
      if (group.size() > 1) {
        do {
          partner = group[static_cast<size_t>(
              rng_->UniformInt(static_cast<int64_t>(group.size())))];
        } while (partner == ex_idx);
      }
      const auto wav_a = source_->GetWaveform(ex);
      const auto wav_b = source_->GetWaveform(
          index_.examples[static_cast<size_t>(partner)]);
      const auto spliced =
          AugmentPair(wav_a, wav_b, source_->config().sample_rate, rng_);
      mels.push_back(source_->FromWaveform(spliced.samples));
      augmented = true;
    }
    if (!augmented) mels.push_back(source_->Get(ex));
    out->labels.push_back(ex.class_index);
    out->example_indices.push_back(ex_idx);
  }

  const int n_mels = mels[0].n_mels, frames = mels[0].frames;
  for (size_t i = 1; i < mels.size(); ++i) {
    if (mels[i].n_mels != n_mels || mels[i].frames != frames) {
      const auto &ex = index_.examples[static_cast<size_t>(
          out->example_indices[i])];
      throw DataError("minibatcher: clip " + ex.clip_id + " has feature shape " +
                      std::to_string(mels[i].n_mels) + "x" +
                      std::to_string(mels[i].frames) + ", batch expects " +
                      std::to_string(n_mels) + "x" + std::to_string(frames));
    }
  }
  out->x = nn::Tensor::New({b, 1, n_mels, frames});
  for (int i = 0; i < b; ++i) {
    std::copy(mels[static_cast<size_t>(i)].values.begin(),
              mels[static_cast<size_t>(i)].values.end(),
              out->x->data() + static_cast<int64_t>(i) * n_mels * frames);
  }
  cursor_ = end;
  return true;
}

}  // namespace data
}  // namespace asc
