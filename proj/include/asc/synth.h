// asc/synth.h

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

#ifndef ASC_SYNTH_H_
#define ASC_SYNTH_H_

#include <string>
#include <vector>

#include "asc/manifest.h"
#include "asc/rng.h"

namespace asc {
namespace data {

// Synthetic scene corpus with ground-truth event intervals. Each class is a
// distinct subset of the event vocabulary; every clip carries at least one
// instance of each of its class's characteristic types, so classes are
// separable only through event occurrence patterns. A classless distractor
// event appears in any clip with distractor_prob and carries no label
// information.
struct SynthConfig {
  int classes = 9;
  int train_clips = 300;
  int dev_clips = 60;
  int eval_clips = 60;
  double clip_seconds = 8.0;
  int sample_rate = 16000;
  int events_per_class = 2;  // characteristic event types per class
  int extra_events_min = 1;  // extra instances beyond the guaranteed ones
  int extra_events_max = 4;
  double snr_db_min = 14.0;
  double snr_db_max = 26.0;
  double distractor_prob = 0.7;
  double noise_sigma = 0.01;
  uint64_t seed = 1;
};

struct SynthResult {
  int train_clips = 0;
  int dev_clips = 0;
  int eval_clips = 0;
};

// The 6 event prototypes followed by the distractor type.
const std::vector<std::string> &EventTypeNames();
int NumEventPrototypes();

// Characteristic event types per class: distinct k-subsets of the prototype
// set, picked by lexicographic stride. Throws if the vocabulary cannot give
// every class a unique subset.
std::vector<std::vector<int>> ClassEventTable(int classes,
                                              int events_per_class);

struct RenderedClip {
  std::vector<double> samples;
  std::vector<features::EventTruth> events;
};

RenderedClip RenderClip(const SynthConfig &cfg, int class_index,
                        const std::string &clip_id, Rng *rng);

// Writes wav/<clip_id>.wav, one manifest per split, and events.csv under
// out_dir. Identical seeds give identical corpora.
SynthResult GenerateCorpus(const SynthConfig &cfg, const std::string &out_dir);

}  // namespace data
}  // namespace asc

#endif  // ASC_SYNTH_H_
