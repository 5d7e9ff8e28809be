// asc/manifest.h

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

#ifndef ASC_MANIFEST_H_
#define ASC_MANIFEST_H_

#include <string>
#include <vector>

#include "asc/logmel.h"

namespace asc {
namespace features {

// One row of `clip_id,channel,class_index,path`; path points at a WAV or a
// cached .afc feature file.
struct ManifestEntry {
  std::string clip_id;
  int channel = 0;
  int class_index = 0;
  std::string path;
};

std::vector<ManifestEntry> ReadManifest(const std::string &path);
void WriteManifest(const std::string &path,
                   const std::vector<ManifestEntry> &entries);

// Ground-truth event row for the synthetic corpus:
// `clip_id,event_type,onset_s,offset_s`.
struct EventTruth {
  std::string clip_id;
  std::string event_type;
  double onset = 0.0;
  double offset = 0.0;
};

std::vector<EventTruth> ReadEvents(const std::string &path);
void WriteEvents(const std::string &path,
                 const std::vector<EventTruth> &events);

struct CacheResult {
  int entries = 0;
  int skipped = 0;  // unreadable clips, excluded from the manifest
};

// Extracts one .afc file per (clip, channel) for every `<split>_manifest.csv`
// found under data_dir, writing `<out_dir>/<split>/<clip>_ch<k>.afc` plus a
// cache manifest per split. Existing files are reused, so reruns are
// byte-identical. Unreadable clips are skipped with a warning.
CacheResult CacheFeatures(const std::string &data_dir,
                          const std::string &out_dir,
                          const FeatureConfig &cfg);

// Names of the splits with a manifest present under dir.
std::vector<std::string> SplitsInDir(const std::string &dir);

}  // namespace features
}  // namespace asc

#endif  // ASC_MANIFEST_H_
