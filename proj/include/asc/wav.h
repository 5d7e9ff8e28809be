// asc/wav.h

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

#ifndef ASC_WAV_H_
#define ASC_WAV_H_

#include <string>
#include <vector>

namespace asc {
namespace features {

struct AudioClip {
  int sample_rate = 0;
  // One waveform per channel, samples in [-1, 1); all channels equal length.
  std::vector<std::vector<double>> channels;

  int NumChannels() const { return static_cast<int>(channels.size()); }
  int64_t NumSamples() const {
    return channels.empty() ? 0 : static_cast<int64_t>(channels[0].size());
  }
  double DurationSec() const {
    return sample_rate > 0
               ? static_cast<double>(NumSamples()) / sample_rate
               : 0.0;
  }
};

// PCM 16-bit little-endian WAV, 1-4 channels. Samples scale by 1/32768,
// so int16 -32768 maps to exactly -1.0. Unknown RIFF chunks are skipped;
// a non-PCM format or unsupported bit depth raises IoError naming the
// offending chunk.
AudioClip ReadWav(const std::string &path);

// Writes PCM16; doubles are clamped to [-1, 1] and scaled by 32767.
void WriteWav(const std::string &path, const AudioClip &clip);

}  // namespace features
}  // namespace asc

#endif  // ASC_WAV_H_
