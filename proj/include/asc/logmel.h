// asc/logmel.h

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

#ifndef ASC_LOGMEL_H_
#define ASC_LOGMEL_H_

#include <string>
#include <vector>

#include "asc/error.h"

namespace asc {
namespace features {

struct FeatureConfig {
  int sample_rate = 16000;
  int n_mels = 64;
  double win_ms = 16.0;  // 256 samples at 16 kHz
  double hop_ms = 8.0;   // 128 samples at 16 kHz
  double fmin = 0.0;
  double fmax = 0.0;  // 0 = Nyquist
  double log_floor = 1e-10;
  bool per_band_mean = false;  // default subtracts one global scalar

  int WinSamples() const {
    return static_cast<int>(sample_rate * win_ms / 1000.0 + 0.5);
  }
  int HopSamples() const {
    return static_cast<int>(sample_rate * hop_ms / 1000.0 + 0.5);
  }
  double Fmax() const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }
};

// Mean-subtracted log-Mel matrix, row-major (n_mels, frames).
struct LogMel {
  int n_mels = 0;
  int frames = 0;
  std::vector<double> values;

  double At(int mel, int frame) const {
    return values[static_cast<size_t>(mel) * frames + frame];
  }
};

// Frames = ceil(samples / hop); reflective center padding of win/2 each side
// makes this total for any input of at least one window. 160000 samples at
// 16 ms / 8 ms framing give exactly 1250 frames.
int FrameCount(int64_t num_samples, int hop);

// Whole pipeline: framing, periodic Hann window, power spectrum, HTK mel
// filterbank spanning [fmin, fmax], natural log with floor, then mean
// subtraction (global scalar, or per band when configured).
LogMel ComputeLogMel(const std::vector<double> &samples,
                     const FeatureConfig &cfg);

// Radix-2 complex FFT, in-place over interleaved (re, im); n a power of two.
// Exposed for the DFT-oracle test.
void Fft(std::vector<double> *re, std::vector<double> *im);

// Triangular filterbank weights, row-major (n_mels, n_bins) with
// n_bins = n_fft/2 + 1; HTK mel scale m = 2595 log10(1 + f/700).
std::vector<double> MelFilterbank(int n_fft, int sample_rate, int n_mels,
                                  double fmin, double fmax);

double HzToMel(double hz);
double MelToHz(double mel);

// Feature cache entry: magic "AFC1", u32 n_mels, u32 frames, then
// n_mels * frames little-endian f32 row-major.
void WriteFeatureFile(const std::string &path, const LogMel &mel);
LogMel ReadFeatureFile(const std::string &path);

}  // namespace features
}  // namespace asc

#endif  // ASC_LOGMEL_H_
