// src/logmel.cc

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

#include "asc/logmel.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace asc {
namespace features {

namespace {

bool IsPowerOfTwo(size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Reflect index into [0, n) without repeating the edge sample.
int64_t Reflect(int64_t i, int64_t n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

}  // namespace

void Fft(std::vector<double> *re, std::vector<double> *im) {
  const size_t n = re->size();
  if (!IsPowerOfTwo(n) || im->size() != n) {
    throw DimensionError("fft: size must be a power of two");
  }
  double *xr = re->data();
  double *xi = im->data();
  // Bit-reversal permutation.
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) {
      std::swap(xr[i], xr[j]);
      std::swap(xi[i], xi[j]);
    }
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const double wr = std::cos(ang), wi = std::sin(ang);
    for (size_t i = 0; i < n; i += len) {
      double cwr = 1.0, cwi = 0.0;
      for (size_t k = 0; k < len / 2; ++k) {
        const size_t a = i + k, b = i + k + len / 2;
        const double tr = xr[b] * cwr - xi[b] * cwi;
        const double ti = xr[b] * cwi + xi[b] * cwr;
        xr[b] = xr[a] - tr;
        xi[b] = xi[a] - ti;
        xr[a] += tr;
        xi[a] += ti;
        const double nwr = cwr * wr - cwi * wi;
        cwi = cwr * wi + cwi * wr;
        cwr = nwr;
      }
    }
  }
}

double HzToMel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double MelToHz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

std::vector<double> MelFilterbank(int n_fft, int sample_rate, int n_mels,
                                  double fmin, double fmax) {
  const int n_bins = n_fft / 2 + 1;
  const double mel_lo = HzToMel(fmin), mel_hi = HzToMel(fmax);
  // n_mels + 2 edge points; filter m spans [edge[m], edge[m+2]] with its
  // peak at edge[m+1].
  std::vector<double> edges(static_cast<size_t>(n_mels) + 2);
  for (int i = 0; i < n_mels + 2; ++i) {
    edges[static_cast<size_t>(i)] =
        MelToHz(mel_lo + (mel_hi - mel_lo) * i / (n_mels + 1));
  }
  std::vector<double> weights(static_cast<size_t>(n_mels) * n_bins, 0.0);
  for (int m = 0; m < n_mels; ++m) {
    const double lo = edges[static_cast<size_t>(m)];
    const double center = edges[static_cast<size_t>(m) + 1];
    const double hi = edges[static_cast<size_t>(m) + 2];
    for (int k = 0; k < n_bins; ++k) {
      const double f =
          static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
      double w = 0.0;
      if (f >= lo && f <= center && center > lo) {
        w = (f - lo) / (center - lo);
      } else if (f > center && f <= hi && hi > center) {
        w = (hi - f) / (hi - center);
      }
      weights[static_cast<size_t>(m) * n_bins + k] = w;
    }
  }
  return weights;
}

int FrameCount(int64_t num_samples, int hop) {
  return static_cast<int>((num_samples + hop - 1) / hop);
}

LogMel ComputeLogMel(const std::vector<double> &samples,
                     const FeatureConfig &cfg) {
  const int win = cfg.WinSamples();
  const int hop = cfg.HopSamples();
  const int64_t n = static_cast<int64_t>(samples.size());
  if (n < win) {
    throw DataError("log_mel: input of " + std::to_string(n) +
                    " samples is shorter than one window (" +
                    std::to_string(win) + ")");
  }
  if (!IsPowerOfTwo(static_cast<size_t>(win))) {
    throw ConfigError("log_mel: window of " + std::to_string(win) +
                      " samples is not a power of two");
  }
  const int frames = FrameCount(n, hop);
  const int n_bins = win / 2 + 1;
  const int pad = win / 2;

  // Periodic Hann.
  std::vector<double> window(static_cast<size_t>(win));
  for (int i = 0; i < win; ++i) {
    window[static_cast<size_t>(i)] =
        0.5 - 0.5 * std::cos(2.0 * M_PI * i / win);
  }

  const auto filterbank =
      MelFilterbank(win, cfg.sample_rate, cfg.n_mels, cfg.fmin, cfg.Fmax());

  LogMel out;
  out.n_mels = cfg.n_mels;
  out.frames = frames;
  out.values.assign(static_cast<size_t>(cfg.n_mels) * frames, 0.0);

  std::vector<double> re(static_cast<size_t>(win));
  std::vector<double> im(static_cast<size_t>(win));
  std::vector<double> power(static_cast<size_t>(n_bins));
  for (int t = 0; t < frames; ++t) {
    const int64_t start = static_cast<int64_t>(t) * hop - pad;
    for (int i = 0; i < win; ++i) {
      re[static_cast<size_t>(i)] =
          samples[static_cast<size_t>(Reflect(start + i, n))] *
          window[static_cast<size_t>(i)];
      im[static_cast<size_t>(i)] = 0.0;
    }
    Fft(&re, &im);
    for (int k = 0; k < n_bins; ++k) {
      power[static_cast<size_t>(k)] =
          re[static_cast<size_t>(k)] * re[static_cast<size_t>(k)] +
          im[static_cast<size_t>(k)] * im[static_cast<size_t>(k)];
    }
    for (int m = 0; m < cfg.n_mels; ++m) {
      const double *w = filterbank.data() + static_cast<size_t>(m) * n_bins;
      double e = 0.0;
      for (int k = 0; k < n_bins; ++k) e += w[k] * power[static_cast<size_t>(k)];
      out.values[static_cast<size_t>(m) * frames + t] =
          std::log(std::max(e, cfg.log_floor));
    }
  }

  if (cfg.per_band_mean) {
    for (int m = 0; m < cfg.n_mels; ++m) {
      double *row = out.values.data() + static_cast<size_t>(m) * frames;
      double mean = 0.0;
      for (int t = 0; t < frames; ++t) mean += row[t];
      mean /= frames;
      for (int t = 0; t < frames; ++t) row[t] -= mean;
    }
  } else {
    double mean = 0.0;
    for (double v : out.values) mean += v;
    mean /= static_cast<double>(out.values.size());
    for (double &v : out.values) v -= mean;
  }
  return out;
}

void WriteFeatureFile(const std::string &path, const LogMel &mel) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create feature file: " + path);
  out.write("AFC1", 4);
  const uint32_t dims[2] = {static_cast<uint32_t>(mel.n_mels),
                            static_cast<uint32_t>(mel.frames)};
  out.write(reinterpret_cast<const char *>(dims), sizeof(dims));
  std::vector<float> f32(mel.values.size());
  for (size_t i = 0; i < f32.size(); ++i) {
    f32[i] = static_cast<float>(mel.values[i]);
  }
  out.write(reinterpret_cast<const char *>(f32.data()),
            static_cast<std::streamsize>(f32.size() * sizeof(float)));
  if (!out) throw IoError("failed writing feature file: " + path);
}

LogMel ReadFeatureFile(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open feature file: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "AFC1", 4) != 0) {
    throw IoError(path + ": bad feature file magic");
  }
  uint32_t dims[2];
  in.read(reinterpret_cast<char *>(dims), sizeof(dims));
  if (!in) throw IoError(path + ": truncated feature header");
  LogMel mel;
  mel.n_mels = static_cast<int>(dims[0]);
  mel.frames = static_cast<int>(dims[1]);
  std::vector<float> f32(static_cast<size_t>(mel.n_mels) * mel.frames);
  in.read(reinterpret_cast<char *>(f32.data()),
          static_cast<std::streamsize>(f32.size() * sizeof(float)));
  if (!in) throw IoError(path + ": truncated feature data");
  mel.values.assign(f32.begin(), f32.end());
  return mel;
}

}  // namespace features
}  // namespace asc
