// tests/test-features.cc

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <vector>

#include "asc/logmel.h"
#include "asc/manifest.h"
#include "asc/rng.h"
#include "asc/wav.h"
#include "doctest.h"

using namespace asc::features;
using asc::Rng;
namespace fs = std::filesystem;

namespace {

fs::path TempDir(const std::string &tag) {
  const fs::path dir = fs::temp_directory_path() / ("asc_test_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::vector<char> Slurp(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::vector<char>(std::istreambuf_iterator<char>(in),
                           std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("wav: all-zero clip round trips to all zeros") {
  const auto dir = TempDir("wav_zero");
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.channels.push_back(std::vector<double>(1600, 0.0));
  WriteWav((dir / "z.wav").string(), clip);
  const auto back = ReadWav((dir / "z.wav").string());
  CHECK(back.sample_rate == 16000);
  CHECK(back.NumSamples() == 1600);
  for (double v : back.channels[0]) CHECK(v == 0.0);
}

TEST_CASE("wav: int16 -32768 decodes to exactly -1.0") {
  const auto dir = TempDir("wav_min");
  // Hand-build a one-sample PCM16 file holding -32768.
  std::ofstream out(dir / "m.wav", std::ios::binary);
  auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<char *>(&v), 4); };
  auto u16 = [&](uint16_t v) { out.write(reinterpret_cast<char *>(&v), 2); };
  out.write("RIFF", 4);
  u32(36 + 2);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(1);
  u16(1);
  u32(16000);
  u32(32000);
  u16(2);
  u16(16);
  out.write("data", 4);
  u32(2);
  u16(0x8000);  // -32768
  out.close();
  const auto clip = ReadWav((dir / "m.wav").string());
  CHECK(clip.channels[0][0] == -1.0);
}

TEST_CASE("wav: 4-channel 10 s at 16 kHz gives 4 x 160000 samples") {
  const auto dir = TempDir("wav_4ch");
  Rng rng(41);
  AudioClip clip;
  clip.sample_rate = 16000;
  for (int c = 0; c < 4; ++c) {
    std::vector<double> ch(160000);
    for (auto &v : ch) v = rng.Uniform(-0.5, 0.5);
    clip.channels.push_back(std::move(ch));
  }
  WriteWav((dir / "four.wav").string(), clip);
  const auto back = ReadWav((dir / "four.wav").string());
  CHECK(back.NumChannels() == 4);
  CHECK(back.NumSamples() == 160000);
  CHECK(back.DurationSec() == doctest::Approx(10.0));
}

TEST_CASE("wav: non-PCM format raises an error naming the chunk") {
  const auto dir = TempDir("wav_bad");
  std::ofstream out(dir / "f.wav", std::ios::binary);
  auto u32 = [&](uint32_t v) { out.write(reinterpret_cast<char *>(&v), 4); };
  auto u16 = [&](uint16_t v) { out.write(reinterpret_cast<char *>(&v), 2); };
  out.write("RIFF", 4);
  u32(36);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  u32(16);
  u16(3);  // IEEE float, unsupported
  u16(1);
  u32(16000);
  u32(64000);
  u16(4);
  u16(32);
  out.close();
  CHECK_THROWS_WITH_AS(ReadWav((dir / "f.wav").string()),
                       doctest::Contains("fmt chunk"), asc::IoError);
}

TEST_CASE("fft matches a naive DFT") {
  Rng rng(42);
  const int n = 256;
  std::vector<double> re(n), im(n, 0.0);
  for (auto &v : re) v = rng.Uniform(-1, 1);
  const auto re_in = re;
  Fft(&re, &im);
  for (int k = 0; k < n; k += 17) {  // spot-check bins
    double sr = 0.0, si = 0.0;
    for (int t = 0; t < n; ++t) {
      const double ang = -2.0 * M_PI * k * t / n;
      sr += re_in[static_cast<size_t>(t)] * std::cos(ang);
      si += re_in[static_cast<size_t>(t)] * std::sin(ang);
    }
    CHECK(re[static_cast<size_t>(k)] == doctest::Approx(sr).epsilon(1e-9));
    CHECK(im[static_cast<size_t>(k)] == doctest::Approx(si).epsilon(1e-9));
  }
}

TEST_CASE("frame count: ceil(samples/hop), 160000 -> 1250, total") {
  CHECK(FrameCount(160000, 128) == 1250);
  CHECK(FrameCount(160001, 128) == 1251);
  CHECK(FrameCount(256, 128) == 2);
  CHECK(FrameCount(257, 128) == 3);
  CHECK(FrameCount(128000, 128) == 1000);
}

TEST_CASE("log-mel: 10 s mono at 16 kHz gives a 64x1250 matrix") {
  Rng rng(43);
  std::vector<double> samples(160000);
  for (auto &v : samples) v = rng.Uniform(-0.3, 0.3);
  FeatureConfig cfg;
  const auto mel = ComputeLogMel(samples, cfg);
  CHECK(mel.n_mels == 64);
  CHECK(mel.frames == 1250);

  // Mean subtraction: the global sum is ~0.
  double sum = 0.0;
  for (double v : mel.values) sum += v;
  CHECK(std::fabs(sum) < 1e-6 * 64 * 1250);
}

TEST_CASE("log-mel: all-zero input maps to all zeros after mean subtraction") {
  FeatureConfig cfg;
  const auto mel = ComputeLogMel(std::vector<double>(16000, 0.0), cfg);
  for (double v : mel.values) CHECK(std::fabs(v) < 1e-9);
}

TEST_CASE("log-mel: clip shorter than one window is an input error") {
  FeatureConfig cfg;
  CHECK_THROWS_AS(ComputeLogMel(std::vector<double>(100, 0.1), cfg),
                  asc::DataError);
}

TEST_CASE("log-mel: 1 kHz sine peaks in the band centered nearest 1 kHz") {
  FeatureConfig cfg;
  std::vector<double> samples(16000);
  for (size_t i = 0; i < samples.size(); ++i) {
    samples[i] = 0.5 * std::sin(2.0 * M_PI * 1000.0 * i / 16000.0);
  }
  const auto mel = ComputeLogMel(samples, cfg);
  // Row energies.
  int best_band = 0;
  double best = -1e300;
  for (int m = 0; m < mel.n_mels; ++m) {
    double e = 0.0;
    for (int t = 0; t < mel.frames; ++t) e += mel.At(m, t);
    if (e > best) {
      best = e;
      best_band = m;
    }
  }
  // Band whose center frequency is nearest 1 kHz (oracle: the filterbank
  // edge construction itself evaluated directly).
  const double mel_lo = HzToMel(0.0), mel_hi = HzToMel(8000.0);
  int want_band = 0;
  double want_dist = 1e300;
  for (int m = 0; m < 64; ++m) {
    const double center = MelToHz(mel_lo + (mel_hi - mel_lo) * (m + 1) / 65);
    if (std::fabs(center - 1000.0) < want_dist) {
      want_dist = std::fabs(center - 1000.0);
      want_band = m;
    }
  }
  CHECK(best_band == want_band);
}

TEST_CASE("log-mel: scaling the waveform shifts every entry by 2 log c") {
  // Post-mean-subtraction, a uniform 2 log c shift cancels exactly, so the
  // matrices must match; the shift itself is visible in single-frame power.
  Rng rng(44);
  std::vector<double> x(8000);
  for (auto &v : x) v = rng.Uniform(-0.2, 0.2);
  std::vector<double> x2(x.size());
  const double c = 3.0;
  for (size_t i = 0; i < x.size(); ++i) x2[i] = c * x[i];
  FeatureConfig cfg;
  cfg.fmin = 100.0;  // keeps every band's noise energy above the log floor
  const auto a = ComputeLogMel(x, cfg);
  const auto b = ComputeLogMel(x2, cfg);
  for (size_t i = 0; i < a.values.size(); ++i) {
    CHECK(a.values[i] == doctest::Approx(b.values[i]).epsilon(1e-9));
  }

  // Direct power check on one window.
  std::vector<double> re(256), im(256, 0.0), re2(256), im2(256, 0.0);
  for (int i = 0; i < 256; ++i) {
    re[static_cast<size_t>(i)] = x[static_cast<size_t>(i)];
    re2[static_cast<size_t>(i)] = c * x[static_cast<size_t>(i)];
  }
  Fft(&re, &im);
  Fft(&re2, &im2);
  const double p1 = re[10] * re[10] + im[10] * im[10];
  const double p2 = re2[10] * re2[10] + im2[10] * im2[10];
  CHECK(std::log(p2) - std::log(p1) ==
        doctest::Approx(2.0 * std::log(c)).epsilon(1e-9));
}

TEST_CASE("log-mel: delaying by one hop shifts frames by one index") {
  Rng rng(45);
  const int hop = 128;
  std::vector<double> x(4000);
  for (auto &v : x) v = rng.Uniform(-0.4, 0.4);
  std::vector<double> delayed(x.size() + hop, 0.0);
  std::copy(x.begin(), x.end(), delayed.begin() + hop);

  FeatureConfig cfg;
  const auto a = ComputeLogMel(x, cfg);
  const auto b = ComputeLogMel(delayed, cfg);
  REQUIRE(b.frames == a.frames + 1);
  // Interior frames agree up to the global mean offset (one constant for
  // the whole matrix, produced by the differing boundary frames).
  const double offset = b.At(0, 2) - a.At(0, 1);
  for (int m = 0; m < a.n_mels; ++m) {
    for (int t = 1; t + 2 < a.frames; ++t) {
      CHECK(std::fabs((b.At(m, t + 1) - a.At(m, t)) - offset) < 1e-6);
    }
  }
}

TEST_CASE("feature files: AFC1 round trip") {
  const auto dir = TempDir("afc");
  LogMel mel;
  mel.n_mels = 3;
  mel.frames = 4;
  mel.values = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  WriteFeatureFile((dir / "x.afc").string(), mel);
  const auto back = ReadFeatureFile((dir / "x.afc").string());
  CHECK(back.n_mels == 3);
  CHECK(back.frames == 4);
  CHECK(back.values == mel.values);

  const auto bytes = Slurp(dir / "x.afc");
  CHECK(bytes.size() == 4 + 8 + 12 * 4);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "AFC1");
}

TEST_CASE("cache: 10 clips x 4 channels give 40 entries, reruns identical") {
  const auto data_dir = TempDir("cache_data");
  const auto out_dir = TempDir("cache_out");
  Rng rng(46);
  std::vector<ManifestEntry> manifest;
  for (int i = 0; i < 10; ++i) {
    AudioClip clip;
    clip.sample_rate = 16000;
    for (int c = 0; c < 4; ++c) {
      std::vector<double> ch(4000);
      for (auto &v : ch) v = rng.Uniform(-0.5, 0.5);
      clip.channels.push_back(std::move(ch));
    }
    const std::string id = "clip" + std::to_string(i);
    const auto path = (data_dir / (id + ".wav")).string();
    WriteWav(path, clip);
    for (int c = 0; c < 4; ++c) {
      manifest.push_back({id, c, i % 3, path});
    }
  }
  WriteManifest((data_dir / "train_manifest.csv").string(), manifest);

  FeatureConfig cfg;
  const auto result = CacheFeatures(data_dir.string(), out_dir.string(), cfg);
  CHECK(result.entries == 40);
  CHECK(result.skipped == 0);
  const auto cached = ReadManifest((out_dir / "train_manifest.csv").string());
  CHECK(cached.size() == 40);

  // Byte-identical on rerun.
  const auto first = Slurp(out_dir / "train" / "clip3_ch2.afc");
  CacheFeatures(data_dir.string(), out_dir.string(), cfg);
  CHECK(Slurp(out_dir / "train" / "clip3_ch2.afc") == first);
}

TEST_CASE("cache: unreadable clip is skipped with manifest exclusion") {
  const auto data_dir = TempDir("cache_skip");
  const auto out_dir = TempDir("cache_skip_out");
  AudioClip clip;
  clip.sample_rate = 16000;
  clip.channels.push_back(std::vector<double>(4000, 0.25));
  WriteWav((data_dir / "good.wav").string(), clip);
  std::vector<ManifestEntry> manifest = {
      {"good", 0, 0, (data_dir / "good.wav").string()},
      {"missing", 0, 1, (data_dir / "nope.wav").string()},
  };
  WriteManifest((data_dir / "eval_manifest.csv").string(), manifest);
  FeatureConfig cfg;
  const auto result = CacheFeatures(data_dir.string(), out_dir.string(), cfg);
  CHECK(result.entries == 1);
  CHECK(result.skipped == 1);
  CHECK(ReadManifest((out_dir / "eval_manifest.csv").string()).size() == 1);
}

TEST_CASE("cache: empty manifest gives an empty cache manifest") {
  const auto data_dir = TempDir("cache_empty");
  const auto out_dir = TempDir("cache_empty_out");
  WriteManifest((data_dir / "dev_manifest.csv").string(), {});
  FeatureConfig cfg;
  const auto result = CacheFeatures(data_dir.string(), out_dir.string(), cfg);
  CHECK(result.entries == 0);
  CHECK(ReadManifest((out_dir / "dev_manifest.csv").string()).empty());
}
