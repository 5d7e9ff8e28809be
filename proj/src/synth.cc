// src/synth.cc

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

#include "asc/synth.h"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "asc/error.h"
#include "asc/wav.h"

namespace fs = std::filesystem;

namespace asc {
namespace data {

namespace {

constexpr int kPrototypes = 6;

// Cosine on/off ramps so event boundaries do not ring.
void ApplyRamp(std::vector<double> *buf, int ramp) {
  const int n = static_cast<int>(buf->size());
  ramp = std::min(ramp, n / 2);
  for (int i = 0; i < ramp; ++i) {
    const double w = 0.5 - 0.5 * std::cos(M_PI * i / ramp);
    (*buf)[static_cast<size_t>(i)] *= w;
    (*buf)[static_cast<size_t>(n - 1 - i)] *= w;
  }
}

std::vector<double> RenderEvent(int type, int sample_rate, Rng *rng) {
  const double jitter = rng->Uniform(0.95, 1.05);
  auto seconds = [&](double s) {
    return static_cast<int>(s * sample_rate);
  };
  std::vector<double> buf;
  switch (type) {
    case 0: {  // tone_low: 220 Hz sine burst
      const int n = seconds(0.5);
      buf.resize(static_cast<size_t>(n));
      const double f = 220.0 * jitter;
      for (int i = 0; i < n; ++i) {
        buf[static_cast<size_t>(i)] =
            std::sin(2.0 * M_PI * f * i / sample_rate);
      }
      break;
    }
    case 1: {  // tone_high: 1200 Hz with one harmonic
      const int n = seconds(0.5);
      buf.resize(static_cast<size_t>(n));
      const double f = 1200.0 * jitter;
      for (int i = 0; i < n; ++i) {
        const double ph = 2.0 * M_PI * i / sample_rate;
        buf[static_cast<size_t>(i)] =
            0.8 * std::sin(ph * f) + 0.4 * std::sin(ph * 2 * f);
      }
      break;
    }
    case 2: {  // chirp: 300 -> 2800 Hz sweep
      const int n = seconds(0.6);
      buf.resize(static_cast<size_t>(n));
      const double f0 = 300.0 * jitter, f1 = 2800.0 * jitter;
      for (int i = 0; i < n; ++i) {
        const double u = static_cast<double>(i) / n;
        const double f = f0 + (f1 - f0) * u * 0.5;  // instantaneous phase
        buf[static_cast<size_t>(i)] =
            std::sin(2.0 * M_PI * f * u * n / sample_rate);
      }
      break;
    }
    case 3: {  // noise_burst: broadband
      const int n = seconds(0.4);
      buf.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) {
        buf[static_cast<size_t>(i)] = rng->Uniform(-1.0, 1.0);
      }
      break;
    }
    case 4: {  // click_train: 15 Hz train of damped 3 kHz clicks
      const int n = seconds(0.8);
      buf.assign(static_cast<size_t>(n), 0.0);
      const int period = static_cast<int>(sample_rate / (15.0 * jitter));
      const double carrier = 3000.0;
      for (int start = 0; start < n; start += period) {
        const int len = std::min(seconds(0.01), n - start);
        for (int i = 0; i < len; ++i) {
          buf[static_cast<size_t>(start + i)] +=
              std::exp(-i / (0.002 * sample_rate)) *
              std::sin(2.0 * M_PI * carrier * i / sample_rate);
        }
      }
      break;
    }
    case 5: {  // warble: 600 Hz with 6 Hz vibrato
      const int n = seconds(0.7);
      buf.resize(static_cast<size_t>(n));
      const double f = 600.0 * jitter;
      double phase = 0.0;
      for (int i = 0; i < n; ++i) {
        const double vib =
            1.0 + 0.1 * std::sin(2.0 * M_PI * 6.0 * i / sample_rate);
        phase += 2.0 * M_PI * f * vib / sample_rate;
        buf[static_cast<size_t>(i)] = std::sin(phase);
      }
      break;
    }
    case 6: {  // thump (distractor): 90 Hz decaying sine
      const int n = seconds(0.3);
      buf.resize(static_cast<size_t>(n));
      const double f = 90.0 * jitter;
      for (int i = 0; i < n; ++i) {
        buf[static_cast<size_t>(i)] =
            std::exp(-i / (0.08 * sample_rate)) *
            std::sin(2.0 * M_PI * f * i / sample_rate);
      }
      break;
    }
    default:
      throw ConfigError("unknown event type " + std::to_string(type));
  }
  ApplyRamp(&buf, seconds(0.01));
  return buf;
}

}  // namespace

const std::vector<std::string> &EventTypeNames() {
  static const std::vector<std::string> names = {
      "tone_low", "tone_high",   "chirp", "noise_burst",
      "click_train", "warble",   "thump"};
  return names;
}

int NumEventPrototypes() { return kPrototypes; }

std::vector<std::vector<int>> ClassEventTable(int classes,
                                              int events_per_class) {
  if (events_per_class < 1 || events_per_class > kPrototypes) {
    throw ConfigError("events_per_class must be in [1, " +
                      std::to_string(kPrototypes) + "]");
  }
  // All k-subsets of the prototype set, lexicographic.
  std::vector<std::vector<int>> subsets;
  std::vector<int> combo(static_cast<size_t>(events_per_class));
  for (int i = 0; i < events_per_class; ++i) combo[static_cast<size_t>(i)] = i;
  while (true) {
    subsets.push_back(combo);
    int i = events_per_class - 1;
    while (i >= 0 &&
           combo[static_cast<size_t>(i)] == kPrototypes - events_per_class + i) {
      --i;
    }
    if (i < 0) break;
    ++combo[static_cast<size_t>(i)];
    for (int j = i + 1; j < events_per_class; ++j) {
      combo[static_cast<size_t>(j)] = combo[static_cast<size_t>(j - 1)] + 1;
    }
  }
  if (static_cast<int>(subsets.size()) < classes) {
    throw ConfigError("cannot give " + std::to_string(classes) +
                      " classes distinct subsets of " +
                      std::to_string(events_per_class) + " of " +
                      std::to_string(kPrototypes) + " event types");
  }
  // Spread picks across the enumeration so event usage stays balanced-ish.
  std::vector<std::vector<int>> table;
  for (int c = 0; c < classes; ++c) {
    const size_t idx = static_cast<size_t>(
        static_cast<int64_t>(c) * static_cast<int64_t>(subsets.size()) /
        classes);
    table.push_back(subsets[idx]);
  }
  return table;
}

RenderedClip RenderClip(const SynthConfig &cfg, int class_index,
                        const std::string &clip_id, Rng *rng) {
  const auto table = ClassEventTable(cfg.classes, cfg.events_per_class);
  const auto &char_types = table[static_cast<size_t>(class_index)];
  const int64_t n =
      static_cast<int64_t>(cfg.clip_seconds * cfg.sample_rate);

  RenderedClip clip;
  clip.samples.resize(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) {
    clip.samples[static_cast<size_t>(i)] = rng->Gauss() * cfg.noise_sigma;
  }

  // One guaranteed instance per characteristic type, then extras drawn from
  // the characteristic set, then maybe one distractor.
  std::vector<int> instances(char_types.begin(), char_types.end());
  const int extras =
      cfg.extra_events_min +
      static_cast<int>(rng->UniformInt(cfg.extra_events_max -
                                       cfg.extra_events_min + 1));
  for (int i = 0; i < extras; ++i) {
    instances.push_back(char_types[static_cast<size_t>(
        rng->UniformInt(static_cast<int64_t>(char_types.size())))]);
  }
  if (rng->Bernoulli(cfg.distractor_prob)) instances.push_back(kPrototypes);

  const int64_t edge = cfg.sample_rate / 4;  // keep events off clip edges
  for (int type : instances) {
    const auto event = RenderEvent(type, cfg.sample_rate, rng);
    const int64_t len = static_cast<int64_t>(event.size());
    const int64_t max_onset = n - len - edge;
    if (max_onset <= edge) {
      throw ConfigError("clip of " + std::to_string(cfg.clip_seconds) +
                        " s too short for event type " +
                        EventTypeNames()[static_cast<size_t>(type)]);
    }
    const int64_t onset = edge + rng->UniformInt(max_onset - edge + 1);
    const double amp =
        cfg.noise_sigma *
        std::pow(10.0, rng->Uniform(cfg.snr_db_min, cfg.snr_db_max) / 20.0);
    for (int64_t i = 0; i < len; ++i) {
      clip.samples[static_cast<size_t>(onset + i)] +=
          amp * event[static_cast<size_t>(i)];
    }
    features::EventTruth truth;
    truth.clip_id = clip_id;
    truth.event_type = EventTypeNames()[static_cast<size_t>(type)];
    truth.onset = static_cast<double>(onset) / cfg.sample_rate;
    truth.offset = static_cast<double>(onset + len) / cfg.sample_rate;
    clip.events.push_back(std::move(truth));
  }

  // Headroom for PCM16.
  double peak = 0.0;
  for (double v : clip.samples) peak = std::max(peak, std::fabs(v));
  if (peak > 0.95) {
    const double scale = 0.95 / peak;
    for (double &v : clip.samples) v *= scale;
  }
  return clip;
}

SynthResult GenerateCorpus(const SynthConfig &cfg,
                           const std::string &out_dir) {
  if (cfg.classes < 2) throw ConfigError("synth: need at least 2 classes");
  if (cfg.extra_events_max < cfg.extra_events_min || cfg.extra_events_min < 0) {
    throw ConfigError("synth: bad extra event range");
  }
  ClassEventTable(cfg.classes, cfg.events_per_class);  // validates

  fs::create_directories(fs::path(out_dir) / "wav");

  struct SplitSpec {
    const char *name;
    int count;
  };
  const SplitSpec splits[] = {{"train", cfg.train_clips},
                              {"dev", cfg.dev_clips},
                              {"eval", cfg.eval_clips}};

  std::vector<features::EventTruth> all_events;
  SynthResult result;
  uint64_t stream = 0;
  for (const auto &split : splits) {
    std::vector<features::ManifestEntry> manifest(
        static_cast<size_t>(split.count));
    std::vector<std::vector<features::EventTruth>> events(
        static_cast<size_t>(split.count));
    const uint64_t base_stream = stream;
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < split.count; ++i) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%04d", split.name, i);
      const int class_index = i % cfg.classes;
      Rng rng = Rng::ForStream(cfg.seed, base_stream + static_cast<uint64_t>(i));
      const auto clip = RenderClip(cfg, class_index, id, &rng);

      features::AudioClip wav;
      wav.sample_rate = cfg.sample_rate;
      wav.channels.push_back(clip.samples);
      const fs::path path = fs::path(out_dir) / "wav" / (std::string(id) + ".wav");
      features::WriteWav(path.string(), wav);

      features::ManifestEntry entry;
      entry.clip_id = id;
      entry.channel = 0;
      entry.class_index = class_index;
      entry.path = path.string();
      manifest[static_cast<size_t>(i)] = std::move(entry);
      events[static_cast<size_t>(i)] = clip.events;
    }
    stream += static_cast<uint64_t>(split.count);
    features::WriteManifest(
        (fs::path(out_dir) / (std::string(split.name) + "_manifest.csv"))
            .string(),
        manifest);
    for (auto &ev : events) {
      all_events.insert(all_events.end(), ev.begin(), ev.end());
    }
  }
  features::WriteEvents((fs::path(out_dir) / "events.csv").string(),
                        all_events);
  result.train_clips = cfg.train_clips;
  result.dev_clips = cfg.dev_clips;
  result.eval_clips = cfg.eval_clips;
  return result;
}

}  // namespace data
}  // namespace asc
