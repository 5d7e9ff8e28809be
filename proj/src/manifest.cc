// src/manifest.cc

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

#include "asc/manifest.h"

#include <omp.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "asc/wav.h"

namespace fs = std::filesystem;

namespace asc {
namespace features {

namespace {

std::vector<std::string> SplitCsvLine(const std::string &line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  return fields;
}

}  // namespace

std::vector<ManifestEntry> ReadManifest(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest: " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("clip_id,", 0) == 0) continue;  // header
    auto fields = SplitCsvLine(line);
    if (fields.size() != 4) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 4 fields, got " +
                      std::to_string(fields.size()));
    }
    ManifestEntry e;
    e.clip_id = fields[0];
    try {
      e.channel = std::stoi(fields[1]);
      e.class_index = std::stoi(fields[2]);
    } catch (const std::exception &) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": non-numeric channel or class");
    }
    e.path = fields[3];
    entries.push_back(std::move(e));
  }
  return entries;
}

void WriteManifest(const std::string &path,
                   const std::vector<ManifestEntry> &entries) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create manifest: " + path);
  out << "clip_id,channel,class_index,path\n";
  for (const auto &e : entries) {
    out << e.clip_id << "," << e.channel << "," << e.class_index << ","
        << e.path << "\n";
  }
  if (!out) throw IoError("failed writing manifest: " + path);
}

std::vector<EventTruth> ReadEvents(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open events file: " + path);
  std::vector<EventTruth> events;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("clip_id,", 0) == 0) continue;
    auto fields = SplitCsvLine(line);
    if (fields.size() != 4) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": expected 4 fields");
    }
    EventTruth e;
    e.clip_id = fields[0];
    e.event_type = fields[1];
    try {
      e.onset = std::stod(fields[2]);
      e.offset = std::stod(fields[3]);
    } catch (const std::exception &) {
      throw DataError(path + ":" + std::to_string(lineno) +
                      ": non-numeric onset/offset");
    }
    events.push_back(std::move(e));
  }
  return events;
}

void WriteEvents(const std::string &path,
                 const std::vector<EventTruth> &events) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot create events file: " + path);
  out << "clip_id,event_type,onset_s,offset_s\n";
  char buf[64];
  for (const auto &e : events) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f", e.onset, e.offset);
    out << e.clip_id << "," << e.event_type << "," << buf << "\n";
  }
  if (!out) throw IoError("failed writing events file: " + path);
}

std::vector<std::string> SplitsInDir(const std::string &dir) {
  std::vector<std::string> splits;
  for (const char *name : {"train", "dev", "eval"}) {
    if (fs::exists(fs::path(dir) / (std::string(name) + "_manifest.csv"))) {
      splits.push_back(name);
    }
  }
  return splits;
}

CacheResult CacheFeatures(const std::string &data_dir,
                          const std::string &out_dir,
                          const FeatureConfig &cfg) {
  const auto splits = SplitsInDir(data_dir);
  if (splits.empty()) {
    throw DataError("no *_manifest.csv files found under " + data_dir);
  }
  fs::create_directories(out_dir);
  CacheResult result;
  for (const auto &split : splits) {
    const auto entries =
        ReadManifest((fs::path(data_dir) / (split + "_manifest.csv")).string());
    fs::create_directories(fs::path(out_dir) / split);

    std::vector<ManifestEntry> cached(entries.size());
    std::vector<uint8_t> ok(entries.size(), 0);
    const int64_t count = static_cast<int64_t>(entries.size());
#pragma omp parallel for schedule(dynamic)
    for (int64_t i = 0; i < count; ++i) {
      const auto &e = entries[static_cast<size_t>(i)];
      const fs::path dst = fs::path(out_dir) / split /
                           (e.clip_id + "_ch" + std::to_string(e.channel) +
                            ".afc");
      try {
        if (!fs::exists(dst)) {
          const AudioClip clip = ReadWav(e.path);
          if (e.channel < 0 || e.channel >= clip.NumChannels()) {
            throw DataError(e.clip_id + ": channel " +
                            std::to_string(e.channel) + " not present");
          }
          const LogMel mel =
              ComputeLogMel(clip.channels[static_cast<size_t>(e.channel)],
                            cfg);
          WriteFeatureFile(dst.string(), mel);
        }
        ManifestEntry out_entry = e;
        out_entry.path = dst.string();
        cached[static_cast<size_t>(i)] = out_entry;
        ok[static_cast<size_t>(i)] = 1;
      } catch (const std::exception &ex) {
#pragma omp critical
        std::cerr << "warning: skipping " << e.clip_id << " channel "
                  << e.channel << ": " << ex.what() << std::endl;
      }
    }

    std::vector<ManifestEntry> kept;
    for (size_t i = 0; i < entries.size(); ++i) {
      if (ok[i]) {
        kept.push_back(cached[i]);
        ++result.entries;
      } else {
        ++result.skipped;
      }
    }
    WriteManifest((fs::path(out_dir) / (split + "_manifest.csv")).string(),
                  kept);
  }
  return result;
}

}  // namespace features
}  // namespace asc
