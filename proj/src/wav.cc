// src/wav.cc

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

#include "asc/wav.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "asc/error.h"

namespace asc {
namespace features {

namespace {

uint32_t ReadU32(std::istream &in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char *>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

uint16_t ReadU16(std::istream &in) {
  unsigned char b[2];
  in.read(reinterpret_cast<char *>(b), 2);
  return static_cast<uint16_t>(b[0] | (b[1] << 8));
}

void WriteU32(std::ostream &out, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<char *>(b), 4);
}

void WriteU16(std::ostream &out, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff)};
  out.write(reinterpret_cast<char *>(b), 2);
}

}  // namespace

AudioClip ReadWav(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open wav file: " + path);

  char tag[4];
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "RIFF", 4) != 0) {
    throw IoError(path + ": missing RIFF header");
  }
  ReadU32(in);  // riff size, unused
  in.read(tag, 4);
  if (!in || std::memcmp(tag, "WAVE", 4) != 0) {
    throw IoError(path + ": not a WAVE file");
  }

  uint16_t format = 0, num_channels = 0, bits = 0;
  uint32_t sample_rate = 0;
  bool have_fmt = false;
  std::vector<int16_t> raw;
  while (in.read(tag, 4)) {
    const uint32_t chunk_size = ReadU32(in);
    if (std::memcmp(tag, "fmt ", 4) == 0) {
      format = ReadU16(in);
      num_channels = ReadU16(in);
      sample_rate = ReadU32(in);
      ReadU32(in);  // byte rate
      ReadU16(in);  // block align
      bits = ReadU16(in);
      if (chunk_size > 16) in.seekg(chunk_size - 16, std::ios::cur);
      have_fmt = true;
      if (format != 1) {
        throw IoError(path + ": fmt chunk declares non-PCM format " +
                      std::to_string(format));
      }
      if (bits != 16) {
        throw IoError(path + ": fmt chunk declares unsupported bit depth " +
                      std::to_string(bits));
      }
      if (num_channels < 1 || num_channels > 4) {
        throw IoError(path + ": fmt chunk declares " +
                      std::to_string(num_channels) +
                      " channels, expected 1-4");
      }
    } else if (std::memcmp(tag, "data", 4) == 0) {
      if (!have_fmt) throw IoError(path + ": data chunk before fmt chunk");
      raw.resize(chunk_size / 2);
      in.read(reinterpret_cast<char *>(raw.data()),
              static_cast<std::streamsize>(raw.size() * 2));
      if (!in) throw IoError(path + ": truncated data chunk");
      break;
    } else {
      // Skip unknown chunk (word-aligned).
      in.seekg(chunk_size + (chunk_size & 1), std::ios::cur);
    }
  }
  if (!have_fmt) throw IoError(path + ": fmt chunk not found");
  if (raw.empty()) throw IoError(path + ": data chunk not found or empty");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(sample_rate);
  const int64_t frames = static_cast<int64_t>(raw.size()) / num_channels;
  clip.channels.assign(num_channels,
                       std::vector<double>(static_cast<size_t>(frames)));
  for (int64_t i = 0; i < frames; ++i) {
    for (int c = 0; c < num_channels; ++c) {
      clip.channels[static_cast<size_t>(c)][static_cast<size_t>(i)] =
          static_cast<double>(raw[static_cast<size_t>(i * num_channels + c)]) /
          32768.0;
    }
  }
  return clip;
}

void WriteWav(const std::string &path, const AudioClip &clip) {
  if (clip.channels.empty()) throw IoError("WriteWav: clip has no channels");
  const int channels = clip.NumChannels();
  const int64_t frames = clip.NumSamples();
  for (const auto &ch : clip.channels) {
    if (static_cast<int64_t>(ch.size()) != frames) {
      throw IoError("WriteWav: channels have unequal lengths");
    }
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create wav file: " + path);

  const uint32_t data_bytes = static_cast<uint32_t>(frames * channels * 2);
  out.write("RIFF", 4);
  WriteU32(out, 36 + data_bytes);
  out.write("WAVE", 4);
  out.write("fmt ", 4);
  WriteU32(out, 16);
  WriteU16(out, 1);  // PCM
  WriteU16(out, static_cast<uint16_t>(channels));
  WriteU32(out, static_cast<uint32_t>(clip.sample_rate));
  WriteU32(out, static_cast<uint32_t>(clip.sample_rate * channels * 2));
  WriteU16(out, static_cast<uint16_t>(channels * 2));
  WriteU16(out, 16);
  out.write("data", 4);
  WriteU32(out, data_bytes);
  for (int64_t i = 0; i < frames; ++i) {
    for (int c = 0; c < channels; ++c) {
      const double v = std::clamp(
          clip.channels[static_cast<size_t>(c)][static_cast<size_t>(i)], -1.0,
          1.0);
      const int16_t s = static_cast<int16_t>(std::lrint(v * 32767.0));
      WriteU16(out, static_cast<uint16_t>(s));
    }
  }
  if (!out) throw IoError("failed writing wav file: " + path);
}

}  // namespace features
}  // namespace asc
