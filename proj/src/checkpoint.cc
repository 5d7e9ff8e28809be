// src/checkpoint.cc

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

#include "asc/checkpoint.h"

#include <cstring>
#include <fstream>

#include "asc/error.h"

namespace asc {
namespace train {

namespace {

constexpr char kMagic[4] = {'A', 'S', 'C', 'K'};
constexpr uint32_t kVersion = 1;
constexpr uint8_t kDtypeF64 = 0;
constexpr uint8_t kDtypeU64 = 2;

uint64_t Fnv1a(const std::string &bytes) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void PutU32(std::string *out, uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out->append(b, 4);
}

void PutU64(std::string *out, uint64_t v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out->append(b, 8);
}

void PutBytes(std::string *out, const void *p, size_t n) {
  out->append(static_cast<const char *>(p), n);
}

class Reader {
 public:
  Reader(const std::string &bytes, const std::string &path)
      : bytes_(bytes), path_(path) {}

  void Need(size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw IoError(path_ + ": truncated checkpoint");
    }
  }
  uint32_t U32() {
    Need(4);
    uint32_t v;
    std::memcpy(&v, bytes_.data() + pos_, 4);
    pos_ += 4;
    return v;
  }
  uint64_t U64() {
    Need(8);
    uint64_t v;
    std::memcpy(&v, bytes_.data() + pos_, 8);
    pos_ += 8;
    return v;
  }
  uint8_t U8() {
    Need(1);
    return static_cast<uint8_t>(bytes_[pos_++]);
  }
  std::string Str(size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <typename T>
  std::vector<T> Array(size_t count) {
    Need(count * sizeof(T));
    std::vector<T> v(count);
    std::memcpy(v.data(), bytes_.data() + pos_, count * sizeof(T));
    pos_ += count * sizeof(T);
    return v;
  }
  size_t pos() const { return pos_; }

 private:
  const std::string &bytes_;
  std::string path_;
  size_t pos_ = 0;
};

}  // namespace

double Checkpoint::Scalar(const std::string &name) const {
  auto it = f64.find(name);
  if (it == f64.end() || it->second.second.size() != 1) {
    throw IoError("checkpoint: missing scalar '" + name + "'");
  }
  return it->second.second[0];
}

void Checkpoint::SetScalar(const std::string &name, double value) {
  f64[name] = {{1}, {value}};
}

void SaveCheckpoint(const Checkpoint &ckpt, const std::string &path) {
  std::string buf;
  buf.append(kMagic, 4);
  PutU32(&buf, ckpt.version);
  PutU32(&buf, static_cast<uint32_t>(ckpt.config_text.size()));
  buf.append(ckpt.config_text);
  PutU32(&buf, static_cast<uint32_t>(ckpt.f64.size() + ckpt.u64.size()));
  for (const auto &[name, entry] : ckpt.f64) {
    PutU32(&buf, static_cast<uint32_t>(name.size()));
    buf.append(name);
    buf.push_back(static_cast<char>(kDtypeF64));
    PutU32(&buf, static_cast<uint32_t>(entry.first.size()));
    for (int d : entry.first) PutU32(&buf, static_cast<uint32_t>(d));
    PutBytes(&buf, entry.second.data(), entry.second.size() * sizeof(double));
  }
  for (const auto &[name, data] : ckpt.u64) {
    PutU32(&buf, static_cast<uint32_t>(name.size()));
    buf.append(name);
    buf.push_back(static_cast<char>(kDtypeU64));
    PutU32(&buf, 1);
    PutU32(&buf, static_cast<uint32_t>(data.size()));
    PutBytes(&buf, data.data(), data.size() * sizeof(uint64_t));
  }
  PutU64(&buf, Fnv1a(buf));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create checkpoint: " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint LoadCheckpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError(path + ": not a checkpoint (bad magic)");
  }
  // Trailing checksum covers everything before it.
  uint64_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 8, 8);
  const std::string body = bytes.substr(0, bytes.size() - 8);
  if (Fnv1a(body) != stored) {
    throw IoError(path + ": checksum mismatch, file corrupt");
  }

  Reader r(body, path);
  r.Str(4);  // magic
  Checkpoint ckpt;
  ckpt.version = r.U32();
  if (ckpt.version != kVersion) {
    throw ConfigError(path + ": checkpoint version " +
                      std::to_string(ckpt.version) +
                      " not supported by this build (expected " +
                      std::to_string(kVersion) + "); refusing to upgrade");
  }
  ckpt.config_text = r.Str(r.U32());
  const uint32_t count = r.U32();
  for (uint32_t i = 0; i < count; ++i) {
    const std::string name = r.Str(r.U32());
    const uint8_t dtype = r.U8();
    const uint32_t rank = r.U32();
    std::vector<int> dims;
    size_t total = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      dims.push_back(static_cast<int>(r.U32()));
      total *= static_cast<size_t>(dims.back());
    }
    if (dtype == kDtypeF64) {
      ckpt.f64[name] = {dims, r.Array<double>(total)};
    } else if (dtype == kDtypeU64) {
      ckpt.u64[name] = r.Array<uint64_t>(total);
    } else {
      throw IoError(path + ": unknown tensor dtype code " +
                    std::to_string(dtype));
    }
  }
  return ckpt;
}

}  // namespace train
}  // namespace asc
