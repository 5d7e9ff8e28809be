// asc/checkpoint.h

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

#ifndef ASC_CHECKPOINT_H_
#define ASC_CHECKPOINT_H_

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace asc {
namespace train {

// Binary layout: magic "ASCK", u32 version, length-prefixed UTF-8 config
// blob, u32 tensor count, then per tensor a length-prefixed name, u8 dtype
// (0 = f64, 2 = u64), u32 rank, u32 dims, raw little-endian data; trailing
// u64 FNV-1a checksum over everything before it. Serialization is
// deterministic (std::map ordering), so save -> load -> save is
// byte-identical.
struct Checkpoint {
  uint32_t version = 1;
  std::string config_text;
  std::map<std::string, std::pair<std::vector<int>, std::vector<double>>> f64;
  std::map<std::string, std::vector<uint64_t>> u64;

  double Scalar(const std::string &name) const;
  void SetScalar(const std::string &name, double value);
};

void SaveCheckpoint(const Checkpoint &ckpt, const std::string &path);

// Throws IoError on integrity problems (bad magic, truncation, checksum
// mismatch) and ConfigError on a version this build refuses to upgrade.
Checkpoint LoadCheckpoint(const std::string &path);

}  // namespace train
}  // namespace asc

#endif  // ASC_CHECKPOINT_H_
