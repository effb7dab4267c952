// Copyright 2026 The attncut Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Binary checkpoint container.
//
//   bytes 0..7   magic "ATTNCKPT"
//   u32          format version (kTensorArchiveVersion)
//   u64 + bytes  metadata record (UTF-8 JSON text, may be empty)
//   u32          tensor count
//   per tensor:  u32 name length, name bytes, u32 rows, u32 cols,
//                rows*cols IEEE-754 binary64 values, row-major
//
// All integers and values are little-endian.

#ifndef ATTNCUT_TENSOR_ARCHIVE_HPP_
#define ATTNCUT_TENSOR_ARCHIVE_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "attncut/autodiff.hpp"

namespace attncut::ad {

inline constexpr std::uint32_t kTensorArchiveVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix<double> value;
};

struct TensorArchive {
  std::uint32_t version = kTensorArchiveVersion;
  std::string metadata;
  std::vector<NamedTensor> tensors;
};

std::string encode_archive(const TensorArchive& archive);
/// Parses a whole container; throws CheckpointFormatError on truncation or
/// a bad magic and CheckpointVersionError on a foreign version.
TensorArchive decode_archive(const std::string& bytes);

void write_archive(const std::filesystem::path& path, const TensorArchive& archive);
TensorArchive read_archive(const std::filesystem::path& path);

TensorArchive archive_parameters(const ParameterSet<double>& params, std::string metadata);

/// Copies archived values into `params`. Every parameter must be present
/// with an identical shape; nothing is modified unless all checks pass.
void restore_parameters(ParameterSet<double>& params, const TensorArchive& archive);

}  // namespace attncut::ad

#endif  // ATTNCUT_TENSOR_ARCHIVE_HPP_
