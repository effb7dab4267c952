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

// Dataset JSONL files.
//
// Line 1 is a header object:
//   {"format":"attncut-dataset","version":1,"split":"train",
//    "layout":["retrieval_score",...],"metadata":{...},
//    "feature_stats":{"mean":[...],"std":[...]} or null}
// Every further line is one ranked list:
//   {"query_id":"301","docs":[{"doc_id":..,"rank":1,"score":..,"length":..,
//     "unique_tokens":..,"sim_prev":..,"sim_next":..,"relevance":1}, ...]}
// A list whose documents carry no "relevance" field is unlabeled.

#ifndef ATTNCUT_DATASET_IO_HPP_
#define ATTNCUT_DATASET_IO_HPP_

#include <filesystem>
#include <istream>
#include <ostream>

#include "attncut/data_model.hpp"

namespace attncut {

inline constexpr int kDatasetFormatVersion = 1;

void write_dataset(std::ostream& out, const Dataset& ds);
/// Reads raw lists and header; `features` stays empty.
Dataset read_dataset(std::istream& in);

void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace attncut

#endif  // ATTNCUT_DATASET_IO_HPP_
