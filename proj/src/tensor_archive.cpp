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

#include "attncut/tensor_archive.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include "attncut/errors.hpp"

namespace attncut::ad {
namespace {

constexpr char kMagic[8] = {'A', 'T', 'T', 'N', 'C', 'K', 'P', 'T'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
void put(std::string& out, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    char buf[sizeof(T)];
    std::memcpy(buf, bytes_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }

  std::string bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw CheckpointFormatError(std::string("checkpoint truncated while reading ") + what);
    }
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_archive(const TensorArchive& archive) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, archive.version);
  put<std::uint64_t>(out, archive.metadata.size());
  out += archive.metadata;
  put<std::uint32_t>(out, static_cast<std::uint32_t>(archive.tensors.size()));
  for (const auto& t : archive.tensors) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) put<double>(out, t.value.data()[i]);
  }
  return out;
}

TensorArchive decode_archive(const std::string& bytes) {
  Reader in(bytes);
  if (in.bytes(sizeof(kMagic), "magic") != std::string(kMagic, sizeof(kMagic))) {
    throw CheckpointFormatError("not a checkpoint file (bad magic)");
  }
  TensorArchive a;
  a.version = in.get<std::uint32_t>("version");
  if (a.version != kTensorArchiveVersion) {
    throw CheckpointVersionError("unsupported checkpoint version " + std::to_string(a.version) +
                                 " (expected " + std::to_string(kTensorArchiveVersion) + ")");
  }
  const auto meta_len = in.get<std::uint64_t>("metadata length");
  if (meta_len > bytes.size()) throw CheckpointFormatError("checkpoint truncated while reading metadata");
  a.metadata = in.bytes(static_cast<std::size_t>(meta_len), "metadata");
  const auto count = in.get<std::uint32_t>("tensor count");
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    const auto name_len = in.get<std::uint32_t>("tensor name length");
    t.name = in.bytes(name_len, "tensor name");
    const auto rows = in.get<std::uint32_t>("tensor rows");
    const auto cols = in.get<std::uint32_t>("tensor cols");
    const std::uint64_t n = std::uint64_t{rows} * cols;
    if (n * sizeof(double) > bytes.size()) {
      throw CheckpointFormatError("checkpoint truncated while reading tensor '" + t.name + "'");
    }
    t.value.resize(rows, cols);
    for (std::uint64_t k = 0; k < n; ++k) t.value.data()[k] = in.get<double>("tensor values");
    a.tensors.push_back(std::move(t));
  }
  if (!in.done()) throw CheckpointFormatError("trailing bytes after checkpoint payload");
  return a;
}

void write_archive(const std::filesystem::path& path, const TensorArchive& archive) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = encode_archive(archive);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw CheckpointError("failed writing '" + path.string() + "'");
}

TensorArchive read_archive(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_archive(bytes);
}

TensorArchive archive_parameters(const ParameterSet<double>& params, std::string metadata) {
  TensorArchive a;
  a.metadata = std::move(metadata);
  for (std::size_t i = 0; i < params.size(); ++i) a.tensors.push_back({params[i].name, params[i].value});
  return a;
}

void restore_parameters(ParameterSet<double>& params, const TensorArchive& archive) {
  std::map<std::string, const NamedTensor*> by_name;
  for (const auto& t : archive.tensors) by_name[t.name] = &t;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw MissingParameterError("checkpoint has no parameter '" + p.name + "'");
    const auto& v = it->second->value;
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) {
      throw ParameterShapeError("parameter '" + p.name + "' has shape " + shape_string(v.rows(), v.cols()) +
                                " in checkpoint but " + shape_string(p.value.rows(), p.value.cols()) +
                                " in model");
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) params[i].value = by_name.at(params[i].name)->value;
}

}  // namespace attncut::ad
