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

#include "attncut/dataset_io.hpp"

#include <fstream>
#include <string>

#include "attncut/errors.hpp"
#include "json.hpp"

namespace attncut {
namespace {

using nlohmann::json;

json vec_json(const Vec& v) { return std::vector<Real>(v.data(), v.data() + v.size()); }

Vec json_vec(const json& j) {
  const auto values = j.get<std::vector<Real>>();
  return Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json list_json(const RankedList& list) {
  json docs = json::array();
  for (const auto& d : list.docs()) {
    json jd = {{"doc_id", d.doc_id},       {"rank", d.rank},
               {"score", d.retrieval_score}, {"length", d.doc_length},
               {"unique_tokens", d.unique_tokens}, {"sim_prev", d.sim_prev},
               {"sim_next", d.sim_next}};
    if (list.labeled()) jd["relevance"] = label_value(d.relevance);
    docs.push_back(std::move(jd));
  }
  return {{"query_id", list.query_id()}, {"docs", std::move(docs)}};
}

RankedList json_list(const json& j) {
  std::vector<RankedDoc> docs;
  bool labeled = true;
  bool first = true;
  for (const auto& jd : j.at("docs")) {
    RankedDoc d;
    d.doc_id = jd.at("doc_id").get<std::string>();
    d.rank = jd.at("rank").get<int>();
    d.retrieval_score = jd.at("score").get<Real>();
    d.doc_length = jd.at("length").get<long>();
    d.unique_tokens = jd.at("unique_tokens").get<long>();
    d.sim_prev = jd.at("sim_prev").get<Real>();
    d.sim_next = jd.at("sim_next").get<Real>();
    const bool has_label = jd.contains("relevance");
    if (first) {
      labeled = has_label;
      first = false;
    } else if (has_label != labeled) {
      throw DataError("list '" + j.at("query_id").get<std::string>() + "' mixes labelled and unlabelled documents");
    }
    if (has_label) {
      const int y = jd.at("relevance").get<int>();
      if (y != 1 && y != -1) throw DataError("relevance must be +1 or -1, found " + std::to_string(y));
      d.relevance = static_cast<Relevance>(y);
    }
    docs.push_back(std::move(d));
  }
  return RankedList(j.at("query_id").get<std::string>(), std::move(docs), labeled);
}

}  // namespace

void write_dataset(std::ostream& out, const Dataset& ds) {
  json header = {{"format", "attncut-dataset"},
                 {"version", kDatasetFormatVersion},
                 {"split", std::string(to_string(ds.split))},
                 {"layout", default_feature_layout()},
                 {"metadata", ds.metadata}};
  if (ds.feature_stats) {
    header["feature_stats"] = {{"mean", vec_json(ds.feature_stats->mean)},
                               {"std", vec_json(ds.feature_stats->stddev)}};
  } else {
    header["feature_stats"] = nullptr;
  }
  out << header.dump() << '\n';
  for (const auto& l : ds.lists) out << list_json(l).dump() << '\n';
}

Dataset read_dataset(std::istream& in) {
  Dataset ds;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (!have_header) {
        if (j.value("format", "") != "attncut-dataset") throw ParseError("not a dataset file (bad header)", lineno);
        if (j.at("version").get<int>() != kDatasetFormatVersion) {
          throw ParseError("unsupported dataset version " + j.at("version").dump(), lineno);
        }
        if (j.at("layout").get<FeatureLayout>() != default_feature_layout()) {
          throw ParseError("feature layout mismatch: " + j.at("layout").dump(), lineno);
        }
        ds.split = parse_split(j.at("split").get<std::string>());
        ds.metadata = j.at("metadata").get<std::map<std::string, std::string>>();
        if (!j.at("feature_stats").is_null()) {
          FeatureStats s{json_vec(j["feature_stats"].at("mean")), json_vec(j["feature_stats"].at("std"))};
          if (s.mean.size() != static_cast<Eigen::Index>(kFeatureDim) || s.stddev.size() != s.mean.size()) {
            throw ParseError("feature_stats must have " + std::to_string(kFeatureDim) + " slots", lineno);
          }
          ds.feature_stats = std::move(s);
        }
        have_header = true;
      } else {
        ds.lists.push_back(json_list(j));
      }
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed dataset record: ") + e.what(), lineno);
    } catch (const DataError& e) {
      throw ParseError(e.what(), lineno);
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), lineno);
    }
  }
  if (!have_header) throw ParseError("empty dataset file", 0);
  return ds;
}

void save_dataset(const std::filesystem::path& path, const Dataset& ds) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_dataset(os, ds);
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open dataset '" + path.string() + "'");
  try {
    return read_dataset(is);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

}  // namespace attncut
