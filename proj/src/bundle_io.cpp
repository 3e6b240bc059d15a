/*
 * Copyright 2026 The kahm-encoder Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 *
 */

#include "kahm/data_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_set>

namespace fs = std::filesystem;

namespace kahm {
namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

void write_lines(const std::vector<std::string>& lines, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::kIoFailure, "cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  require(static_cast<bool>(out), ErrorCode::kIoFailure, "write failed for " + path.string());
}

std::size_t parse_count(const std::string& value, const std::string& key) {
  std::size_t out = 0;
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  require(ec == std::errc() && ptr == end, ErrorCode::kMalformedManifest,
          "field '" + key + "' is not a non-negative integer: '" + value + "'");
  return out;
}

void check_names(const std::vector<std::string>& names, const char* what) {
  for (const auto& n : names) {
    require(n.find_first_of("\t\n\r") == std::string::npos, ErrorCode::kInvalidArgument,
            std::string(what) + " must not contain tabs or newlines: '" + n + "'");
  }
}

}  // namespace

Matrix VectorBundle::to_matrix() const {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < payload.size(); ++i) m.data()[i] = payload[i];
  return m;
}

VectorBundle VectorBundle::from_matrix(const Matrix& m, std::vector<std::string> ids,
                                       std::optional<std::vector<std::string>> labels) {
  VectorBundle b;
  b.rows = static_cast<std::size_t>(m.rows());
  b.cols = static_cast<std::size_t>(m.cols());
  b.payload.resize(b.rows * b.cols);
  for (std::size_t i = 0; i < b.payload.size(); ++i) b.payload[i] = static_cast<float>(m.data()[i]);
  b.ids = std::move(ids);
  b.labels = std::move(labels);
  b.validate();
  return b;
}

void VectorBundle::validate() const {
  require(payload.size() == rows * cols, ErrorCode::kSizeMismatch,
          "payload holds " + std::to_string(payload.size()) + " values, expected " +
              std::to_string(rows * cols));
  require(ids.size() == rows, ErrorCode::kSizeMismatch,
          "bundle has " + std::to_string(ids.size()) + " ids for " + std::to_string(rows) +
              " rows");
  if (labels) {
    require(labels->size() == rows, ErrorCode::kSizeMismatch,
            "bundle has " + std::to_string(labels->size()) + " labels for " +
                std::to_string(rows) + " rows");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : ids) {
    require(!id.empty(), ErrorCode::kInvalidArgument, "empty id");
    require(seen.insert(id).second, ErrorCode::kDuplicateId, "duplicate id '" + id + "'");
  }
  check_names(ids, "ids");
  if (labels) check_names(*labels, "labels");
  for (float v : payload) {
    require(std::isfinite(v), ErrorCode::kNonFiniteValue, "bundle contains a non-finite value");
  }
}

void write_bundle(const VectorBundle& bundle, const fs::path& manifest) {
  bundle.validate();
  if (manifest.has_parent_path()) fs::create_directories(manifest.parent_path());
  const std::string stem = manifest.stem().string();
  const fs::path dir = manifest.parent_path();

  const std::string payload_name = stem + ".f32";
  const std::string ids_name = stem + ".ids";
  const std::string labels_name = stem + ".labels";

  {
    std::ofstream out(dir / payload_name, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIoFailure,
            "cannot write " + (dir / payload_name).string());
    std::vector<char> bytes(bundle.payload.size() * 4);
    for (std::size_t i = 0; i < bundle.payload.size(); ++i) {
      const auto bits = std::bit_cast<std::uint32_t>(bundle.payload[i]);
      for (int b = 0; b < 4; ++b) bytes[i * 4 + b] = static_cast<char>((bits >> (8 * b)) & 0xff);
    }
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::kIoFailure, "payload write failed");
  }
  write_lines(bundle.ids, dir / ids_name);
  if (bundle.labels) write_lines(*bundle.labels, dir / labels_name);

  std::vector<std::string> lines{
      "format_version=" + std::to_string(kBundleFormatVersion),
      "rows=" + std::to_string(bundle.rows),
      "cols=" + std::to_string(bundle.cols),
      "dtype=f32le",
      "payload_file=" + payload_name,
      "ids_file=" + ids_name,
  };
  if (bundle.labels) lines.push_back("labels_file=" + labels_name);
  write_lines(lines, manifest);
}

VectorBundle read_bundle(const fs::path& manifest) {
  std::map<std::string, std::string> fields;
  for (const auto& line : read_lines(manifest)) {
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    require(eq != std::string::npos && eq > 0, ErrorCode::kMalformedManifest,
            "manifest line is not key=value: '" + line + "'");
    require(fields.emplace(line.substr(0, eq), line.substr(eq + 1)).second,
            ErrorCode::kMalformedManifest, "repeated manifest key '" + line.substr(0, eq) + "'");
  }
  for (const char* key : {"format_version", "rows", "cols", "dtype", "ids_file"}) {
    require(fields.count(key) == 1, ErrorCode::kMalformedManifest,
            std::string("manifest is missing '") + key + "'");
  }
  require(parse_count(fields["format_version"], "format_version") ==
              static_cast<std::size_t>(kBundleFormatVersion),
          ErrorCode::kVersionUnsupported, "unsupported bundle format_version " +
                                              fields["format_version"]);
  require(fields["dtype"] == "f32le", ErrorCode::kMalformedManifest,
          "unsupported dtype '" + fields["dtype"] + "'");

  VectorBundle b;
  b.rows = parse_count(fields["rows"], "rows");
  b.cols = parse_count(fields["cols"], "cols");
  const fs::path dir = manifest.parent_path();
  const fs::path payload_path =
      dir / (fields.count("payload_file") ? fields["payload_file"] : manifest.stem().string() + ".f32");

  std::ifstream in(payload_path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIoFailure, "cannot open " + payload_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(bytes.size() == b.rows * b.cols * 4, ErrorCode::kSizeMismatch,
          "payload has " + std::to_string(bytes.size()) + " bytes, expected " +
              std::to_string(b.rows * b.cols * 4));
  b.payload.resize(b.rows * b.cols);
  for (std::size_t i = 0; i < b.payload.size(); ++i) {
    std::uint32_t bits = 0;
    for (int k = 0; k < 4; ++k) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[i * 4 + k])) << (8 * k);
    }
    b.payload[i] = std::bit_cast<float>(bits);
    require(std::isfinite(b.payload[i]), ErrorCode::kNonFiniteValue,
            "non-finite value at row " + std::to_string(i / std::max<std::size_t>(b.cols, 1)) +
                " of " + payload_path.string());
  }

  b.ids = read_lines(dir / fields["ids_file"]);
  if (fields.count("labels_file")) b.labels = read_lines(dir / fields["labels_file"]);
  b.validate();
  return b;
}

void write_run(const std::vector<QueryResult>& results, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::vector<std::string> lines;
  lines.reserve(results.size());
  for (const auto& r : results) {
    std::string line = r.query_id + '\t' + r.gold_label + '\t' + r.style_tag.value_or("-");
    for (const auto& l : r.ranked_labels) line += '\t' + l;
    lines.push_back(std::move(line));
  }
  write_lines(lines, path);
}

std::vector<QueryResult> read_run(const fs::path& path) {
  std::vector<QueryResult> out;
  std::size_t line_no = 0;
  for (const auto& line : read_lines(path)) {
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    require(cols.size() >= 4, ErrorCode::kMalformedManifest,
            path.string() + ":" + std::to_string(line_no) +
                ": expected query_id, gold, style and at least one label");
    QueryResult r;
    r.query_id = cols[0];
    r.gold_label = cols[1];
    if (cols[2] != "-") r.style_tag = cols[2];
    r.ranked_labels.assign(cols.begin() + 3, cols.end());
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace kahm
