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

// Registry container layout (all integers little-endian, reals float64 LE):
//
//   "KAHM1"                      5-byte magic
//   u32 format_version           currently 1
//   u32 covariance_divisor       1 = sample covariance with divisor N - 1
//   u32 law_count
//   law_count x section:
//     "LAW_"                     4-byte tag
//     u64 payload_bytes
//     u32 crc32(payload)
//     payload:
//       str law_id               u32 length + bytes
//       f64 omega, u32 k_trunc, u32 clusters
//       mat prototypes           u32 rows, u32 cols, rows*cols f64
//       u32 n_assignments, n x i32
//       clusters x { mat reference, mat encoding, mat theta, mat theta_inv,
//                    f64 lambda_star, mat membership_coeffs }

#include "kahm/data_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>

namespace fs = std::filesystem;

namespace kahm {
namespace {

constexpr char kMagic[5] = {'K', 'A', 'H', 'M', '1'};
constexpr char kLawTag[4] = {'L', 'A', 'W', '_'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void mat(const Matrix& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) f64(m.data()[i]);
  }
  std::vector<std::uint8_t>& buffer() { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size, ErrorCode on_short)
      : data_(data), size_(size), on_short_(on_short) {}

  const std::uint8_t* take(std::size_t n) {
    require(n <= size_ - pos_, on_short_, "unexpected end of data");
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  Matrix mat() {
    const std::uint32_t rows = u32();
    const std::uint32_t cols = u32();
    const std::uint64_t count = static_cast<std::uint64_t>(rows) * cols;
    require(count * 8 <= size_ - pos_, on_short_, "matrix exceeds section");
    Matrix m(rows, cols);
    for (std::uint64_t i = 0; i < count; ++i) m.data()[i] = f64();
    return m;
  }
  bool done() const { return pos_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  ErrorCode on_short_;
};

std::uint32_t checksum(const std::vector<std::uint8_t>& bytes) {
  return static_cast<std::uint32_t>(
      crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

std::vector<std::uint8_t> encode_law(const RegistryEntry& entry) {
  Writer w;
  const ClusterSet& set = entry.encoder;
  w.str(entry.law_id);
  w.f64(set.omega);
  w.u32(static_cast<std::uint32_t>(set.k_trunc));
  w.u32(static_cast<std::uint32_t>(set.cluster_count()));
  w.mat(set.prototypes);
  w.u32(static_cast<std::uint32_t>(set.assignments.size()));
  for (int a : set.assignments) w.u32(static_cast<std::uint32_t>(a));
  for (const auto& m : set.cluster_models) {
    w.mat(m.reference());
    w.mat(m.encoding());
    w.mat(m.theta());
    w.mat(m.theta_inv());
    w.f64(m.lambda_star());
    w.mat(m.membership_coeffs());
  }
  return std::move(w.buffer());
}

RegistryEntry decode_law(const std::uint8_t* data, std::size_t size) {
  Reader r(data, size, ErrorCode::kCorruptSection);
  RegistryEntry e;
  e.law_id = r.str();
  ClusterSet& set = e.encoder;
  set.omega = r.f64();
  set.k_trunc = static_cast<int>(r.u32());
  const std::uint32_t clusters = r.u32();
  set.prototypes = r.mat();
  const std::uint32_t n_assign = r.u32();
  require(n_assign <= size, ErrorCode::kCorruptSection, "assignment count exceeds section");
  set.assignments.resize(n_assign);
  for (auto& a : set.assignments) a = static_cast<int>(r.u32());
  require(clusters <= size, ErrorCode::kCorruptSection, "cluster count exceeds section");
  for (std::uint32_t c = 0; c < clusters; ++c) {
    Matrix reference = r.mat();
    Matrix encoding = r.mat();
    Matrix theta = r.mat();
    Matrix theta_inv = r.mat();
    const double lambda = r.f64();
    Matrix coeffs = r.mat();
    set.cluster_models.push_back(KahmModel::from_parts(std::move(reference), std::move(encoding),
                                                       std::move(theta), std::move(theta_inv),
                                                       lambda, std::move(coeffs)));
  }
  require(r.done(), ErrorCode::kCorruptSection, "trailing bytes in law section");
  set.validate();
  return e;
}

}  // namespace

std::vector<std::uint8_t> serialize_registry(const EncoderRegistry& registry) {
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u32(kRegistryFormatVersion);
  w.u32(kCovarianceDivisorUnbiased);
  w.u32(static_cast<std::uint32_t>(registry.size()));
  for (const auto& entry : registry.entries()) {
    const std::vector<std::uint8_t> payload = encode_law(entry);
    w.bytes(kLawTag, sizeof kLawTag);
    w.u64(payload.size());
    w.u32(checksum(payload));
    w.bytes(payload.data(), payload.size());
  }
  return std::move(w.buffer());
}

EncoderRegistry deserialize_registry(const std::vector<std::uint8_t>& bytes) {
  require(bytes.size() >= sizeof kMagic && std::memcmp(bytes.data(), kMagic, sizeof kMagic) == 0,
          ErrorCode::kBadMagic, "registry does not start with KAHM1");
  Reader r(bytes.data() + sizeof kMagic, bytes.size() - sizeof kMagic, ErrorCode::kCorruptSection);
  const std::uint32_t version = r.u32();
  require(version == kRegistryFormatVersion, ErrorCode::kVersionUnsupported,
          "registry format version " + std::to_string(version) + " is not supported");
  const std::uint32_t divisor = r.u32();
  require(divisor == kCovarianceDivisorUnbiased, ErrorCode::kVersionUnsupported,
          "covariance divisor convention " + std::to_string(divisor) + " is not supported");
  const std::uint32_t laws = r.u32();

  std::vector<RegistryEntry> entries;
  for (std::uint32_t i = 0; i < laws; ++i) {
    const auto* tag = r.take(sizeof kLawTag);
    require(std::memcmp(tag, kLawTag, sizeof kLawTag) == 0, ErrorCode::kCorruptSection,
            "section " + std::to_string(i) + " has an unknown tag");
    const std::uint64_t length = r.u64();
    const std::uint32_t crc = r.u32();
    const auto* payload = r.take(static_cast<std::size_t>(length));
    const std::vector<std::uint8_t> copy(payload, payload + length);
    require(checksum(copy) == crc, ErrorCode::kCorruptSection,
            "section " + std::to_string(i) + " fails its checksum");
    try {
      entries.push_back(decode_law(copy.data(), copy.size()));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kCorruptSection) throw;
      fail(ErrorCode::kCorruptSection, "section " + std::to_string(i) + ": " + e.what());
    }
  }
  require(r.done(), ErrorCode::kCorruptSection, "trailing bytes after the last section");
  return EncoderRegistry(std::move(entries));
}

void save_registry(const EncoderRegistry& registry, const fs::path& path) {
  const auto bytes = serialize_registry(registry);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::kIoFailure, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCode::kIoFailure, "registry write failed");
  }
  fs::rename(tmp, path);
}

EncoderRegistry load_registry(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::kIoFailure, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize_registry(bytes);
}

}  // namespace kahm
