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

#include "oracles.hpp"

#include <doctest.h>

using namespace kahm;

namespace {

std::vector<std::string> names(std::size_t n, const char* prefix) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

ErrorCode build_error(Matrix m, std::vector<std::string> ids) {
  const auto labels = names(ids.size(), "l");
  try {
    build_index(std::move(m), std::move(ids), labels);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("rows are normalized on build") {
  Matrix m(1, 2);
  m << 3, 4;
  const FlatIndex idx = build_index(m, {"a"}, {"x"});
  CHECK(idx.vectors()(0, 0) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(idx.vectors()(0, 1) == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("build rejects duplicates and zero rows") {
  Matrix m(2, 2);
  m << 1, 0, 0, 1;
  CHECK(build_error(m, {"a", "a"}) == ErrorCode::kDuplicateId);
  m.row(1).setZero();
  CHECK(build_error(m, {"a", "b"}) == ErrorCode::kZeroRow);
}

TEST_CASE("three-row hand-computed ranking") {
  Matrix m(3, 2);
  m << 1, 0, 0, 1, 1 / std::sqrt(2.0), 1 / std::sqrt(2.0);
  const FlatIndex idx = build_index(m, {"r1", "r2", "r3"}, {"A", "B", "C"});
  const Vector q = (Vector(2) << 1, 0).finished();
  const auto hits = search(idx, q, 3);
  REQUIRE(hits.size() == 3);
  CHECK(hits[0].row == 0);
  CHECK(hits[1].row == 2);
  CHECK(hits[2].row == 1);
  CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(hits[1].score == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK(std::abs(hits[2].score) < 1e-12);
  CHECK(hits[1].id == "r3");
  CHECK(hits[1].label == "C");
}

TEST_CASE("self query ranks first and zero queries fail") {
  std::mt19937_64 gen(31);
  const Matrix m = oracle::random_matrix(gen, 20, 5);
  const FlatIndex idx = build_index(m, names(20, "id"), names(20, "lab"));
  const auto hits = search(idx, m.row(7).transpose(), 1);
  CHECK(hits[0].row == 7);
  CHECK(hits[0].score == doctest::Approx(1.0).epsilon(1e-9));
  bool threw = false;
  try {
    search(idx, Vector::Zero(5), 3);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kEmptyQuery;
  }
  CHECK(threw);
}

TEST_CASE("search equals brute-force scoring with a stable sort") {
  std::mt19937_64 gen(32);
  for (int t = 0; t < 200; ++t) {
    const int rows = oracle::uniform_int(gen, 1, 1000);
    const int dim = oracle::uniform_int(gen, 1, 8);
    Matrix m = oracle::random_matrix(gen, rows, dim);
    // Duplicate some rows so exact ties occur.
    for (int i = 1; i < rows; i += 7) m.row(i) = m.row(i - 1) * 2.0;
    const FlatIndex idx = build_index(m, names(static_cast<std::size_t>(rows), "i"),
                                      names(static_cast<std::size_t>(rows), "l"));
    const Vector q = oracle::random_matrix(gen, dim, 1);
    const auto k = static_cast<std::size_t>(oracle::uniform_int(gen, 1, rows));
    const auto hits = search(idx, q, k);
    const auto expect = oracle::brute_search(idx.vectors(), q, k);
    REQUIRE(hits.size() == k);
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < k; ++i) mismatches += hits[i].row != expect[i] ? 1 : 0;
    CHECK(mismatches == 0);
  }
}

TEST_CASE("full ranking is a permutation and ignores query scale") {
  std::mt19937_64 gen(33);
  const Matrix m = oracle::random_matrix(gen, 50, 4);
  const FlatIndex idx = build_index(m, names(50, "i"), names(50, "l"));
  const Vector q = oracle::random_matrix(gen, 4, 1);
  const auto a = search(idx, q, 50);
  const auto b = search(idx, q * 37.5, 50);
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < 50; ++i) {
    CHECK(a[i].row == b[i].row);
    rows.push_back(a[i].row);
  }
  std::sort(rows.begin(), rows.end());
  for (std::size_t i = 0; i < 50; ++i) CHECK(rows[i] == i);
}

TEST_CASE("label prior") {
  Matrix m = Matrix::Identity(4, 4);
  const FlatIndex idx = build_index(m, {"a", "b", "c", "d"}, {"x", "y", "x", "x"});
  const auto prior = idx.label_prior();
  REQUIRE(prior.size() == 2);
  CHECK(prior[0].first == "x");
  CHECK(prior[0].second == 0.75);
  CHECK(prior[1].second == 0.25);
}
