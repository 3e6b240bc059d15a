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

#include "kahm/data_io.hpp"
#include "kahm/gateway.hpp"
#include "kahm/pipeline.hpp"

#include <doctest.h>

#include <thread>

using namespace kahm;

namespace {

const TrainOutcome& trained() {
  static const TrainOutcome out = [] {
    SyntheticSpec spec;
    spec.n_laws = 2;
    spec.clusters_per_law = 4;
    spec.samples_per_cluster = 15;
    spec.seed = 9;
    const SyntheticData d = generate_synthetic(spec);
    TrainConfig cfg;
    cfg.n_clusters = 4;
    return train_registry(d.train_lexical, d.train_semantic, d.train_labels, cfg, 1);
  }();
  return out;
}

const SyntheticData& data() {
  static const SyntheticData d = [] {
    SyntheticSpec spec;
    spec.n_laws = 2;
    spec.clusters_per_law = 4;
    spec.samples_per_cluster = 15;
    spec.seed = 9;
    return generate_synthetic(spec);
  }();
  return d;
}

}  // namespace

TEST_CASE("selection score is the minimum cluster folding total") {
  const auto& reg = trained().registry;
  const Vector x = data().test_lexical.row(0).transpose();
  for (const auto& e : reg.entries()) {
    const auto totals = folding_totals(x, e.encoder.cluster_models);
    CHECK(selection_score(e.encoder, x) == *std::min_element(totals.begin(), totals.end()));
    CHECK(selection_score(e.encoder, x) >= 0.0);
    CHECK(selection_score(e.encoder, x) <= 1.0);
  }
}

TEST_CASE("encode_query selects the argmin law and normalizes") {
  const auto& reg = trained().registry;
  const auto& d = data();
  for (Eigen::Index i = 0; i < d.test_lexical.rows(); ++i) {
    const Vector x = d.test_lexical.row(i).transpose();
    const EncodedQuery q = encode_query(reg, x);
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (std::size_t e = 0; e < reg.size(); ++e) {
      const double s = selection_score(reg.entries()[e].encoder, x);
      if (s < best) {
        best = s;
        arg = e;
      }
    }
    CHECK(q.entry == arg);
    CHECK(q.score == best);
    CHECK(q.law_id == reg.entries()[arg].law_id);
    CHECK(std::abs(q.embedding.norm() - 1.0) < 1e-9);
    const Vector raw = predict_embedding(x, reg.entries()[arg].encoder);
    CHECK((q.embedding - raw / raw.norm()).cwiseAbs().maxCoeff() < 1e-15);
    const EncodedQuery u = encode_query(reg, x, false);
    CHECK((u.embedding - raw).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("single-law registry always selects that law") {
  const auto& full = trained().registry;
  const EncoderRegistry one({full.entries()[1]});
  for (Eigen::Index i = 0; i < 10; ++i) {
    CHECK(encode_query(one, data().test_lexical.row(i).transpose()).law_id == full.entries()[1].law_id);
  }
}

TEST_CASE("registry ordering, duplicates and emptiness") {
  const auto& full = trained().registry;
  std::vector<RegistryEntry> rev{full.entries()[1], full.entries()[0]};
  const EncoderRegistry sorted(rev);
  CHECK(sorted.entries()[0].law_id < sorted.entries()[1].law_id);

  std::vector<RegistryEntry> dup{full.entries()[0], full.entries()[0]};
  bool threw = false;
  try {
    EncoderRegistry bad(dup);
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kDuplicateId;
  }
  CHECK(threw);

  const EncoderRegistry empty;
  threw = false;
  try {
    encode_query(empty, Vector::Zero(3));
  } catch (const Error& e) {
    threw = e.code() == ErrorCode::kEmptyRegistry;
  }
  CHECK(threw);
}

TEST_CASE("exact score ties go to the smaller law id") {
  const auto& full = trained().registry;
  RegistryEntry a = full.entries()[0];
  RegistryEntry b = full.entries()[0];
  a.law_id = "alpha";
  b.law_id = "beta";
  const EncoderRegistry twins({b, a});
  CHECK(encode_query(twins, data().test_lexical.row(3).transpose()).law_id == "alpha");
}

TEST_CASE("encode_query is deterministic under concurrency") {
  const auto& reg = trained().registry;
  const Matrix& q = data().test_lexical;
  std::vector<Vector> seq(static_cast<std::size_t>(q.rows())), par(seq.size());
  for (Eigen::Index i = 0; i < q.rows(); ++i) seq[static_cast<std::size_t>(i)] = encode_query(reg, q.row(i).transpose()).embedding;
  std::vector<std::thread> threads;
  for (int w = 0; w < 3; ++w) {
    threads.emplace_back([&, w] {
      for (Eigen::Index i = w; i < q.rows(); i += 3) par[static_cast<std::size_t>(i)] = encode_query(reg, q.row(i).transpose()).embedding;
    });
  }
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < seq.size(); ++i) CHECK(seq[i] == par[i]);
}

TEST_CASE("routing is perfect on separated noise-free laws") {
  const auto& reg = trained().registry;
  const auto& d = data();
  for (Eigen::Index i = 0; i < d.test_lexical.rows(); ++i) {
    CHECK(encode_query(reg, d.test_lexical.row(i).transpose()).law_id ==
          d.test_labels[static_cast<std::size_t>(i)]);
  }
}
