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

#include <thread>

using namespace kahm;

namespace {

Matrix two_point() {
  Matrix x(2, 1);
  x << 1.0, -1.0;
  return x;
}

template <typename Fn>
ErrorCode code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::kInvalidArgument;
}

// Reference rows placed symmetrically around `center`, so A(center) = center.
Matrix symmetric_cloud(std::mt19937_64& gen, const Vector& center, int pairs) {
  const Matrix d = oracle::random_matrix(gen, pairs, static_cast<int>(center.size()));
  Matrix x(2 * pairs, center.size());
  for (int i = 0; i < pairs; ++i) {
    x.row(2 * i) = center.transpose() + d.row(i);
    x.row(2 * i + 1) = center.transpose() - d.row(i);
  }
  return x;
}

}  // namespace

TEST_CASE("encoding matrix keeps directions with nonzero projected range") {
  Matrix x(3, 2);
  x << 0, 0, 1, 0, 2, 0;
  const EncodingMatrix e = compute_encoding_matrix(x);
  CHECK(e.n_low == 1);
  CHECK(e.rows(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(e.rows(0, 1)) < 1e-12);
}

TEST_CASE("encoding dimension starts at min(20, n, N-1)") {
  std::mt19937_64 gen(11);
  const Matrix x = oracle::random_matrix(gen, 21, 50);
  CHECK(compute_encoding_matrix(x).n_low == 20);
  const Matrix y = oracle::random_matrix(gen, 6, 3);
  CHECK(compute_encoding_matrix(y).n_low == 3);
  const Matrix z = oracle::random_matrix(gen, 4, 9);
  CHECK(compute_encoding_matrix(z).n_low == 3);
}

TEST_CASE("encoding rows are unit-norm covariance eigenvectors with a positive leading entry") {
  std::mt19937_64 gen(12);
  const Matrix x = oracle::random_matrix(gen, 30, 6);
  const EncodingMatrix e = compute_encoding_matrix(x);
  const Matrix centered = x.rowwise() - x.colwise().mean();
  const Matrix cov = centered.transpose() * centered / (x.rows() - 1.0);
  for (int r = 0; r < e.n_low; ++r) {
    const Vector v = e.rows.row(r).transpose();
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-12));
    const double lambda = v.dot(cov * v);
    CHECK((cov * v - lambda * v).norm() < 1e-9);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    CHECK(v[arg] > 0.0);
  }
}

TEST_CASE("identical rows are degenerate") {
  Matrix x(3, 2);
  x << 1, 2, 1, 2, 1, 2;
  CHECK(code_of([&] { compute_encoding_matrix(x); }) == ErrorCode::kDegenerateData);
  CHECK(code_of([&] { build_model(x.topRows(2)); }) == ErrorCode::kDegenerateData);
}

TEST_CASE("projected covariance uses the N-1 divisor") {
  Matrix a(2, 1);
  a << 1, -1;
  CHECK(projected_covariance(a)(0, 0) == doctest::Approx(2.0).epsilon(1e-15));

  Matrix b(4, 2);
  b << 1, 0, -1, 0, 0, 1, 0, -1;
  const Matrix t = projected_covariance(b);
  CHECK(t(0, 0) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(t(1, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(std::abs(t(0, 1)) < 1e-15);

  Matrix c(2, 1);
  c << 0.5, 0.5;
  CHECK(code_of([&] { projected_covariance(c); }) == ErrorCode::kSingularCovariance);
}

TEST_CASE("gaussian kernel on the two-point model") {
  const KahmModel m = build_model(two_point());
  CHECK(m.n_low() == 1);
  CHECK(m.theta()(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  Vector u(1), v(1);
  u << 1.0;
  v << -1.0;
  CHECK(gaussian_kernel(u, v, m) == doctest::Approx(std::exp(-1.0)).epsilon(1e-14));
  CHECK(gaussian_kernel(u, u, m) == 1.0);
  CHECK(gaussian_kernel(u, v, m) == gaussian_kernel(v, u, m));
}

TEST_CASE("kernel matrix matches the defining formula") {
  std::mt19937_64 gen(13);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = oracle::random_matrix(gen, oracle::uniform_int(gen, 3, 25),
                                           oracle::uniform_int(gen, 1, 8));
    const KahmModel m = build_model(x);
    const Matrix k = m.kernel_matrix();
    CHECK((k - oracle::kernel_matrix_direct(m)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((k - k.transpose()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((k.diagonal().array() - 1.0).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("two-point fixed point") {
  const Matrix x = two_point();
  const KahmModel m = build_model(x);
  const Matrix k = m.kernel_matrix();
  std::vector<double> iterates;
  const LambdaSolution s = solve_lambda_star(x, k, &iterates);

  CHECK(s.tau == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(iterates.front() == doctest::Approx(0.5).epsilon(1e-15));  // inside (0, 1)

  // Scalar recursion along the (1, -1) eigenvector of K.
  const double gap = 2.0 + 1.0 - std::exp(-1.0);
  double e = 0.5;
  for (int i = 0; i < 10000; ++i) {
    const double next = ((e + 2.0) / (e + gap)) * ((e + 2.0) / (e + gap));
    if (std::abs(next - e) < 1e-15) break;
    e = next;
  }
  CHECK(s.e_hat == doctest::Approx(e).epsilon(1e-12));
  CHECK(std::abs(s.e_hat - 0.6521015922675449) < 1e-12);
  CHECK(std::abs(s.lambda_star - 2.65212) < 1e-4);
  CHECK(std::abs(oracle::residual_direct(x, k, s.e_hat, s.tau) - s.e_hat) < 1e-12);
  CHECK(m.lambda_star() == s.lambda_star);
}

TEST_CASE("two-point membership coefficients") {
  const KahmModel m = build_model(two_point());
  const Matrix& c = m.membership_coeffs();
  CHECK(c(0, 0) == doctest::Approx(0.27662175).epsilon(1e-7));
  CHECK(c(1, 1) == doctest::Approx(0.27662175).epsilon(1e-7));
  CHECK(c(0, 1) == doctest::Approx(-0.02786435).epsilon(1e-6));
  CHECK(c(0, 1) == c(1, 0));
  const Matrix reg = m.kernel_matrix() + m.lambda_star() * Matrix::Identity(2, 2);
  CHECK((c * reg - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two-point map and folding at x = 1") {
  const KahmModel m = build_model(two_point());
  Vector x(1);
  x << 1.0;
  const KahmImage img = kahm_map(m, x);
  CHECK(img.weights[0] == doctest::Approx(0.78282225).epsilon(1e-7));
  CHECK(img.weights[1] == doctest::Approx(0.21717775).epsilon(1e-7));
  CHECK(std::abs(img.point[0] - 0.5656445033086378) < 1e-12);

  const oracle::DirectImage d = oracle::kahm_map_direct(m, x);
  CHECK(d.h[0] == doctest::Approx(0.26637102).epsilon(1e-7));
  CHECK(d.h[1] == doctest::Approx(0.0738991).epsilon(1e-6));

  const FoldingScore f = folding_measure(m, x);
  CHECK(std::abs(f.euclidean_part - 0.35231803424172414) < 1e-12);
  CHECK(f.cosine_part == 0.0);
  CHECK(std::abs(f.total - 0.24912647114663738) < 1e-12);
}

TEST_CASE("folding combination and zero-vector convention") {
  const FoldingScore f = combine_folding(std::log(2.0), M_PI / 3.0);
  CHECK(f.euclidean_part == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(f.cosine_part == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(std::abs(f.total - 0.42491829279939874) < 1e-12);

  const KahmModel m = build_model(two_point());
  Vector zero = Vector::Zero(1);
  const FoldingScore z = folding_measure(m, zero);
  CHECK(z.cosine_part == 1.0);
  CHECK(z.total == doctest::Approx(std::sqrt(0.5 * (z.euclidean_part * z.euclidean_part + 1.0))));
}

TEST_CASE("zero data is rejected by the fixed-point solve") {
  const Matrix x = Matrix::Zero(3, 2);
  const Matrix k = Matrix::Identity(3, 3);
  CHECK(code_of([&] { solve_lambda_star(x, k); }) == ErrorCode::kZeroData);
}

TEST_CASE("map agrees with the unscaled direct formula") {
  std::mt19937_64 gen(14);
  for (int t = 0; t < 50; ++t) {
    const int n = oracle::uniform_int(gen, 1, 8);
    const Matrix x = oracle::random_matrix(gen, oracle::uniform_int(gen, 3, 30), n);
    const KahmModel m = build_model(x);
    const Vector q = oracle::random_matrix(gen, n, 1);
    const KahmImage img = kahm_map(m, q);
    const oracle::DirectImage d = oracle::kahm_map_direct(m, q);
    CHECK((img.weights - d.weights).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((img.point - d.point).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(folding_measure(m, q).total ==
          doctest::Approx(oracle::folding_total_direct(q, d.point)).epsilon(1e-9));
  }
}

TEST_CASE("far queries keep normalized weights") {
  const KahmModel m = build_model(two_point());
  Vector far(1);
  far << 60.0;
  const KahmImage img = kahm_map(m, far);
  CHECK(std::abs(img.weights.sum() - 1.0) < 1e-12);
  CHECK(std::isfinite(img.point[0]));
}

TEST_CASE("geometry invariants on random instances") {
  std::mt19937_64 gen(15);
  for (int t = 0; t < 60; ++t) {
    const int n = oracle::uniform_int(gen, 1, 10);
    const int rows = oracle::uniform_int(gen, 2, 50);
    const Matrix x = oracle::random_matrix(gen, rows, n);
    const KahmModel m = build_model(x);
    CHECK(m.n_low() >= 1);
    CHECK(m.n_low() <= std::min({20, n, rows - 1}));
    CHECK((m.theta_inv() * m.theta() - Matrix::Identity(m.n_low(), m.n_low())).cwiseAbs().maxCoeff() < 1e-8);
    CHECK((m.membership_coeffs() - m.membership_coeffs().transpose()).cwiseAbs().maxCoeff() < 1e-8);
    for (int q = 0; q < 5; ++q) {
      const Vector v = oracle::random_matrix(gen, n, 1, 1.5);
      const KahmImage img = kahm_map(m, v);
      CHECK(std::abs(img.weights.sum() - 1.0) < 1e-9);
      CHECK(oracle::affine_hull_residual(x, img.point) < 1e-6);
      const FoldingScore f = folding_measure(m, v);
      CHECK(f.total >= 0.0);
      CHECK(f.total <= 1.0);
      CHECK(f.euclidean_part < 1.0);
      CHECK(std::abs(f.total - std::sqrt(0.5 * (f.euclidean_part * f.euclidean_part +
                                                f.cosine_part * f.cosine_part))) < 1e-12);
    }
  }
}

TEST_CASE("symmetric reference clouds fix their center") {
  std::mt19937_64 gen(16);
  for (int t = 0; t < 20; ++t) {
    const int n = oracle::uniform_int(gen, 1, 6);
    const Vector center = oracle::random_matrix(gen, n, 1) + Vector::Constant(n, 3.0);
    const Matrix x = symmetric_cloud(gen, center, oracle::uniform_int(gen, 2, 10));
    const KahmModel m = build_model(x);
    CHECK((kahm_map(m, center).point - center).norm() < 1e-9);
    CHECK(folding_measure(m, center).total < 1e-6);
  }
}

TEST_CASE("fixed-point iterates contract") {
  std::mt19937_64 gen(17);
  for (int t = 0; t < 30; ++t) {
    const Matrix x = oracle::random_matrix(gen, oracle::uniform_int(gen, 2, 50),
                                           oracle::uniform_int(gen, 1, 10));
    const KahmModel m = build_model(x);
    std::vector<double> it;
    const LambdaSolution s = solve_lambda_star(x, m.kernel_matrix(), &it);
    CHECK(std::abs(oracle::residual_direct(x, m.kernel_matrix(), s.e_hat, s.tau) - s.e_hat) < 1e-12);
    const double upper = x.squaredNorm() / static_cast<double>(x.size());
    CHECK(it.front() > 0.0);
    CHECK(it.front() < upper);
    for (std::size_t i = 4; i + 1 < it.size(); ++i) {
      const double prev = std::abs(it[i] - it[i - 1]);
      const double next = std::abs(it[i + 1] - it[i]);
      if (prev < 1e-14) break;
      CHECK(next <= 0.999 * prev);
    }
  }
}

TEST_CASE("residual map matches direct solves") {
  std::mt19937_64 gen(18);
  for (int t = 0; t < 20; ++t) {
    const Matrix x = oracle::random_matrix(gen, oracle::uniform_int(gen, 2, 30),
                                           oracle::uniform_int(gen, 1, 6));
    const KahmModel m = build_model(x);
    const RegularizationMap r(x, m.kernel_matrix());
    for (double e : {0.01, 0.3, 1.7}) {
      CHECK(r(e, 0.5) == doctest::Approx(oracle::residual_direct(x, m.kernel_matrix(), e, 0.5)).epsilon(1e-10));
    }
  }
}

TEST_CASE("from_parts rejects broken invariants") {
  const KahmModel m = build_model(two_point());
  CHECK(code_of([&] {
          KahmModel::from_parts(m.reference(), m.encoding(), m.theta(), m.theta_inv(), -1.0,
                                m.membership_coeffs());
        }) == ErrorCode::kInvalidArgument);
  Matrix asym = m.membership_coeffs();
  asym(0, 1) += 1e-3;
  CHECK(code_of([&] {
          KahmModel::from_parts(m.reference(), m.encoding(), m.theta(), m.theta_inv(),
                                m.lambda_star(), asym);
        }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("concurrent reads match sequential reads") {
  std::mt19937_64 gen(19);
  const Matrix x = oracle::random_matrix(gen, 40, 5);
  const KahmModel m = build_model(x);
  const Matrix queries = oracle::random_matrix(gen, 64, 5);
  std::vector<double> seq(64), par(64);
  for (int i = 0; i < 64; ++i) seq[static_cast<std::size_t>(i)] = folding_measure(m, queries.row(i).transpose()).total;
  std::vector<std::thread> threads;
  for (int w = 0; w < 4; ++w) {
    threads.emplace_back([&, w] {
      for (int i = w; i < 64; i += 4) {
        par[static_cast<std::size_t>(i)] = folding_measure(m, queries.row(i).transpose()).total;
      }
    });
  }
  for (auto& t : threads) t.join();
  CHECK(seq == par);
}
