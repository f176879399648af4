// Copyright 2026 The pivotdt Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>

#include "doctest.h"
#include "pivotdt/datagen.hpp"
#include "pivotdt/errors.hpp"
#include "pivotdt/matrix.hpp"

using namespace pivotdt;

namespace {

std::vector<double> eigen_oracle(const SymMatrix& a) {
  const int n = a.dim();
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m(i, j) = a(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  std::vector<double> v(es.eigenvalues().data(), es.eigenvalues().data() + n);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("pivot index enumeration") {
  CHECK(pivot_to_pair(PivotIndex{0}, 5) == PivotPair{0, 1});
  CHECK(pivot_to_pair(PivotIndex{4}, 5) == PivotPair{1, 2});
  CHECK(pivot_to_pair(PivotIndex{9}, 5) == PivotPair{3, 4});
  CHECK_THROWS_AS(pivot_to_pair(PivotIndex{10}, 5), IndexError);
  CHECK_THROWS_AS(pivot_to_pair(PivotIndex{-1}, 5), IndexError);
  for (int n = 2; n <= 10; ++n) {
    int k = 0;
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j, ++k) {
        CHECK(pivot_to_pair(PivotIndex{k}, n) == PivotPair{i, j});
        CHECK(pair_to_pivot(PivotPair{i, j}, n).value == k);
      }
    }
    CHECK(k == pivot_count(n));
  }
}

TEST_CASE("construction validates symmetry and finiteness") {
  CHECK_THROWS_AS(SymMatrix::from_values(2, {1, 2, 3, 4}), ValidationError);
  CHECK_THROWS_AS(SymMatrix::from_values(2, {1, 2, 2}), DimensionError);
  CHECK_THROWS_AS(SymMatrix::from_values(1, {std::numeric_limits<double>::quiet_NaN()}), ValidationError);
  const SymMatrix a = SymMatrix::from_rows({{1, 2}, {2, 3}});
  CHECK(a(0, 1) == 2.0);
  CHECK(a(1, 0) == 2.0);
}

TEST_CASE("rotation of the 2x2 example") {
  const SymMatrix a = SymMatrix::from_rows({{2, 1}, {1, 2}});
  const SymMatrix r = jacobi_rotate(a, PivotIndex{0});
  CHECK(r(0, 1) == 0.0);
  CHECK(r(1, 0) == 0.0);
  std::vector<double> d{r(0, 0), r(1, 1)};
  std::sort(d.begin(), d.end());
  CHECK(d[0] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(d[1] == doctest::Approx(3.0).epsilon(1e-15));
}

TEST_CASE("zero pivot leaves the matrix unchanged") {
  const SymMatrix d = SymMatrix::diagonal({5, 7, 9});
  for (int k = 0; k < 3; ++k) CHECK(jacobi_rotate(d, PivotIndex{k}) == d);
}

TEST_CASE("rotation properties on random matrices") {
  Rng rng = make_rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = 2 + trial % 5;
    const SymMatrix a = sample_symmetric_matrix(n, rng);
    const PivotIndex k{uniform_int(rng, pivot_count(n))};
    const PivotPair p = pivot_to_pair(k, n);
    const SymMatrix r = jacobi_rotate(a, k);
    CHECK(r(p.row, p.col) == 0.0);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) CHECK(r(i, j) == r(j, i));
    CHECK(std::abs(r.trace() - a.trace()) <= 1e-12);
    CHECK(std::abs(r.frobenius_sq() - a.frobenius_sq()) <= 1e-12);
    const double expect = a.offnorm_sq() - 2 * a(p.row, p.col) * a(p.row, p.col);
    CHECK(std::abs(r.offnorm_sq() - expect) <= 1e-12 * std::max(1.0, a.offnorm_sq()));
    // Only rows and columns p.row, p.col change.
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        if (i != p.row && i != p.col && j != p.row && j != p.col) CHECK(r(i, j) == a(i, j));
      }
    }
    const auto ea = eigen_oracle(a);
    const auto er = eigen_oracle(r);
    const auto own = eigenvalues(r);
    for (int i = 0; i < n; ++i) {
      CHECK(std::abs(ea[i] - er[i]) <= 1e-9);
      CHECK(std::abs(ea[i] - own[i]) <= 1e-9);
    }
  }
}

TEST_CASE("huge tau does not overflow") {
  const SymMatrix a = SymMatrix::from_rows({{1.0, 1e-200}, {1e-200, -1.0}});
  const SymMatrix r = jacobi_rotate(a, PivotIndex{0});
  CHECK(std::isfinite(r(0, 0)));
  CHECK(r(0, 1) == 0.0);
  CHECK(r(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("zero counting and diagonal test") {
  const ZeroTolerance tol;
  CHECK(count_offdiag_zeros(SymMatrix::diagonal({1, 2, 3}), tol) == 3);
  CHECK(count_offdiag_zeros(SymMatrix::from_rows({{1, 0, 2}, {0, 1, 0}, {2, 0, 1}}), tol) == 2);
  Rng rng = make_rng(3);
  MatrixDistribution dist;
  dist.low = 0.2;
  dist.high = 1.0;
  CHECK(count_offdiag_zeros(sample_symmetric_matrix(5, rng, dist), tol) == 0);
  CHECK(is_diagonal(SymMatrix::diagonal({1, 2, 3})));
  CHECK_FALSE(is_diagonal(SymMatrix::from_rows({{1, 0.5}, {0.5, 1}})));
  CHECK(is_diagonal(SymMatrix::from_rows({{1, 1e-12}, {1e-12, 1}})));
  CHECK_THROWS_AS(ZeroTolerance(0.0), ValidationError);
  CHECK_THROWS_AS(ZeroTolerance(-1.0), ValidationError);
}

TEST_CASE("max off-diagonal element") {
  auto m = max_offdiag(SymMatrix::from_rows({{1, 2}, {2, 1}}));
  CHECK(m.value == 2.0);
  CHECK(m.pivot.value == 0);
  m = max_offdiag(SymMatrix::from_rows({{1, 0, 3}, {0, 1, 0}, {3, 0, 1}}));
  CHECK(m.value == 3.0);
  CHECK(m.pivot.value == 1);
  m = max_offdiag(SymMatrix::from_rows({{0, 2, 2}, {2, 0, 0}, {2, 0, 0}}));
  CHECK(m.value == 2.0);
  CHECK(m.pivot.value == 0);
  m = max_offdiag(SymMatrix::from_rows({{0, 1, -4}, {1, 0, 0}, {-4, 0, 0}}));
  CHECK(m.value == 4.0);
  CHECK(m.pivot.value == 1);
  CHECK_THROWS_AS(max_offdiag(SymMatrix::diagonal({1})), DimensionError);
}

TEST_CASE("scaling by the largest entry") {
  auto s = scale_by_max(SymMatrix::from_rows({{2, 4}, {4, 2}}));
  CHECK(s.factor == 4.0);
  CHECK(s.matrix == SymMatrix::from_rows({{0.5, 1}, {1, 0.5}}));
  s = scale_by_max(SymMatrix(3));
  CHECK(s.factor == 1.0);
  CHECK(s.matrix == SymMatrix(3));
  s = scale_by_max(SymMatrix::from_rows({{-8, 2}, {2, 1}}));
  CHECK(s.factor == 8.0);
  CHECK(s.matrix == SymMatrix::from_rows({{-1, 0.25}, {0.25, 0.125}}));

  Rng rng = make_rng(5);
  for (int t = 0; t < 100; ++t) {
    const SymMatrix a = sample_symmetric_matrix(2 + t % 5, rng);
    const auto sc = scale_by_max(a);
    CHECK(max_offdiag(sc.matrix).pivot == max_offdiag(a).pivot);
    for (double v : sc.matrix.values()) CHECK(std::abs(v) <= 1.0);
    const auto ea = eigen_oracle(a);
    const auto es = eigen_oracle(sc.matrix);
    for (std::size_t i = 0; i < ea.size(); ++i) CHECK(std::abs(es[i] * sc.factor - ea[i]) <= 1e-9);
  }
}

TEST_CASE("padding") {
  Rng rng = make_rng(9);
  const SymMatrix a = sample_symmetric_matrix(3, rng);
  const SymMatrix p = pad_matrix(a, 5);
  CHECK(count_offdiag_zeros(p) >= 7);
  CHECK(pad_matrix(a, 3) == a);
  CHECK(pad_matrix(SymMatrix::diagonal({1, 2}), 4) == SymMatrix::diagonal({1, 2, 0, 0}));
  CHECK_THROWS_AS(pad_matrix(p, 3), DimensionError);
  auto ep = eigen_oracle(p);
  auto ea = eigen_oracle(a);
  ea.push_back(0.0);
  ea.push_back(0.0);
  std::sort(ea.begin(), ea.end());
  for (int i = 0; i < 5; ++i) CHECK(std::abs(ep[i] - ea[i]) <= 1e-12);
  // Rotation inside the block commutes with padding.
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      const SymMatrix lhs = jacobi_rotate(p, pair_to_pivot({i, j}, 5));
      const SymMatrix rhs = pad_matrix(jacobi_rotate(a, pair_to_pivot({i, j}, 3)), 5);
      CHECK(lhs == rhs);
    }
  }
}
