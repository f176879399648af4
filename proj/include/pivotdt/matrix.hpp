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

#ifndef PIVOTDT_MATRIX_HPP_
#define PIVOTDT_MATRIX_HPP_

#include <compare>
#include <initializer_list>
#include <span>
#include <utility>
#include <vector>

#include "pivotdt/errors.hpp"

namespace pivotdt {

// Linear index over the strictly upper off-diagonal positions of an n x n
// matrix, enumerated row-major: 0 <-> (0,1), 1 <-> (0,2), ..., last <-> (n-2,n-1).
struct PivotIndex {
  int value = 0;

  friend auto operator<=>(const PivotIndex&, const PivotIndex&) = default;
};

using PivotSequence = std::vector<PivotIndex>;

struct PivotPair {
  int row = 0;
  int col = 0;

  friend bool operator==(const PivotPair&, const PivotPair&) = default;
};

// Absolute threshold at or below which an off-diagonal entry counts as zero.
class ZeroTolerance {
 public:
  static constexpr double kDefault = 1e-8;

  constexpr ZeroTolerance() = default;
  explicit ZeroTolerance(double value);

  double value() const { return value_; }

 private:
  double value_ = kDefault;
};

// Number of actions for an n x n matrix: n(n-1)/2.
constexpr int pivot_count(int n) { return n * (n - 1) / 2; }

PivotPair pivot_to_pair(PivotIndex k, int n);
PivotIndex pair_to_pivot(PivotPair p, int n);

// Dense real symmetric matrix, row-major. Symmetry is exact: every mutation
// writes both (i,j) and (j,i).
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(int n);

  // Validates shape, finiteness and exact symmetry.
  static SymMatrix from_values(int n, std::vector<double> values);
  static SymMatrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static SymMatrix diagonal(std::span<const double> diag);
  static SymMatrix diagonal(std::initializer_list<double> diag);

  int dim() const { return n_; }
  double operator()(int i, int j) const { return values_[index(i, j)]; }
  void set(int i, int j, double v);

  std::span<const double> values() const { return values_; }

  double trace() const;
  double frobenius_sq() const;
  // Sum of squares over all off-diagonal entries (both triangles).
  double offnorm_sq() const;

  friend bool operator==(const SymMatrix&, const SymMatrix&) = default;

 private:
  std::size_t index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j);
  }

  int n_ = 0;
  std::vector<double> values_;
};

// Two-sided Jacobi rotation that annihilates the pivot entry. The pivot pair is
// written as literal zero; a zero pivot leaves the matrix unchanged.
SymMatrix jacobi_rotate(const SymMatrix& a, PivotIndex k);
void jacobi_rotate_inplace(SymMatrix& a, PivotIndex k);

int count_offdiag_zeros(const SymMatrix& a, ZeroTolerance tol = {});
bool is_diagonal(const SymMatrix& a, ZeroTolerance tol = {});

struct MaxOffdiag {
  double value = 0.0;
  PivotIndex pivot;
};

// Largest |a_ij| over i<j; ties go to the smallest pivot index.
MaxOffdiag max_offdiag(const SymMatrix& a);

struct ScaledMatrix {
  SymMatrix matrix;
  double factor = 1.0;
};

// Divides by max |a_pq| over all entries. The zero matrix is returned as is
// with factor 1.
ScaledMatrix scale_by_max(const SymMatrix& a);

// Embeds a in the top-left block of an n x n zero matrix.
SymMatrix pad_matrix(const SymMatrix& a, int n);

// Ascending eigenvalues via cyclic Jacobi sweeps run to machine precision.
std::vector<double> eigenvalues(const SymMatrix& a);

}  // namespace pivotdt

#endif  // PIVOTDT_MATRIX_HPP_
