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

#include "pivotdt/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pivotdt {

ZeroTolerance::ZeroTolerance(double value) : value_(value) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw ValidationError("zero tolerance must be positive and finite, got " + std::to_string(value));
  }
}

PivotPair pivot_to_pair(PivotIndex k, int n) {
  if (n < 2 || k.value < 0 || k.value >= pivot_count(n)) {
    throw IndexError("pivot index " + std::to_string(k.value) + " out of range for n=" + std::to_string(n));
  }
  int remaining = k.value;
  for (int i = 0; i < n - 1; ++i) {
    const int row_len = n - 1 - i;
    if (remaining < row_len) return {i, i + 1 + remaining};
    remaining -= row_len;
  }
  throw IndexError("unreachable pivot enumeration");
}

PivotIndex pair_to_pivot(PivotPair p, int n) {
  if (p.row < 0 || p.col >= n || p.row >= p.col) {
    throw IndexError("pair (" + std::to_string(p.row) + "," + std::to_string(p.col) +
                     ") is not strictly upper triangular for n=" + std::to_string(n));
  }
  // Rows 0..i-1 contribute (n-1) + (n-2) + ... + (n-i) entries.
  const int before = p.row * (2 * n - p.row - 1) / 2;
  return PivotIndex{before + (p.col - p.row - 1)};
}

SymMatrix::SymMatrix(int n) : n_(n) {
  if (n < 1) throw DimensionError("matrix dimension must be positive");
  values_.assign(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
}

SymMatrix SymMatrix::from_values(int n, std::vector<double> values) {
  if (n < 1) throw DimensionError("matrix dimension must be positive");
  if (values.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    throw DimensionError("expected " + std::to_string(n * n) + " values, got " + std::to_string(values.size()));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw ValidationError("matrix entries must be finite");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (values[i * n + j] != values[j * n + i]) {
        throw ValidationError("matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
  SymMatrix m;
  m.n_ = n;
  m.values_ = std::move(values);
  return m;
}

SymMatrix SymMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const int n = static_cast<int>(rows.size());
  std::vector<double> values;
  values.reserve(rows.size() * rows.size());
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != n) throw DimensionError("matrix rows must form a square");
    values.insert(values.end(), row.begin(), row.end());
  }
  return from_values(n, std::move(values));
}

SymMatrix SymMatrix::diagonal(std::span<const double> diag) {
  SymMatrix m(static_cast<int>(diag.size()));
  for (int i = 0; i < m.n_; ++i) m.values_[m.index(i, i)] = diag[i];
  return m;
}

SymMatrix SymMatrix::diagonal(std::initializer_list<double> diag) {
  return diagonal(std::span<const double>(diag.begin(), diag.size()));
}

void SymMatrix::set(int i, int j, double v) {
  values_[index(i, j)] = v;
  values_[index(j, i)] = v;
}

double SymMatrix::trace() const {
  double t = 0.0;
  for (int i = 0; i < n_; ++i) t += (*this)(i, i);
  return t;
}

double SymMatrix::frobenius_sq() const {
  double s = 0.0;
  for (double v : values_) s += v * v;
  return s;
}

double SymMatrix::offnorm_sq() const {
  double s = 0.0;
  for (int i = 0; i < n_; ++i) {
    for (int j = i + 1; j < n_; ++j) s += (*this)(i, j) * (*this)(i, j);
  }
  return 2.0 * s;
}

void jacobi_rotate_inplace(SymMatrix& a, PivotIndex k) {
  const int n = a.dim();
  const auto [p, q] = pivot_to_pair(k, n);
  const double apq = a(p, q);
  if (apq == 0.0) return;

  const double tau = (a(q, q) - a(p, p)) / (2.0 * apq);
  double t;
  if (std::abs(tau) > 1e150) {
    t = 0.5 / tau;
  } else {
    const double sign = tau >= 0.0 ? 1.0 : -1.0;
    t = sign / (std::abs(tau) + std::sqrt(1.0 + tau * tau));
  }
  const double c = 1.0 / std::sqrt(1.0 + t * t);
  const double s = t * c;

  for (int r = 0; r < n; ++r) {
    if (r == p || r == q) continue;
    const double arp = a(r, p);
    const double arq = a(r, q);
    a.set(r, p, c * arp - s * arq);
    a.set(r, q, s * arp + c * arq);
  }
  a.set(p, p, a(p, p) - t * apq);
  a.set(q, q, a(q, q) + t * apq);
  a.set(p, q, 0.0);
}

SymMatrix jacobi_rotate(const SymMatrix& a, PivotIndex k) {
  SymMatrix out = a;
  jacobi_rotate_inplace(out, k);
  return out;
}

int count_offdiag_zeros(const SymMatrix& a, ZeroTolerance tol) {
  const int n = a.dim();
  int count = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (std::abs(a(i, j)) <= tol.value()) ++count;
    }
  }
  return count;
}

bool is_diagonal(const SymMatrix& a, ZeroTolerance tol) {
  return count_offdiag_zeros(a, tol) == pivot_count(a.dim());
}

MaxOffdiag max_offdiag(const SymMatrix& a) {
  const int n = a.dim();
  if (n < 2) throw DimensionError("max_offdiag needs n >= 2");
  MaxOffdiag best{-1.0, PivotIndex{0}};
  int k = 0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j, ++k) {
      const double v = std::abs(a(i, j));
      if (v > best.value) best = {v, PivotIndex{k}};
    }
  }
  return best;
}

ScaledMatrix scale_by_max(const SymMatrix& a) {
  double factor = 0.0;
  for (double v : a.values()) factor = std::max(factor, std::abs(v));
  if (factor == 0.0) return {a, 1.0};
  std::vector<double> values(a.values().begin(), a.values().end());
  for (double& v : values) v /= factor;
  return {SymMatrix::from_values(a.dim(), std::move(values)), factor};
}

SymMatrix pad_matrix(const SymMatrix& a, int n) {
  const int m = a.dim();
  if (m > n) {
    throw DimensionError("cannot pad a " + std::to_string(m) + "x" + std::to_string(m) + " matrix to " +
                         std::to_string(n));
  }
  SymMatrix out(n);
  for (int i = 0; i < m; ++i) {
    for (int j = i; j < m; ++j) out.set(i, j, a(i, j));
  }
  return out;
}

std::vector<double> eigenvalues(const SymMatrix& a) {
  SymMatrix work = a;
  const int n = a.dim();
  const double scale = std::max(1e-300, work.frobenius_sq());
  for (int sweep = 0; sweep < 100; ++sweep) {
    if (work.offnorm_sq() <= 1e-32 * scale) break;
    for (int k = 0; k < pivot_count(n); ++k) jacobi_rotate_inplace(work, PivotIndex{k});
  }
  std::vector<double> ev(n);
  for (int i = 0; i < n; ++i) ev[i] = work(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace pivotdt
