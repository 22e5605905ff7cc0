// Copyright 2026 The CIT Workbench Authors
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

#include "cit/matrix.hpp"

#include <algorithm>
#include <cmath>

#include "cit/errors.hpp"

namespace cit {

std::string Shape::str() const {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("DenseMatrix: " + std::to_string(data_.size()) +
                     " values for shape " + Shape{rows, cols}.str());
  }
}

DenseMatrix DenseMatrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("DenseMatrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void DenseMatrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

DenseMatrix DenseMatrix::transposed() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

SparseMatrix::SparseMatrix(std::size_t rows, std::size_t cols,
                           std::vector<std::size_t> row_offsets,
                           std::vector<std::size_t> col_indices, std::vector<double> values)
    : rows_(rows),
      cols_(cols),
      row_offsets_(std::move(row_offsets)),
      col_indices_(std::move(col_indices)),
      values_(std::move(values)) {
  if (row_offsets_.size() != rows_ + 1 || row_offsets_.front() != 0 ||
      row_offsets_.back() != col_indices_.size() || col_indices_.size() != values_.size()) {
    throw ShapeError("SparseMatrix: inconsistent CSR arrays for shape " + shape().str());
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    if (row_offsets_[r] > row_offsets_[r + 1])
      throw ShapeError("SparseMatrix: row offsets not monotone");
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      if (col_indices_[k] >= cols_)
        throw ShapeError("SparseMatrix: column index out of range in row " + std::to_string(r));
      if (k > row_offsets_[r] && col_indices_[k] <= col_indices_[k - 1])
        throw ShapeError("SparseMatrix: column indices not strictly increasing in row " +
                         std::to_string(r));
      if (!std::isfinite(values_[k])) throw NumericalError("SparseMatrix: non-finite value");
    }
  }
}

SparseMatrix SparseMatrix::from_triplets(std::size_t rows, std::size_t cols,
                                         std::vector<Triplet> triplets) {
  std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
    return a.row != b.row ? a.row < b.row : a.col < b.col;
  });
  std::vector<std::size_t> offsets(rows + 1, 0);
  std::vector<std::size_t> cols_out;
  std::vector<double> vals;
  cols_out.reserve(triplets.size());
  vals.reserve(triplets.size());
  for (std::size_t i = 0; i < triplets.size(); ++i) {
    const auto& t = triplets[i];
    if (t.row >= rows || t.col >= cols) {
      throw ShapeError("SparseMatrix::from_triplets: entry (" + std::to_string(t.row) + "," +
                       std::to_string(t.col) + ") outside " + Shape{rows, cols}.str());
    }
    if (i > 0 && triplets[i - 1].row == t.row && triplets[i - 1].col == t.col) {
      vals.back() += t.value;
      continue;
    }
    cols_out.push_back(t.col);
    vals.push_back(t.value);
    ++offsets[t.row + 1];
  }
  for (std::size_t r = 0; r < rows; ++r) offsets[r + 1] += offsets[r];
  return SparseMatrix(rows, cols, std::move(offsets), std::move(cols_out), std::move(vals));
}

SparseMatrix SparseMatrix::identity(std::size_t n) {
  std::vector<double> ones(n, 1.0);
  return diagonal(ones);
}

SparseMatrix SparseMatrix::diagonal(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> offsets(n + 1), cols(n);
  for (std::size_t i = 0; i < n; ++i) {
    offsets[i + 1] = i + 1;
    cols[i] = i;
  }
  return SparseMatrix(n, n, std::move(offsets), std::move(cols),
                      std::vector<double>(values.begin(), values.end()));
}

double SparseMatrix::at(std::size_t r, std::size_t c) const {
  auto begin = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r]);
  auto end = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r + 1]);
  auto it = std::lower_bound(begin, end, c);
  if (it == end || *it != c) return 0.0;
  return values_[static_cast<std::size_t>(it - col_indices_.begin())];
}

bool SparseMatrix::contains(std::size_t r, std::size_t c) const {
  auto begin = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r]);
  auto end = col_indices_.begin() + static_cast<std::ptrdiff_t>(row_offsets_[r + 1]);
  return std::binary_search(begin, end, c);
}

SparseMatrix SparseMatrix::transposed() const {
  std::vector<std::size_t> offsets(cols_ + 1, 0);
  for (std::size_t c : col_indices_) ++offsets[c + 1];
  for (std::size_t c = 0; c < cols_; ++c) offsets[c + 1] += offsets[c];
  std::vector<std::size_t> cursor(offsets.begin(), offsets.end() - 1);
  std::vector<std::size_t> rows_out(nnz());
  std::vector<double> vals(nnz());
  for (std::size_t r = 0; r < rows_; ++r) {
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k) {
      const std::size_t dst = cursor[col_indices_[k]]++;
      rows_out[dst] = r;
      vals[dst] = values_[k];
    }
  }
  return SparseMatrix(cols_, rows_, std::move(offsets), std::move(rows_out), std::move(vals));
}

DenseMatrix SparseMatrix::to_dense() const {
  DenseMatrix d(rows_, cols_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t k = row_offsets_[r]; k < row_offsets_[r + 1]; ++k)
      d(r, col_indices_[k]) = values_[k];
  return d;
}

bool SparseMatrix::is_symmetric() const {
  if (rows_ != cols_) return false;
  return *this == transposed();
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  DenseMatrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* orow = out.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      const double* brow = b.row(p).data();
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

DenseMatrix matmul_at_b(const DenseMatrix& a, const DenseMatrix& b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  DenseMatrix out(k, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* brow = b.row(i).data();
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a(i, p);
      if (av == 0.0) continue;
      double* orow = out.row(p).data();
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

DenseMatrix matmul_a_bt(const DenseMatrix& a, const DenseMatrix& b) {
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  DenseMatrix out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const double* arow = a.row(i).data();
    for (std::size_t j = 0; j < m; ++j) {
      const double* brow = b.row(j).data();
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      out(i, j) = acc;
    }
  }
  return out;
}

DenseMatrix spmm(const SparseMatrix& a, const DenseMatrix& b) {
  const std::size_t m = b.cols();
  DenseMatrix out(a.rows(), m);
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double* orow = out.row(r).data();
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
      const double v = vals[k];
      const double* brow = b.row(cols[k]).data();
      for (std::size_t j = 0; j < m; ++j) orow[j] += v * brow[j];
    }
  }
  return out;
}

DenseMatrix spmm_at(const SparseMatrix& a, const DenseMatrix& b) {
  const std::size_t m = b.cols();
  DenseMatrix out(a.cols(), m);
  const auto offsets = a.row_offsets();
  const auto cols = a.col_indices();
  const auto vals = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const double* brow = b.row(r).data();
    for (std::size_t k = offsets[r]; k < offsets[r + 1]; ++k) {
      const double v = vals[k];
      double* orow = out.row(cols[k]).data();
      for (std::size_t j = 0; j < m; ++j) orow[j] += v * brow[j];
    }
  }
  return out;
}

}  // namespace cit
