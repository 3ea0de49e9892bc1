// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "falqon/error.hpp"

namespace falqon {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw ShapeError(std::string(what) + ": " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
    }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ShapeError("Matrix: data length " + std::to_string(data_.size()) + " does not match " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) {
            throw ShapeError("Matrix::from_rows: ragged rows");
        }
        data.insert(data.end(), row.begin(), row.end());
    }
    return Matrix(r, c, std::move(data));
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t j = 0; j < cols_; ++j) {
            t(j, i) = (*this)(i, j);
        }
    }
    return t;
}

Matrix& Matrix::operator+=(const Matrix& other) {
    require_same_shape(*this, other, "Matrix::operator+=");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] += other.data_[i];
    }
    return *this;
}

Matrix& Matrix::operator-=(const Matrix& other) {
    require_same_shape(*this, other, "Matrix::operator-=");
    for (std::size_t i = 0; i < data_.size(); ++i) {
        data_[i] -= other.data_[i];
    }
    return *this;
}

Matrix& Matrix::operator*=(double factor) noexcept {
    for (double& v : data_) {
        v *= factor;
    }
    return *this;
}

Matrix operator+(Matrix lhs, const Matrix& rhs) { return lhs += rhs; }
Matrix operator-(Matrix lhs, const Matrix& rhs) { return lhs -= rhs; }
Matrix operator*(Matrix lhs, double factor) { return lhs *= factor; }
Matrix operator*(double factor, Matrix rhs) { return rhs *= factor; }

double frobenius_norm(const Matrix& m) {
    double sum = 0.0;
    for (double v : m.values()) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

double max_abs(const Matrix& m) {
    double best = 0.0;
    for (double v : m.values()) {
        best = std::max(best, std::abs(v));
    }
    return best;
}

bool all_finite(const Matrix& m) {
    return std::all_of(m.values().begin(), m.values().end(), [](double v) { return std::isfinite(v); });
}

Matrix slice_rows(const Matrix& m, std::size_t first, std::size_t count) {
    if (first + count > m.rows()) {
        throw ShapeError("slice_rows: rows [" + std::to_string(first) + ", " + std::to_string(first + count) +
                         ") out of " + std::to_string(m.rows()));
    }
    auto begin = m.values().begin() + static_cast<std::ptrdiff_t>(first * m.cols());
    return Matrix(count, m.cols(), std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(count * m.cols())));
}

}  // namespace falqon
