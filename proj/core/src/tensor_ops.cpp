// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/tensor_ops.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "falqon/error.hpp"

namespace falqon {

namespace {

std::string shape(std::size_t r, std::size_t c) { return std::to_string(r) + "x" + std::to_string(c); }

// out(i, j) = sum_k a[i*n + k] * b[k*d + j], k ascending.
void accumulate_product(const double* a, const double* b, double* out, std::size_t m, std::size_t n,
                        std::size_t d) {
    for (std::size_t i = 0; i < m; ++i) {
        double* out_row = out + i * d;
        const double* a_row = a + i * n;
        for (std::size_t k = 0; k < n; ++k) {
            const double aik = a_row[k];
            const double* b_row = b + k * d;
            for (std::size_t j = 0; j < d; ++j) {
                out_row[j] += aik * b_row[j];
            }
        }
    }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b, OpCounters* counters) {
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: " + shape(a.rows(), a.cols()) + " * " + shape(b.rows(), b.cols()));
    }
    Matrix out(a.rows(), b.cols());
    accumulate_product(a.values().data(), b.values().data(), out.values().data(), a.rows(), a.cols(), b.cols());
    if (counters != nullptr) {
        counters->record_matmul(a.rows(), a.cols(), b.cols(), 8 * (a.size() + b.size() + out.size()));
    }
    return out;
}

Matrix fp8_matmul(const QuantizedTensor& w, const QuantizedTensor& x, OpCounters* counters) {
    if (w.cols() != x.rows()) {
        throw ShapeError("fp8_matmul: " + shape(w.rows(), w.cols()) + " * " + shape(x.rows(), x.cols()));
    }
    const double denom = w.scale() * x.scale();
    if (!(denom > 0.0) || !std::isfinite(denom)) {
        throw DomainError("fp8_matmul: scale product is not positive and finite");
    }
    const Matrix wv = decode_values(w);
    const Matrix xv = decode_values(x);
    Matrix out(w.rows(), x.cols());
    accumulate_product(wv.values().data(), xv.values().data(), out.values().data(), w.rows(), w.cols(), x.cols());
    out *= 1.0 / denom;
    if (counters != nullptr) {
        counters->record_matmul(w.rows(), w.cols(), x.cols(), w.codes().size() + x.codes().size() + 8 * out.size());
    }
    return out;
}

QuantizedTensor quantize_counted(const Matrix& x, Fp8Tag format, OpCounters* counters) {
    QuantizedTensor q = quantize_tensor(x, format);
    if (counters != nullptr) {
        counters->record_quantize(x.size());
    }
    return q;
}

QuantizedTensor concat_rows(const QuantizedTensor& top, const QuantizedTensor& bottom) {
    if (top.cols() != bottom.cols()) {
        throw ShapeError("concat_rows: cols " + std::to_string(top.cols()) + " vs " + std::to_string(bottom.cols()));
    }
    if (top.format() != bottom.format()) {
        throw DomainError("concat_rows: format mismatch");
    }
    if (top.scale() != bottom.scale()) {
        throw DomainError("concat_rows: parts must share one scale");
    }
    std::vector<std::uint8_t> codes(top.codes().begin(), top.codes().end());
    codes.insert(codes.end(), bottom.codes().begin(), bottom.codes().end());
    return QuantizedTensor(top.rows() + bottom.rows(), top.cols(), std::move(codes), top.scale(), top.format());
}

std::pair<Matrix, Matrix> split_rows(const Matrix& merged, std::size_t m) {
    if (m == 0 || m >= merged.rows()) {
        throw DomainError("split_rows: m=" + std::to_string(m) + " must lie in (0, " +
                          std::to_string(merged.rows()) + ")");
    }
    return {slice_rows(merged, 0, m), slice_rows(merged, m, merged.rows() - m)};
}

QuantizedTensor transpose(const QuantizedTensor& q) {
    std::vector<std::uint8_t> codes(q.codes().size());
    const auto src = q.codes();
    for (std::size_t i = 0; i < q.rows(); ++i) {
        for (std::size_t j = 0; j < q.cols(); ++j) {
            codes[j * q.rows() + i] = src[i * q.cols() + j];
        }
    }
    return QuantizedTensor(q.cols(), q.rows(), std::move(codes), q.scale(), q.format());
}

QuantizedTensor slice_rows(const QuantizedTensor& q, std::size_t first, std::size_t count) {
    if (first + count > q.rows()) {
        throw ShapeError("slice_rows: rows out of range");
    }
    const auto src = q.codes();
    auto begin = src.begin() + static_cast<std::ptrdiff_t>(first * q.cols());
    std::vector<std::uint8_t> codes(begin, begin + static_cast<std::ptrdiff_t>(count * q.cols()));
    return QuantizedTensor(count, q.cols(), std::move(codes), q.scale(), q.format());
}

}  // namespace falqon
