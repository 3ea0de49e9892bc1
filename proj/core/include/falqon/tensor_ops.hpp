// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <utility>

#include "falqon/matrix.hpp"
#include "falqon/op_counters.hpp"
#include "falqon/quantized_tensor.hpp"

namespace falqon {

/// Binary64 product. Every output element accumulates its k terms in
/// ascending k order, so results are reproducible bit-for-bit.
/// Throws ShapeError when a.cols() != b.rows().
Matrix matmul(const Matrix& a, const Matrix& b, OpCounters* counters = nullptr);

/// Scaled FP8 product: decoded codes are multiplied and accumulated in
/// binary64 (ascending k), then the sum is multiplied by
/// 1 / (w.scale() * x.scale()).
Matrix fp8_matmul(const QuantizedTensor& w, const QuantizedTensor& x, OpCounters* counters = nullptr);

/// quantize_tensor that records one quantize op on `counters`.
QuantizedTensor quantize_counted(const Matrix& x, Fp8Tag format, OpCounters* counters);

/// Vertical stack [top; bottom]. Both parts must share cols, format and
/// scale (bitwise); otherwise DomainError/ShapeError.
QuantizedTensor concat_rows(const QuantizedTensor& top, const QuantizedTensor& bottom);

/// First `m` rows and the remainder. Requires 0 < m < merged.rows().
std::pair<Matrix, Matrix> split_rows(const Matrix& merged, std::size_t m);

// Code-level helpers; the scale is carried over unchanged.
QuantizedTensor transpose(const QuantizedTensor& q);
QuantizedTensor slice_rows(const QuantizedTensor& q, std::size_t first, std::size_t count);

}  // namespace falqon
