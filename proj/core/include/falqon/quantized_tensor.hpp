// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "falqon/fp8.hpp"
#include "falqon/matrix.hpp"

namespace falqon {

/// FP8 code matrix with one per-tensor scale.
///
/// `scale` is the multiplier applied before rounding: codes ~ X * scale, and
/// dequantization divides by it. It is always positive and finite.
class QuantizedTensor {
 public:
    QuantizedTensor() = default;
    QuantizedTensor(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> codes, double scale,
                    Fp8Tag format);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double scale() const noexcept { return scale_; }
    Fp8Tag format() const noexcept { return format_; }

    Fp8Code code(std::size_t i, std::size_t j) const noexcept { return {codes_[i * cols_ + j], format_}; }
    // Decoded code value, before dividing by the scale.
    double value(std::size_t i, std::size_t j) const noexcept {
        return decode_fp8_bits(codes_[i * cols_ + j], format_);
    }

    std::span<const std::uint8_t> codes() const noexcept { return codes_; }
    std::span<std::uint8_t> codes() noexcept { return codes_; }
    std::span<const std::uint8_t> row_codes(std::size_t i) const noexcept { return {codes_.data() + i * cols_, cols_}; }
    std::span<std::uint8_t> row_codes(std::size_t i) noexcept { return {codes_.data() + i * cols_, cols_}; }

    friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;

 private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<std::uint8_t> codes_;
    double scale_ = 1.0;
    Fp8Tag format_ = Fp8Tag::E4M3;
};

/// Range ratio max|X| / max_finite(format); 1.0 for an all-zero tensor.
/// quantize_tensor stores the reciprocal multiplier max_finite / max|X|.
/// Throws NumericalError on NaN/inf and DomainError on an empty matrix.
double compute_scale(const Matrix& x, Fp8Tag format);

/// Per-tensor quantization: multiplier = max_finite / max|X| (1.0 when X is
/// all zero), codes = RNE(X * multiplier).
QuantizedTensor quantize_tensor(const Matrix& x, Fp8Tag format);

/// Quantize at a caller-supplied multiplier (the shared-scale case).
/// Out-of-range products saturate; `saturated`, when given, receives the
/// number of clipped elements.
QuantizedTensor quantize_with_scale(const Matrix& x, double scale, Fp8Tag format,
                                    std::size_t* saturated = nullptr);

/// Element-wise decode divided by the scale.
Matrix dequantize_tensor(const QuantizedTensor& xq);

// Decoded values without the scale division.
Matrix decode_values(const QuantizedTensor& xq);

}  // namespace falqon
