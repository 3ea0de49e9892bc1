// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/quantized_tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "falqon/error.hpp"

namespace falqon {

QuantizedTensor::QuantizedTensor(std::size_t rows, std::size_t cols, std::vector<std::uint8_t> codes, double scale,
                                 Fp8Tag format)
    : rows_(rows), cols_(cols), codes_(std::move(codes)), scale_(scale), format_(format) {
    if (codes_.size() != rows_ * cols_) {
        throw ShapeError("QuantizedTensor: " + std::to_string(codes_.size()) + " codes for " +
                         std::to_string(rows_) + "x" + std::to_string(cols_));
    }
    if (!(scale_ > 0.0) || !std::isfinite(scale_)) {
        throw DomainError("QuantizedTensor: scale must be positive and finite, got " + std::to_string(scale_));
    }
}

namespace {

double checked_amax(const Matrix& x) {
    if (x.empty()) {
        throw DomainError("quantize: empty matrix");
    }
    double amax = 0.0;
    for (double v : x.values()) {
        if (!std::isfinite(v)) {
            throw NumericalError("quantize: non-finite entry");
        }
        amax = std::max(amax, std::abs(v));
    }
    return amax;
}

}  // namespace

double compute_scale(const Matrix& x, Fp8Tag format) {
    const double amax = checked_amax(x);
    return amax == 0.0 ? 1.0 : amax / format_of(format).max_finite;
}

QuantizedTensor quantize_tensor(const Matrix& x, Fp8Tag format) {
    const double amax = checked_amax(x);
    const double multiplier = amax == 0.0 ? 1.0 : format_of(format).max_finite / amax;
    if (!std::isfinite(multiplier)) {
        // amax below ~max_finite / DBL_MAX; treat as degenerate.
        throw NumericalError("quantize: tensor range too small to scale");
    }
    return quantize_with_scale(x, multiplier, format);
}

QuantizedTensor quantize_with_scale(const Matrix& x, double scale, Fp8Tag format, std::size_t* saturated) {
    const Fp8Format& f = format_of(format);
    std::vector<std::uint8_t> codes(x.size());
    std::size_t clipped = 0;
    const auto values = x.values();
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double scaled = values[i] * scale;
        clipped += saturates(scaled, f) ? 1 : 0;
        codes[i] = encode_fp8_bits(scaled, f);
    }
    if (saturated != nullptr) {
        *saturated = clipped;
    }
    return QuantizedTensor(x.rows(), x.cols(), std::move(codes), scale, format);
}

Matrix dequantize_tensor(const QuantizedTensor& xq) {
    Matrix out = decode_values(xq);
    for (double& v : out.values()) {
        v /= xq.scale();
    }
    return out;
}

Matrix decode_values(const QuantizedTensor& xq) {
    const auto& table = decode_table(xq.format());
    Matrix out(xq.rows(), xq.cols());
    auto dst = out.values();
    const auto src = xq.codes();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = table[src[i]];
    }
    return out;
}

}  // namespace falqon
