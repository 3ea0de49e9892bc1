// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include "falqon/matrix.hpp"
#include "falqon/op_counters.hpp"
#include "falqon/quantized_tensor.hpp"

namespace falqon {

enum class LoraMode { full_precision, fp8_explicit };

struct LoraGradients {
    Matrix grad_a;  // r x n
    Matrix grad_b;  // m x r
    Matrix grad_x;  // n x d
};

/// Conventional LoRA layer y = W x + B (A x), used as a reference.
///
/// fp8_explicit quantizes the input, both adapter factors and the adapter
/// intermediate separately (four quantize ops per forward) against an E4M3
/// backbone. full_precision runs everything in binary64.
class ExplicitLoraLayer {
 public:
    /// fp8_explicit quantizes `w` once here; full_precision keeps it.
    ExplicitLoraLayer(const Matrix& w, Matrix b, Matrix a, LoraMode mode);

    /// fp8_explicit layer over an already quantized backbone.
    ExplicitLoraLayer(QuantizedTensor wq, Matrix b, Matrix a);

    /// Caches x for backward.
    Matrix forward(const Matrix& x, OpCounters* counters = nullptr);
    Matrix infer(const Matrix& x, OpCounters* counters = nullptr) const;

    /// dA = B^T dO x^T, dB = (dO x^T) A^T in binary64 from the cached x.
    /// dx goes through the backbone (E5M2 gradient in fp8_explicit) plus
    /// A^T (B^T dO). StateError without a cached forward.
    LoraGradients backward(const Matrix& grad_out, OpCounters* counters = nullptr);

    void clear_context() noexcept { cached_x_.reset(); }

    std::size_t out_features() const noexcept { return b_.rows(); }
    std::size_t in_features() const noexcept { return a_.cols(); }
    std::size_t rank() const noexcept { return a_.rows(); }
    LoraMode mode() const noexcept { return mode_; }

    const Matrix& b() const noexcept { return b_; }
    const Matrix& a() const noexcept { return a_; }
    Matrix& b() noexcept { return b_; }
    Matrix& a() noexcept { return a_; }

    // Dequantized backbone in fp8_explicit, W otherwise.
    Matrix backbone() const;
    const QuantizedTensor& backbone_codes() const noexcept { return wq_; }

 private:
    void check_shapes() const;

    LoraMode mode_;
    Matrix w_;           // full_precision
    QuantizedTensor wq_;  // fp8_explicit
    Matrix b_;
    Matrix a_;
    std::optional<Matrix> cached_x_;
};

}  // namespace falqon
