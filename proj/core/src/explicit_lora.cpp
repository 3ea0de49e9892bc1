// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/explicit_lora.hpp"

#include <string>

#include "falqon/error.hpp"
#include "falqon/tensor_ops.hpp"

namespace falqon {

ExplicitLoraLayer::ExplicitLoraLayer(const Matrix& w, Matrix b, Matrix a, LoraMode mode)
    : mode_(mode), b_(std::move(b)), a_(std::move(a)) {
    if (mode_ == LoraMode::full_precision) {
        w_ = w;
    } else {
        wq_ = quantize_tensor(w, Fp8Tag::E4M3);
    }
    check_shapes();
}

ExplicitLoraLayer::ExplicitLoraLayer(QuantizedTensor wq, Matrix b, Matrix a)
    : mode_(LoraMode::fp8_explicit), wq_(std::move(wq)), b_(std::move(b)), a_(std::move(a)) {
    check_shapes();
}

void ExplicitLoraLayer::check_shapes() const {
    const std::size_t m = mode_ == LoraMode::full_precision ? w_.rows() : wq_.rows();
    const std::size_t n = mode_ == LoraMode::full_precision ? w_.cols() : wq_.cols();
    if (b_.rows() != m || a_.cols() != n || b_.cols() != a_.rows() || a_.rows() == 0) {
        throw ShapeError("ExplicitLoraLayer: W " + std::to_string(m) + "x" + std::to_string(n) + ", B " +
                         std::to_string(b_.rows()) + "x" + std::to_string(b_.cols()) + ", A " +
                         std::to_string(a_.rows()) + "x" + std::to_string(a_.cols()));
    }
}

Matrix ExplicitLoraLayer::infer(const Matrix& x, OpCounters* counters) const {
    if (x.rows() != in_features()) {
        throw ShapeError("ExplicitLoraLayer: input has " + std::to_string(x.rows()) + " rows, expected " +
                         std::to_string(in_features()));
    }
    if (mode_ == LoraMode::full_precision) {
        Matrix out = matmul(w_, x, counters);
        out += matmul(b_, matmul(a_, x, counters), counters);
        return out;
    }
    const QuantizedTensor xq = quantize_counted(x, Fp8Tag::E4M3, counters);
    const QuantizedTensor aq = quantize_counted(a_, Fp8Tag::E4M3, counters);
    const QuantizedTensor bq = quantize_counted(b_, Fp8Tag::E4M3, counters);
    const Matrix oa = fp8_matmul(aq, xq, counters);
    const QuantizedTensor oaq = quantize_counted(oa, Fp8Tag::E4M3, counters);
    Matrix out = fp8_matmul(wq_, xq, counters);
    out += fp8_matmul(bq, oaq, counters);
    return out;
}

Matrix ExplicitLoraLayer::forward(const Matrix& x, OpCounters* counters) {
    if (cached_x_) {
        throw StateError("ExplicitLoraLayer::forward: previous forward has no matching backward");
    }
    Matrix out = infer(x, counters);
    cached_x_ = x;
    return out;
}

LoraGradients ExplicitLoraLayer::backward(const Matrix& grad_out, OpCounters* counters) {
    if (!cached_x_) {
        throw StateError("ExplicitLoraLayer::backward: no cached activation");
    }
    const Matrix& x = *cached_x_;
    if (grad_out.rows() != out_features() || grad_out.cols() != x.cols()) {
        throw ShapeError("ExplicitLoraLayer::backward: gradient shape does not match the cached forward");
    }
    LoraGradients g;
    const Matrix go_xt = matmul(grad_out, x.transposed(), counters);
    g.grad_b = matmul(go_xt, a_.transposed(), counters);
    g.grad_a = matmul(b_.transposed(), go_xt, counters);

    const Matrix adapter_dx = matmul(a_.transposed(), matmul(b_.transposed(), grad_out, counters), counters);
    if (mode_ == LoraMode::full_precision) {
        g.grad_x = matmul(w_.transposed(), grad_out, counters);
    } else {
        const QuantizedTensor gq = quantize_counted(grad_out, Fp8Tag::E5M2, counters);
        g.grad_x = fp8_matmul(transpose(wq_), gq, counters);
    }
    g.grad_x += adapter_dx;
    cached_x_.reset();
    return g;
}

Matrix ExplicitLoraLayer::backbone() const {
    return mode_ == LoraMode::full_precision ? w_ : dequantize_tensor(wq_);
}

}  // namespace falqon
