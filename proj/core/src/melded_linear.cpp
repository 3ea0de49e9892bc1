// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/melded_linear.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "falqon/error.hpp"
#include "falqon/svd.hpp"
#include "falqon/tensor_ops.hpp"

namespace falqon {

namespace {

void check_rank_and_k(std::size_t m, std::size_t n, std::size_t r, std::size_t k) {
    if (r < 1 || r > std::min(m, n)) {
        throw DomainError("melded layer: rank " + std::to_string(r) + " outside [1, " +
                          std::to_string(std::min(m, n)) + "]");
    }
    if (k < 1 || k > m) {
        throw DomainError("melded layer: top_k " + std::to_string(k) + " outside [1, " + std::to_string(m) + "]");
    }
}

}  // namespace

std::vector<std::size_t> select_top_rows(const Matrix& buffer, std::size_t k) {
    if (k < 1 || k > buffer.rows()) {
        throw DomainError("select_top_rows: k=" + std::to_string(k) + " with " + std::to_string(buffer.rows()) +
                          " rows");
    }
    std::vector<double> score(buffer.rows(), 0.0);
    for (std::size_t i = 0; i < buffer.rows(); ++i) {
        for (double v : buffer.row(i)) score[i] += std::fabs(v);
    }
    std::vector<std::size_t> idx(buffer.rows());
    std::iota(idx.begin(), idx.end(), 0);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(),
                      [&](std::size_t a, std::size_t b) { return score[a] > score[b] || (score[a] == score[b] && a < b); });
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    return idx;
}

Matrix adapter_from_quantization_error(const Matrix& w, std::size_t r) {
    const Matrix delta_w = w - dequantize_tensor(quantize_tensor(w, Fp8Tag::E4M3));
    return factor_to_lora(truncated_svd(delta_w, r)).a;
}

MeldedLinear MeldedLinear::init(const Matrix& w, const MeldedOptions& options) {
    check_rank_and_k(w.rows(), w.cols(), options.rank, options.top_k);
    MeldedLinear layer;
    layer.m_ = w.rows();
    layer.n_ = w.cols();
    layer.r_ = options.rank;
    layer.k_ = options.top_k;
    layer.layer_id_ = options.layer_id;
    layer.precision_ = options.precision;
    layer.buffer_mode_ = options.buffer_mode;

    const QuantizedTensor wq = quantize_tensor(w, Fp8Tag::E4M3);
    const Matrix delta_w = w - dequantize_tensor(wq);
    const LoraFactors factors = factor_to_lora(truncated_svd(delta_w, options.rank));
    layer.s_w_ = wq.scale();
    layer.a_full_ = factors.a;
    layer.delta_buffer_ = Matrix(layer.m_, layer.r_);

    if (options.precision == Precision::fp8) {
        const QuantizedTensor aq = quantize_with_scale(factors.a, wq.scale(), Fp8Tag::E4M3, &layer.init_saturated_);
        layer.merged_ = concat_rows(wq, aq);
    } else {
        layer.w_full_ = w;
    }
    return layer;
}

MeldedLinear MeldedLinear::restore(QuantizedTensor merged, Matrix a_full, Matrix delta_buffer,
                                   const MeldedOptions& options) {
    if (options.precision != Precision::fp8) {
        throw DomainError("MeldedLinear::restore: only FP8 layers are persisted");
    }
    const std::size_t r = a_full.rows();
    if (merged.rows() <= r || a_full.cols() != merged.cols() || delta_buffer.rows() != merged.rows() - r ||
        delta_buffer.cols() != r || merged.format() != Fp8Tag::E4M3) {
        throw ShapeError("MeldedLinear::restore: inconsistent layer state");
    }
    MeldedLinear layer;
    layer.m_ = merged.rows() - r;
    layer.n_ = merged.cols();
    layer.r_ = r;
    layer.k_ = options.top_k;
    check_rank_and_k(layer.m_, layer.n_, layer.r_, layer.k_);
    layer.layer_id_ = options.layer_id;
    layer.buffer_mode_ = options.buffer_mode;
    layer.s_w_ = merged.scale();
    layer.merged_ = std::move(merged);
    layer.a_full_ = std::move(a_full);
    layer.delta_buffer_ = std::move(delta_buffer);
    return layer;
}

Matrix MeldedLinear::infer(const Matrix& x, OpCounters* counters) const {
    if (x.rows() != n_) {
        throw ShapeError("MeldedLinear: input has " + std::to_string(x.rows()) + " rows, expected " +
                         std::to_string(n_));
    }
    if (precision_ == Precision::full) {
        return matmul(w_full_, x, counters);
    }
    const QuantizedTensor xq = quantize_counted(x, Fp8Tag::E4M3, counters);
    return slice_rows(fp8_matmul(merged_, xq, counters), 0, m_);
}

Matrix MeldedLinear::forward(const Matrix& x, OpCounters* counters) {
    if (context_) {
        throw StateError("MeldedLinear::forward: previous forward has no matching backward");
    }
    if (x.rows() != n_) {
        throw ShapeError("MeldedLinear: input has " + std::to_string(x.rows()) + " rows, expected " +
                         std::to_string(n_));
    }
    if (precision_ == Precision::full) {
        Matrix out = matmul(w_full_, x, counters);
        context_ = GradientContext{matmul(a_full_, x, counters), 1.0, layer_id_};
        return out;
    }
    const QuantizedTensor xq = quantize_counted(x, Fp8Tag::E4M3, counters);
    auto [out, oa] = split_rows(fp8_matmul(merged_, xq, counters), m_);
    context_ = GradientContext{std::move(oa), xq.scale(), layer_id_};
    return std::move(out);
}

MeldedGradients MeldedLinear::backward(const Matrix& grad_out, OpCounters* counters) {
    if (!context_) {
        throw StateError("MeldedLinear::backward: no saved forward context");
    }
    if (grad_out.rows() != m_ || grad_out.cols() != context_->saved_oa.cols()) {
        throw ShapeError("MeldedLinear::backward: gradient shape does not match the saved forward");
    }
    MeldedGradients g;
    g.grad_b = matmul(grad_out, context_->saved_oa.transposed(), counters);
    if (precision_ == Precision::full) {
        g.grad_x = matmul(w_full_.transposed(), grad_out, counters);
    } else {
        const QuantizedTensor gq = quantize_counted(grad_out, Fp8Tag::E5M2, counters);
        g.grad_x = fp8_matmul(transpose(slice_rows(merged_, 0, m_)), gq, counters);
    }
    context_.reset();
    return g;
}

UpdateResult MeldedLinear::apply_update(const Matrix& delta_b, OpCounters* counters) {
    if (delta_b.rows() != m_ || delta_b.cols() != r_) {
        throw ShapeError("MeldedLinear::apply_update: expected " + std::to_string(m_) + "x" + std::to_string(r_));
    }
    if (buffer_mode_ == BufferMode::accumulate) {
        delta_buffer_ += delta_b;
    } else {
        delta_buffer_ = delta_b;
    }

    UpdateResult result;
    result.rows = select_top_rows(delta_buffer_, k_);
    const Fp8Format& fmt = format_of(Fp8Tag::E4M3);
    std::vector<double> row_delta(n_);
    for (std::size_t i : result.rows) {
        std::fill(row_delta.begin(), row_delta.end(), 0.0);
        for (std::size_t c = 0; c < r_; ++c) {
            const double b = delta_buffer_(i, c);
            const auto a_row = a_full_.row(c);
            for (std::size_t j = 0; j < n_; ++j) row_delta[j] += b * a_row[j];
        }
        if (precision_ == Precision::full) {
            auto w_row = w_full_.row(i);
            for (std::size_t j = 0; j < n_; ++j) w_row[j] += row_delta[j];
        } else {
            auto codes = merged_.row_codes(i);
            for (std::size_t j = 0; j < n_; ++j) {
                if (row_delta[j] == 0.0) continue;
                const double target = decode_fp8_bits(codes[j], Fp8Tag::E4M3) + s_w_ * row_delta[j];
                result.saturated += saturates(target, fmt) ? 1 : 0;
                codes[j] = encode_fp8_bits(target, fmt);
            }
        }
        std::fill(delta_buffer_.row(i).begin(), delta_buffer_.row(i).end(), 0.0);
    }
    if (counters != nullptr) {
        const std::uint64_t k = result.rows.size();
        counters->record_matmul(k, r_, n_, 8 * (k * r_ + r_ * n_ + k * n_));
        if (precision_ == Precision::fp8) counters->record_requantize(k * n_);
    }
    return result;
}

Matrix MeldedLinear::effective_weight() const {
    if (precision_ == Precision::full) return w_full_;
    return slice_rows(dequantize_tensor(merged_), 0, m_);
}

}  // namespace falqon
