// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "falqon/matrix.hpp"
#include "falqon/op_counters.hpp"
#include "falqon/quantized_tensor.hpp"

namespace falqon {

enum class BufferMode { accumulate, overwrite };

// fp8: the FP8 merged backbone. full: quantization disabled; the backbone is
// kept in binary64 and updated directly, the adapter is still derived from
// the FP8 quantization error of the initial weight.
enum class Precision { fp8, full };

struct MeldedOptions {
    std::size_t rank = 1;
    std::size_t top_k = 1;
    BufferMode buffer_mode = BufferMode::accumulate;
    Precision precision = Precision::fp8;
    std::size_t layer_id = 0;
};

struct GradientContext {
    Matrix saved_oa;  // r x d, the adapter projection A x from forward
    double input_scale = 1.0;
    std::size_t layer_id = 0;
};

struct MeldedGradients {
    Matrix grad_b;  // m x r
    Matrix grad_x;  // n x d
};

struct UpdateResult {
    std::vector<std::size_t> rows;  // ascending
    std::size_t saturated = 0;      // re-encoded elements clipped to max finite
};

/// Row indices of the k largest L1 row norms, ties to the lower index,
/// returned ascending. Requires 1 <= k <= rows.
std::vector<std::size_t> select_top_rows(const Matrix& buffer, std::size_t k);

/// Balanced rank-r A factor of the E4M3 quantization error W - DQ(Q(W)).
Matrix adapter_from_quantization_error(const Matrix& w, std::size_t r);

/// Linear layer whose low-rank adapter lives inside the FP8 backbone.
///
/// The merged tensor stacks the quantized weight W~ (m x n) on top of the
/// adapter projection A~ (r x n), both at the backbone scale s_W, so one FP8
/// product yields both the layer output and A x. Only the implicit B factor
/// trains: its optimizer steps accumulate in an m x r buffer and the top-k
/// rows are folded into the backbone codes on each update.
class MeldedLinear {
 public:
    /// Quantize W (E4M3), factor its quantization error at rank r and meld
    /// the A factor. Requires 1 <= r <= min(m, n), 1 <= k <= m.
    static MeldedLinear init(const Matrix& w, const MeldedOptions& options);

    /// Rebuild an FP8 layer from persisted state (checkpoint load).
    static MeldedLinear restore(QuantizedTensor merged, Matrix a_full, Matrix delta_buffer,
                                const MeldedOptions& options);

    /// Training forward: one input quantization, one merged product, and the
    /// A x rows saved for backward. StateError if a context is pending.
    Matrix forward(const Matrix& x, OpCounters* counters = nullptr);

    /// Forward without saving context (evaluation).
    Matrix infer(const Matrix& x, OpCounters* counters = nullptr) const;

    /// dB = dO (A x)^T from the saved context; dx through the backbone with
    /// the output gradient quantized to E5M2. Clears the context.
    MeldedGradients backward(const Matrix& grad_out, OpCounters* counters = nullptr);

    /// Fold an optimizer step for B into the buffer and apply the top-k rows.
    UpdateResult apply_update(const Matrix& delta_b, OpCounters* counters = nullptr);

    void clear_context() noexcept { context_.reset(); }
    bool has_context() const noexcept { return context_.has_value(); }
    const std::optional<GradientContext>& context() const noexcept { return context_; }

    std::size_t out_features() const noexcept { return m_; }
    std::size_t in_features() const noexcept { return n_; }
    std::size_t rank() const noexcept { return r_; }
    std::size_t top_k() const noexcept { return k_; }
    Precision precision() const noexcept { return precision_; }
    BufferMode buffer_mode() const noexcept { return buffer_mode_; }
    double backbone_scale() const noexcept { return s_w_; }

    const QuantizedTensor& merged() const noexcept { return merged_; }  // empty in full precision
    const Matrix& a_full() const noexcept { return a_full_; }
    const Matrix& delta_buffer() const noexcept { return delta_buffer_; }
    const Matrix& backbone_full() const noexcept { return w_full_; }  // full precision only

    /// Backbone weight as seen by forward (dequantized top block, or W).
    Matrix effective_weight() const;

    // Elements clipped when A * s_W was encoded at init.
    std::size_t init_saturations() const noexcept { return init_saturated_; }

 private:
    MeldedLinear() = default;

    std::size_t m_ = 0;
    std::size_t n_ = 0;
    std::size_t r_ = 0;
    std::size_t k_ = 0;
    std::size_t layer_id_ = 0;
    Precision precision_ = Precision::fp8;
    BufferMode buffer_mode_ = BufferMode::accumulate;
    double s_w_ = 1.0;
    QuantizedTensor merged_;
    Matrix w_full_;
    Matrix a_full_;
    Matrix delta_buffer_;
    std::optional<GradientContext> context_;
    std::size_t init_saturated_ = 0;
};

}  // namespace falqon
