// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <variant>
#include <vector>

#include "falqon/explicit_lora.hpp"
#include "falqon/matrix.hpp"
#include "falqon/melded_linear.hpp"
#include "falqon/op_counters.hpp"

namespace falqon {

enum class Activation { identity, relu, gelu };
enum class LossKind { mse, cross_entropy };

// melded / melded_full: MeldedLinear in FP8 or with quantization disabled.
// explicit_fp8 / explicit_full: ExplicitLoraLayer references.
enum class ModelVariant { melded, melded_full, explicit_fp8, explicit_full };

// melded_equivalent: A = the melded adapter factor (frozen), B = 0.
// standard: A ~ U(-1/sqrt(n), 1/sqrt(n)) trainable, B = 0.
enum class LoraInit { melded_equivalent, standard };

std::string_view to_string(Activation a) noexcept;
std::string_view to_string(LossKind l) noexcept;
std::string_view to_string(ModelVariant v) noexcept;
std::string_view to_string(LoraInit i) noexcept;
std::string_view to_string(BufferMode b) noexcept;
Activation parse_activation(std::string_view s);
LossKind parse_loss(std::string_view s);
ModelVariant parse_variant(std::string_view s);
LoraInit parse_lora_init(std::string_view s);
BufferMode parse_buffer_mode(std::string_view s);

bool is_melded(ModelVariant v) noexcept;

struct LossValue {
    double loss = 0.0;
    Matrix grad;  // dL/dO
};

// mean((o - y)^2) over all elements.
LossValue mse_loss(const Matrix& o, const Matrix& y);
// Softmax over each column's logits, mean negative log-likelihood.
LossValue cross_entropy_loss(const Matrix& logits, const std::vector<std::size_t>& labels);
double accuracy(const Matrix& logits, const std::vector<std::size_t>& labels);

double activate(Activation a, double x) noexcept;
double activate_derivative(Activation a, double x) noexcept;

struct ModelSpec {
    ModelVariant variant = ModelVariant::melded;
    std::size_t rank = 64;
    std::size_t top_k = 10;
    BufferMode buffer_mode = BufferMode::accumulate;
    LoraInit lora_init = LoraInit::melded_equivalent;
    Activation activation = Activation::identity;
    LossKind loss = LossKind::mse;
};

using ModelLayer = std::variant<MeldedLinear, ExplicitLoraLayer>;

struct LayerGradients {
    Matrix grad_b;
    Matrix grad_a;  // empty unless A trains
};

/// Stack of adapter layers with an elementwise activation between them.
class ToyModel {
 public:
    /// One layer per weight; consecutive shapes must chain. Layer ranks are
    /// min(spec.rank, m, n) and top-k min(spec.top_k, m).
    static ToyModel build(const ModelSpec& spec, const std::vector<Matrix>& weights, std::uint64_t seed);

    /// Training forward; saves per-layer context.
    Matrix forward(const Matrix& x, OpCounters* counters = nullptr);
    Matrix infer(const Matrix& x) const;

    /// Backpropagates dL/dO through all layers, last to first.
    std::vector<LayerGradients> backward(const Matrix& grad_out, OpCounters* counters = nullptr);

    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t layer_count() const noexcept { return layers_.size(); }
    const std::vector<ModelLayer>& layers() const noexcept { return layers_; }
    std::vector<ModelLayer>& layers() noexcept { return layers_; }
    bool trains_a() const noexcept;

 private:
    ModelSpec spec_;
    std::vector<ModelLayer> layers_;
    std::vector<Matrix> pre_activations_;  // outputs of layers 0..L-2 from forward
};

/// Initial weights for the layer stack in_features -> hidden... -> out.
/// A single layer uses `pretrained`; deeper stacks draw N(0, 1/fan_in)
/// weights from `seed`.
std::vector<Matrix> initial_weights(const Matrix& pretrained, const std::vector<std::size_t>& hidden,
                                    std::uint64_t seed);

}  // namespace falqon
