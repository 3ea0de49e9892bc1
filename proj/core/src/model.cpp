// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "falqon/error.hpp"
#include "falqon/tensor_ops.hpp"

namespace falqon {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view s, const std::array<std::pair<std::string_view, Enum>, N>& table,
                const char* what) {
    for (const auto& [name, value] : table) {
        if (name == s) return value;
    }
    std::string allowed;
    for (const auto& [name, value] : table) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
    throw DomainError(std::string("unknown ") + what + " '" + std::string(s) + "' (expected " + allowed + ")");
}

constexpr std::array<std::pair<std::string_view, Activation>, 3> kActivations{
    {{"identity", Activation::identity}, {"relu", Activation::relu}, {"gelu", Activation::gelu}}};
constexpr std::array<std::pair<std::string_view, LossKind>, 2> kLosses{
    {{"mse", LossKind::mse}, {"cross_entropy", LossKind::cross_entropy}}};
constexpr std::array<std::pair<std::string_view, ModelVariant>, 4> kVariants{
    {{"melded", ModelVariant::melded},
     {"melded_full", ModelVariant::melded_full},
     {"explicit_fp8", ModelVariant::explicit_fp8},
     {"explicit_full", ModelVariant::explicit_full}}};
constexpr std::array<std::pair<std::string_view, LoraInit>, 2> kLoraInits{
    {{"melded_equivalent", LoraInit::melded_equivalent}, {"standard", LoraInit::standard}}};
constexpr std::array<std::pair<std::string_view, BufferMode>, 2> kBufferModes{
    {{"accumulate", BufferMode::accumulate}, {"overwrite", BufferMode::overwrite}}};

template <typename Enum, std::size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<std::string_view, Enum>, N>& table) noexcept {
    for (const auto& [name, value] : table) {
        if (value == v) return name;
    }
    return "?";
}

}  // namespace

std::string_view to_string(Activation a) noexcept { return name_of(a, kActivations); }
std::string_view to_string(LossKind l) noexcept { return name_of(l, kLosses); }
std::string_view to_string(ModelVariant v) noexcept { return name_of(v, kVariants); }
std::string_view to_string(LoraInit i) noexcept { return name_of(i, kLoraInits); }
std::string_view to_string(BufferMode b) noexcept { return name_of(b, kBufferModes); }
Activation parse_activation(std::string_view s) { return parse_enum(s, kActivations, "activation"); }
LossKind parse_loss(std::string_view s) { return parse_enum(s, kLosses, "loss"); }
ModelVariant parse_variant(std::string_view s) { return parse_enum(s, kVariants, "variant"); }
LoraInit parse_lora_init(std::string_view s) { return parse_enum(s, kLoraInits, "lora_init"); }
BufferMode parse_buffer_mode(std::string_view s) { return parse_enum(s, kBufferModes, "buffer_mode"); }

bool is_melded(ModelVariant v) noexcept { return v == ModelVariant::melded || v == ModelVariant::melded_full; }

LossValue mse_loss(const Matrix& o, const Matrix& y) {
    if (o.rows() != y.rows() || o.cols() != y.cols()) throw ShapeError("mse_loss: output/target shape mismatch");
    LossValue out{0.0, Matrix(o.rows(), o.cols())};
    const double count = static_cast<double>(o.size());
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double d = o.values()[i] - y.values()[i];
        out.loss += d * d;
        out.grad.values()[i] = 2.0 * d / count;
    }
    out.loss /= count;
    return out;
}

LossValue cross_entropy_loss(const Matrix& logits, const std::vector<std::size_t>& labels) {
    if (labels.size() != logits.cols()) throw ShapeError("cross_entropy_loss: one label per column required");
    LossValue out{0.0, Matrix(logits.rows(), logits.cols())};
    const double batch = static_cast<double>(logits.cols());
    for (std::size_t j = 0; j < logits.cols(); ++j) {
        if (labels[j] >= logits.rows()) throw DomainError("cross_entropy_loss: label out of range");
        double peak = logits(0, j);
        for (std::size_t i = 1; i < logits.rows(); ++i) peak = std::max(peak, logits(i, j));
        double z = 0.0;
        for (std::size_t i = 0; i < logits.rows(); ++i) z += std::exp(logits(i, j) - peak);
        const double log_z = peak + std::log(z);
        out.loss += log_z - logits(labels[j], j);
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            const double p = std::exp(logits(i, j) - log_z);
            out.grad(i, j) = (p - (i == labels[j] ? 1.0 : 0.0)) / batch;
        }
    }
    out.loss /= batch;
    return out;
}

double accuracy(const Matrix& logits, const std::vector<std::size_t>& labels) {
    if (labels.size() != logits.cols() || labels.empty()) throw ShapeError("accuracy: one label per column required");
    std::size_t hits = 0;
    for (std::size_t j = 0; j < logits.cols(); ++j) {
        std::size_t best = 0;
        for (std::size_t i = 1; i < logits.rows(); ++i) {
            if (logits(i, j) > logits(best, j)) best = i;
        }
        hits += best == labels[j] ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double activate(Activation a, double x) noexcept {
    switch (a) {
        case Activation::relu:
            return x > 0.0 ? x : 0.0;
        case Activation::gelu:
            return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
        case Activation::identity:
            break;
    }
    return x;
}

double activate_derivative(Activation a, double x) noexcept {
    switch (a) {
        case Activation::relu:
            return x > 0.0 ? 1.0 : 0.0;
        case Activation::gelu: {
            const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
            const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
            return cdf + x * pdf;
        }
        case Activation::identity:
            break;
    }
    return 1.0;
}

ToyModel ToyModel::build(const ModelSpec& spec, const std::vector<Matrix>& weights, std::uint64_t seed) {
    if (weights.empty()) throw DomainError("ToyModel: at least one layer required");
    for (std::size_t l = 1; l < weights.size(); ++l) {
        if (weights[l].cols() != weights[l - 1].rows()) {
            throw ShapeError("ToyModel: layer " + std::to_string(l) + " input does not match previous output");
        }
    }
    ToyModel model;
    model.spec_ = spec;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l < weights.size(); ++l) {
        const Matrix& w = weights[l];
        const std::size_t r = std::min({spec.rank, w.rows(), w.cols()});
        const std::size_t k = std::min(spec.top_k, w.rows());
        if (is_melded(spec.variant)) {
            MeldedOptions o;
            o.rank = r;
            o.top_k = k;
            o.buffer_mode = spec.buffer_mode;
            o.precision = spec.variant == ModelVariant::melded ? Precision::fp8 : Precision::full;
            o.layer_id = l;
            model.layers_.emplace_back(MeldedLinear::init(w, o));
            continue;
        }
        Matrix a;
        if (spec.lora_init == LoraInit::melded_equivalent) {
            a = adapter_from_quantization_error(w, r);
        } else {
            const double bound = 1.0 / std::sqrt(static_cast<double>(w.cols()));
            std::uniform_real_distribution<double> dist(-bound, bound);
            a = Matrix(r, w.cols());
            for (double& v : a.values()) v = dist(rng);
        }
        const LoraMode mode = spec.variant == ModelVariant::explicit_fp8 ? LoraMode::fp8_explicit
                                                                          : LoraMode::full_precision;
        model.layers_.emplace_back(ExplicitLoraLayer(w, Matrix(w.rows(), r), std::move(a), mode));
    }
    return model;
}

bool ToyModel::trains_a() const noexcept {
    return !is_melded(spec_.variant) && spec_.lora_init == LoraInit::standard;
}

Matrix ToyModel::forward(const Matrix& x, OpCounters* counters) {
    pre_activations_.clear();
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        Matrix out = std::visit([&](auto& layer) { return layer.forward(h, counters); }, layers_[l]);
        if (l + 1 == layers_.size()) return out;
        h = out;
        for (double& v : h.values()) v = activate(spec_.activation, v);
        pre_activations_.push_back(std::move(out));
    }
    return h;
}

Matrix ToyModel::infer(const Matrix& x) const {
    Matrix h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        h = std::visit([&](const auto& layer) { return layer.infer(h); }, layers_[l]);
        if (l + 1 < layers_.size()) {
            for (double& v : h.values()) v = activate(spec_.activation, v);
        }
    }
    return h;
}

std::vector<LayerGradients> ToyModel::backward(const Matrix& grad_out, OpCounters* counters) {
    std::vector<LayerGradients> grads(layers_.size());
    Matrix g = grad_out;
    for (std::size_t l = layers_.size(); l-- > 0;) {
        Matrix grad_x;
        if (auto* melded = std::get_if<MeldedLinear>(&layers_[l])) {
            MeldedGradients mg = melded->backward(g, counters);
            grads[l].grad_b = std::move(mg.grad_b);
            grad_x = std::move(mg.grad_x);
        } else {
            LoraGradients lg = std::get<ExplicitLoraLayer>(layers_[l]).backward(g, counters);
            grads[l].grad_b = std::move(lg.grad_b);
            if (trains_a()) grads[l].grad_a = std::move(lg.grad_a);
            grad_x = std::move(lg.grad_x);
        }
        if (l > 0) {
            const Matrix& pre = pre_activations_[l - 1];
            for (std::size_t i = 0; i < grad_x.size(); ++i) {
                grad_x.values()[i] *= activate_derivative(spec_.activation, pre.values()[i]);
            }
            g = std::move(grad_x);
        }
    }
    return grads;
}

std::vector<Matrix> initial_weights(const Matrix& pretrained, const std::vector<std::size_t>& hidden,
                                    std::uint64_t seed) {
    if (hidden.empty()) return {pretrained};
    std::vector<std::size_t> dims{pretrained.cols()};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(pretrained.rows());
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<Matrix> out;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Matrix w(dims[l + 1], dims[l]);
        const double stddev = 1.0 / std::sqrt(static_cast<double>(dims[l]));
        for (double& v : w.values()) v = stddev * dist(rng);
        out.push_back(std::move(w));
    }
    return out;
}

}  // namespace falqon
