// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/optimizer.hpp"

#include <cmath>
#include <string>

#include "falqon/error.hpp"

namespace falqon {

AdamW::AdamW(AdamWParams params, const std::vector<std::pair<std::size_t, std::size_t>>& shapes)
    : params_(params) {
    if (!(params_.lr >= 0.0) || !(params_.beta1 >= 0.0 && params_.beta1 < 1.0) ||
        !(params_.beta2 >= 0.0 && params_.beta2 < 1.0) || !(params_.eps > 0.0) || !(params_.weight_decay >= 0.0)) {
        throw DomainError("AdamW: hyperparameters out of range");
    }
    for (const auto& [rows, cols] : shapes) {
        moments_.push_back({Matrix(rows, cols), Matrix(rows, cols)});
    }
}

Matrix AdamW::step(std::size_t slot, const Matrix& grad, const Matrix* param) {
    if (slot >= moments_.size()) {
        throw DomainError("AdamW: slot " + std::to_string(slot) + " out of range");
    }
    if (t_ == 0) {
        throw DomainError("AdamW: begin_step() not called");
    }
    AdamMoments& mo = moments_[slot];
    if (grad.rows() != mo.first.rows() || grad.cols() != mo.first.cols() ||
        (param != nullptr && (param->rows() != grad.rows() || param->cols() != grad.cols()))) {
        throw ShapeError("AdamW: gradient shape does not match slot " + std::to_string(slot));
    }
    const double b1 = params_.beta1;
    const double b2 = params_.beta2;
    const double t = static_cast<double>(t_);
    const double bc1 = 1.0 - std::pow(b1, t);
    const double bc2 = 1.0 - std::pow(b2, t);

    Matrix delta(grad.rows(), grad.cols());
    const auto g = grad.values();
    auto m = mo.first.values();
    auto v = mo.second.values();
    auto out = delta.values();
    for (std::size_t i = 0; i < g.size(); ++i) {
        m[i] = b1 * m[i] + (1.0 - b1) * g[i];
        v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        const double m_hat = m[i] / bc1;
        const double v_hat = v[i] / bc2;
        out[i] = -params_.lr * m_hat / (std::sqrt(v_hat) + params_.eps);
        if (param != nullptr) {
            out[i] -= params_.lr * params_.weight_decay * param->values()[i];
        }
    }
    return delta;
}

void AdamW::set_moments(std::size_t slot, AdamMoments moments) {
    AdamMoments& mo = moments_.at(slot);
    if (moments.first.rows() != mo.first.rows() || moments.first.cols() != mo.first.cols() ||
        moments.second.rows() != mo.second.rows() || moments.second.cols() != mo.second.cols()) {
        throw ShapeError("AdamW: moment shapes do not match slot " + std::to_string(slot));
    }
    mo = std::move(moments);
}

}  // namespace falqon
