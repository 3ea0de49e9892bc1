// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "falqon/matrix.hpp"

namespace falqon {

struct AdamWParams {
    double lr = 2e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

struct AdamMoments {
    Matrix first;
    Matrix second;

    friend bool operator==(const AdamMoments&, const AdamMoments&) = default;
};

/// AdamW over a fixed list of parameter slots.
///
/// step() returns the parameter change instead of applying it, so the
/// melded layers can route it into their row buffers. Weight decay is taken
/// against the `param` argument; a null param means the implicit factor,
/// which is zero after every fold-in, so decay contributes nothing.
class AdamW {
 public:
    AdamW() = default;
    AdamW(AdamWParams params, const std::vector<std::pair<std::size_t, std::size_t>>& shapes);

    // Advance the shared step count; call once per global step.
    void begin_step() noexcept { ++t_; }
    std::uint64_t step_count() const noexcept { return t_; }
    void set_step_count(std::uint64_t t) noexcept { t_ = t; }

    Matrix step(std::size_t slot, const Matrix& grad, const Matrix* param = nullptr);

    const AdamWParams& params() const noexcept { return params_; }
    std::size_t slots() const noexcept { return moments_.size(); }
    const AdamMoments& moments(std::size_t slot) const { return moments_.at(slot); }
    void set_moments(std::size_t slot, AdamMoments moments);

 private:
    AdamWParams params_;
    std::vector<AdamMoments> moments_;
    std::uint64_t t_ = 0;
};

}  // namespace falqon
