// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace falqon {

enum class Phase : std::uint8_t { forward = 0, backward = 1, update = 2 };

inline constexpr std::array<Phase, 3> kAllPhases{Phase::forward, Phase::backward, Phase::update};

std::string_view to_string(Phase phase) noexcept;

// Modeled memory traffic per element, binary64 source data:
// quantize reads 8B for the amax pass, reads 8B again and writes a 1B code;
// dequantize reads the code and writes 8B.
inline constexpr std::uint64_t kQuantizeBytesPerElement = 17;
inline constexpr std::uint64_t kDequantizeBytesPerElement = 9;

struct PhaseCounters {
    std::uint64_t quantize_ops = 0;
    std::uint64_t quantize_elements = 0;
    std::uint64_t dequantize_elements = 0;
    std::uint64_t matmul_flops = 0;
    std::uint64_t bytes_moved = 0;

    PhaseCounters& operator+=(const PhaseCounters& o) noexcept;
    friend bool operator==(const PhaseCounters&, const PhaseCounters&) = default;
};

/// Per-run operation tallies, bucketed by training phase.
///
/// Single writer. Every record_* call lands in the current phase; all
/// counters only ever grow.
class OpCounters {
 public:
    void set_phase(Phase phase) noexcept { phase_ = phase; }
    Phase phase() const noexcept { return phase_; }

    // One quantize_tensor call over `elements` values.
    void record_quantize(std::uint64_t elements) noexcept;
    // Element re-encodes that are not a full tensor quantization (no amax pass).
    void record_requantize(std::uint64_t elements) noexcept;
    void record_dequantize(std::uint64_t elements) noexcept;
    // (m x n) * (n x d) product; `operand_bytes` is the modeled read+write traffic.
    void record_matmul(std::uint64_t m, std::uint64_t n, std::uint64_t d, std::uint64_t operand_bytes) noexcept;

    const PhaseCounters& at(Phase phase) const noexcept { return phases_[static_cast<std::size_t>(phase)]; }
    PhaseCounters total() const noexcept;

    OpCounters& operator+=(const OpCounters& other) noexcept;
    friend bool operator==(const OpCounters&, const OpCounters&) = default;

 private:
    PhaseCounters& current() noexcept { return phases_[static_cast<std::size_t>(phase_)]; }

    std::array<PhaseCounters, 3> phases_{};
    Phase phase_ = Phase::forward;
};

}  // namespace falqon
