// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/op_counters.hpp"

namespace falqon {

std::string_view to_string(Phase phase) noexcept {
    switch (phase) {
        case Phase::forward:
            return "forward";
        case Phase::backward:
            return "backward";
        case Phase::update:
            return "update";
    }
    return "unknown";
}

PhaseCounters& PhaseCounters::operator+=(const PhaseCounters& o) noexcept {
    quantize_ops += o.quantize_ops;
    quantize_elements += o.quantize_elements;
    dequantize_elements += o.dequantize_elements;
    matmul_flops += o.matmul_flops;
    bytes_moved += o.bytes_moved;
    return *this;
}

void OpCounters::record_quantize(std::uint64_t elements) noexcept {
    auto& c = current();
    c.quantize_ops += 1;
    c.quantize_elements += elements;
    c.bytes_moved += elements * kQuantizeBytesPerElement;
}

void OpCounters::record_requantize(std::uint64_t elements) noexcept {
    auto& c = current();
    c.quantize_elements += elements;
    // No amax pass: read 8B, write 1B.
    c.bytes_moved += elements * 9;
}

void OpCounters::record_dequantize(std::uint64_t elements) noexcept {
    auto& c = current();
    c.dequantize_elements += elements;
    c.bytes_moved += elements * kDequantizeBytesPerElement;
}

void OpCounters::record_matmul(std::uint64_t m, std::uint64_t n, std::uint64_t d,
                               std::uint64_t operand_bytes) noexcept {
    auto& c = current();
    c.matmul_flops += 2 * m * n * d;
    c.bytes_moved += operand_bytes;
}

PhaseCounters OpCounters::total() const noexcept {
    PhaseCounters sum;
    for (const auto& p : phases_) {
        sum += p;
    }
    return sum;
}

OpCounters& OpCounters::operator+=(const OpCounters& other) noexcept {
    for (std::size_t i = 0; i < phases_.size(); ++i) {
        phases_[i] += other.phases_[i];
    }
    return *this;
}

}  // namespace falqon
