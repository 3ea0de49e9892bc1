// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "falqon/op_counters.hpp"

namespace falqon {

struct RunReport;

/// Roofline constants. The defaults are a calibration, not a measurement:
/// fp16_throughput is chosen so that a square FP8 product with per-step
/// quantization of both operands breaks even with FP16 at n = 4096.
struct CostParams {
    double mem_bandwidth = 1e12;               // bytes/s
    double fp16_throughput = 4096e12 / 34.0;   // flop/s
    double fp8_throughput = 2.0 * 4096e12 / 34.0;
    double quantize_bytes_per_elem = static_cast<double>(kQuantizeBytesPerElement);

    // Throws DomainError unless all positive and fp8 >= fp16.
    void validate() const;
};

enum class CostPath { fp16, fp8_plain, fp8_lora_explicit, fp8_melded };

std::string_view to_string(CostPath p) noexcept;

/// Layer y = W x (+ B A x) with W m x n, x n x d, adapter rank r.
struct LayerDims {
    double m = 4096;
    double n = 4096;
    double d = 8192;
    double r = 0;
};

struct PredictedTimes {
    double quantize_s = 0.0;
    double matmul_s = 0.0;
    double total() const noexcept { return quantize_s + matmul_s; }
};

/// fp16: no quantization, 2mnd (+ 2rnd + 2mrd adapter) flops at FP16.
/// fp8_plain: quantize W and x each step, 2mnd flops at FP8.
/// fp8_lora_explicit: fp8_plain plus quantizing A (r x n), B (m x r) and
/// A x (r x d), plus the two adapter products at FP8.
/// fp8_melded: quantize W and x; the merged product 2(m+r)nd at FP8.
PredictedTimes predict_times(const LayerDims& dims, const CostParams& params, CostPath path);

/// Smallest integer n for which fp8_plain beats fp16 on an n x n x n
/// product; searches up to `limit` and returns 0 when no crossover exists.
std::uint64_t crossover_dim(const CostParams& params, std::uint64_t limit = 1u << 24);

/// Real-valued break-even n for the square case (infinity when fp8 is not
/// faster per flop).
double break_even_dim(const CostParams& params);

struct SpeedupPoint {
    double rank = 0;
    double fp16_s = 0;
    double fp8_s = 0;
    double ratio = 0;  // FP8 throughput / FP16 throughput = fp16_s / fp8_s
};

/// Adapter path of an explicit LoRA layer (the two rank-r products and,
/// for FP8, the per-step quantization of x, A, B and A x) at FP8 vs FP16.
std::vector<SpeedupPoint> speedup_curve(const std::vector<double>& ranks, const LayerDims& dims,
                                        const CostParams& params);

struct BreakdownRow {
    std::string phase;
    std::string path;
    double quantize_ms = 0.0;
    double matmul_ms = 0.0;
    std::uint64_t quantize_ops = 0;
    std::uint64_t flops = 0;

    friend bool operator==(const BreakdownRow&, const BreakdownRow&) = default;
};

/// One row per phase: modeled quantize time (quantized elements x bytes per
/// element / bandwidth) and matmul time (flops / throughput of `fp8`).
std::vector<BreakdownRow> render_breakdown(const OpCounters& counters, const CostParams& params,
                                           std::string_view path, bool fp8);
std::vector<BreakdownRow> render_breakdown(const RunReport& report, const CostParams& params);

/// CSV with header phase,path,quantize_ms,matmul_ms,quantize_ops,flops.
/// Reals are written with 17 significant digits so parsing round-trips.
std::string breakdown_csv(const std::vector<BreakdownRow>& rows);
/// Throws FormatError on a malformed header or row.
std::vector<BreakdownRow> parse_breakdown_csv(std::string_view csv);

}  // namespace falqon
