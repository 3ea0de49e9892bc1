// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/overhead_model.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "falqon/error.hpp"
#include "falqon/train.hpp"

namespace falqon {

namespace {

constexpr std::string_view kCsvHeader = "phase,path,quantize_ms,matmul_ms,quantize_ops,flops";

std::string format_real(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

double parse_real(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("breakdown csv: bad number '" + std::string(s) + "'");
    return v;
}

std::uint64_t parse_count(std::string_view s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) throw FormatError("breakdown csv: bad count '" + std::string(s) + "'");
    return v;
}

}  // namespace

void CostParams::validate() const {
    const bool ok = mem_bandwidth > 0 && fp16_throughput > 0 && fp8_throughput > 0 && quantize_bytes_per_elem > 0 &&
                    std::isfinite(mem_bandwidth) && std::isfinite(fp16_throughput) &&
                    std::isfinite(fp8_throughput) && std::isfinite(quantize_bytes_per_elem);
    if (!ok) throw DomainError("CostParams: all constants must be positive and finite");
    if (fp8_throughput < fp16_throughput) throw DomainError("CostParams: fp8_throughput below fp16_throughput");
}

std::string_view to_string(CostPath p) noexcept {
    switch (p) {
        case CostPath::fp16:
            return "fp16";
        case CostPath::fp8_plain:
            return "fp8_plain";
        case CostPath::fp8_lora_explicit:
            return "fp8_lora_explicit";
        case CostPath::fp8_melded:
            return "fp8_melded";
    }
    return "?";
}

PredictedTimes predict_times(const LayerDims& dims, const CostParams& params, CostPath path) {
    const double m = dims.m;
    const double n = dims.n;
    const double d = dims.d;
    const double r = dims.r;
    const double qcost = params.quantize_bytes_per_elem / params.mem_bandwidth;
    const double backbone_flops = 2.0 * m * n * d;
    const double adapter_flops = 2.0 * r * n * d + 2.0 * m * r * d;
    PredictedTimes t;
    switch (path) {
        case CostPath::fp16:
            t.matmul_s = (backbone_flops + adapter_flops) / params.fp16_throughput;
            break;
        case CostPath::fp8_plain:
            t.quantize_s = (m * n + n * d) * qcost;
            t.matmul_s = backbone_flops / params.fp8_throughput;
            break;
        case CostPath::fp8_lora_explicit:
            t.quantize_s = (m * n + n * d + r * n + m * r + r * d) * qcost;
            t.matmul_s = (backbone_flops + adapter_flops) / params.fp8_throughput;
            break;
        case CostPath::fp8_melded:
            t.quantize_s = (m * n + n * d) * qcost;
            t.matmul_s = 2.0 * (m + r) * n * d / params.fp8_throughput;
            break;
    }
    return t;
}

std::uint64_t crossover_dim(const CostParams& params, std::uint64_t limit) {
    auto fp8_wins = [&](std::uint64_t n) {
        const double x = static_cast<double>(n);
        const LayerDims dims{x, x, x, 0};
        return predict_times(dims, params, CostPath::fp8_plain).total() <
               predict_times(dims, params, CostPath::fp16).total();
    };
    // fp16 - fp8 time is n^2 (a n - b): once fp8 wins it keeps winning.
    if (!fp8_wins(limit)) return 0;
    std::uint64_t lo = 1;
    std::uint64_t hi = limit;
    while (lo < hi) {
        const std::uint64_t mid = lo + (hi - lo) / 2;
        if (fp8_wins(mid)) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo;
}

double break_even_dim(const CostParams& params) {
    const double per_flop_gain = 2.0 / params.fp16_throughput - 2.0 / params.fp8_throughput;
    if (!(per_flop_gain > 0.0)) return std::numeric_limits<double>::infinity();
    return 2.0 * params.quantize_bytes_per_elem / params.mem_bandwidth / per_flop_gain;
}

std::vector<SpeedupPoint> speedup_curve(const std::vector<double>& ranks, const LayerDims& dims,
                                        const CostParams& params) {
    std::vector<SpeedupPoint> out;
    for (double r : ranks) {
        if (!(r > 0.0)) throw DomainError("speedup_curve: ranks must be positive");
        const double flops = 2.0 * r * dims.n * dims.d + 2.0 * dims.m * r * dims.d;
        const double quantized = dims.n * dims.d + r * dims.n + dims.m * r + r * dims.d;
        SpeedupPoint p;
        p.rank = r;
        p.fp16_s = flops / params.fp16_throughput;
        p.fp8_s = quantized * params.quantize_bytes_per_elem / params.mem_bandwidth + flops / params.fp8_throughput;
        p.ratio = p.fp16_s / p.fp8_s;
        out.push_back(p);
    }
    return out;
}

std::vector<BreakdownRow> render_breakdown(const OpCounters& counters, const CostParams& params,
                                           std::string_view path, bool fp8) {
    std::vector<BreakdownRow> rows;
    const double throughput = fp8 ? params.fp8_throughput : params.fp16_throughput;
    for (Phase p : kAllPhases) {
        const PhaseCounters& c = counters.at(p);
        BreakdownRow row;
        row.phase = std::string(to_string(p));
        row.path = std::string(path);
        row.quantize_ms = 1e3 * static_cast<double>(c.quantize_elements) * params.quantize_bytes_per_elem /
                          params.mem_bandwidth;
        row.matmul_ms = 1e3 * static_cast<double>(c.matmul_flops) / throughput;
        row.quantize_ops = c.quantize_ops;
        row.flops = c.matmul_flops;
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<BreakdownRow> render_breakdown(const RunReport& report, const CostParams& params) {
    const ModelVariant v = report.config.variant;
    const bool fp8 = v == ModelVariant::melded || v == ModelVariant::explicit_fp8;
    return render_breakdown(report.counters, params, to_string(v), fp8);
}

std::string breakdown_csv(const std::vector<BreakdownRow>& rows) {
    std::string out(kCsvHeader);
    out += '\n';
    for (const BreakdownRow& r : rows) {
        out += r.phase + ',' + r.path + ',' + format_real(r.quantize_ms) + ',' + format_real(r.matmul_ms) + ',' +
               std::to_string(r.quantize_ops) + ',' + std::to_string(r.flops) + '\n';
    }
    return out;
}

std::vector<BreakdownRow> parse_breakdown_csv(std::string_view csv) {
    std::vector<BreakdownRow> rows;
    std::istringstream in{std::string(csv)};
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw FormatError("breakdown csv: missing or wrong header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string_view> f;
        std::string_view rest(line);
        for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
            f.push_back(rest.substr(0, pos));
        }
        f.push_back(rest);
        if (f.size() != 6) throw FormatError("breakdown csv: expected 6 fields, got " + std::to_string(f.size()));
        rows.push_back(BreakdownRow{std::string(f[0]), std::string(f[1]), parse_real(f[2]), parse_real(f[3]),
                                    parse_count(f[4]), parse_count(f[5])});
    }
    return rows;
}

}  // namespace falqon
