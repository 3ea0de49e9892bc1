// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles/fp8_oracle.hpp"

#include <cmath>
#include <limits>

namespace falqon::oracle {

Fp8Oracle::Fp8Oracle(int exp_bits, int man_bits, int bias, bool ieee_specials)
    : exp_bits_(exp_bits), man_bits_(man_bits), bias_(bias), ieee_specials_(ieee_specials) {
    for (unsigned b = 0; b < 256; ++b) {
        table_[b] = decode_fields(static_cast<std::uint8_t>(b));
    }
    for (unsigned b = 0; b < 128; ++b) {
        const double v = table_[b];
        if (std::isfinite(v) && v > max_finite_) {
            max_finite_ = v;
            max_bits_ = static_cast<std::uint8_t>(b);
        }
        if (is_nan(static_cast<std::uint8_t>(b))) nan_bits_ = static_cast<std::uint8_t>(b);
    }
}

bool Fp8Oracle::is_nan(std::uint8_t bits) const {
    const unsigned exp = (bits >> man_bits_) & ((1u << exp_bits_) - 1u);
    const unsigned man = bits & ((1u << man_bits_) - 1u);
    const bool exp_ones = exp == (1u << exp_bits_) - 1u;
    if (ieee_specials_) return exp_ones && man != 0;
    return exp_ones && man == (1u << man_bits_) - 1u;
}

bool Fp8Oracle::is_inf(std::uint8_t bits) const {
    const unsigned exp = (bits >> man_bits_) & ((1u << exp_bits_) - 1u);
    const unsigned man = bits & ((1u << man_bits_) - 1u);
    return ieee_specials_ && exp == (1u << exp_bits_) - 1u && man == 0;
}

double Fp8Oracle::decode_fields(std::uint8_t bits) const {
    if (is_nan(bits)) return std::numeric_limits<double>::quiet_NaN();
    const double sign = (bits & 0x80u) ? -1.0 : 1.0;
    if (is_inf(bits)) return sign * std::numeric_limits<double>::infinity();
    const unsigned exp = (bits >> man_bits_) & ((1u << exp_bits_) - 1u);
    const unsigned man = bits & ((1u << man_bits_) - 1u);
    const double frac = static_cast<double>(man) / std::pow(2.0, man_bits_);
    if (exp == 0) return sign * frac * std::pow(2.0, 1 - bias_);
    return sign * (1.0 + frac) * std::pow(2.0, static_cast<int>(exp) - bias_);
}

std::uint8_t Fp8Oracle::encode(double value) const {
    const unsigned sign = std::signbit(value) ? 0x80u : 0u;
    if (std::isnan(value)) return static_cast<std::uint8_t>(sign | nan_bits_);
    const double mag = std::fabs(value);
    if (mag >= max_finite_) return static_cast<std::uint8_t>(sign | max_bits_);
    unsigned best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (unsigned b = 0; b < 128; ++b) {
        const double v = table_[b];
        if (!std::isfinite(v)) continue;
        const double err = std::fabs(v - mag);
        if (err < best_err || (err == best_err && (b & 1u) == 0u)) {
            best = b;
            best_err = err;
        }
    }
    return static_cast<std::uint8_t>(sign | best);
}

}  // namespace falqon::oracle
