// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/fp8.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "falqon/error.hpp"

namespace falqon {

namespace {

// Round a non-negative binary64 to the nearest integer, ties to even.
// Independent of the floating-point environment's rounding mode.
double round_half_even(double x) noexcept {
    const double lower = std::floor(x);
    const double diff = x - lower;
    if (diff > 0.5) return lower + 1.0;
    if (diff < 0.5) return lower;
    return std::fmod(lower, 2.0) == 0.0 ? lower : lower + 1.0;
}

double decode_formula(std::uint8_t bits, const Fp8Format& f) noexcept {
    const int mb = f.mantissa_bits;
    const unsigned exp_mask = (1u << f.exponent_bits) - 1u;
    const unsigned mant_mask = (1u << mb) - 1u;
    const bool negative = (bits & 0x80u) != 0;
    const unsigned exp_field = (bits >> mb) & exp_mask;
    const unsigned mant = bits & mant_mask;

    double magnitude = 0.0;
    if (f.tag == Fp8Tag::E4M3 && exp_field == exp_mask && mant == mant_mask) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    if (f.tag == Fp8Tag::E5M2 && exp_field == exp_mask) {
        if (mant != 0) return std::numeric_limits<double>::quiet_NaN();
        magnitude = std::numeric_limits<double>::infinity();
    } else if (exp_field == 0) {
        magnitude = std::ldexp(static_cast<double>(mant), 1 - f.bias - mb);
    } else {
        magnitude = std::ldexp(static_cast<double>(mant + (1u << mb)), static_cast<int>(exp_field) - f.bias - mb);
    }
    return negative ? -magnitude : magnitude;
}

std::array<double, 256> build_table(const Fp8Format& f) noexcept {
    std::array<double, 256> table{};
    for (unsigned b = 0; b < 256; ++b) {
        table[b] = decode_formula(static_cast<std::uint8_t>(b), f);
    }
    return table;
}

}  // namespace

std::string_view to_string(Fp8Tag tag) noexcept { return tag == Fp8Tag::E4M3 ? "e4m3" : "e5m2"; }

Fp8Tag parse_fp8_tag(std::string_view text) {
    if (text == "e4m3" || text == "E4M3") return Fp8Tag::E4M3;
    if (text == "e5m2" || text == "E5M2") return Fp8Tag::E5M2;
    throw DomainError("unknown FP8 format '" + std::string(text) + "' (expected e4m3 or e5m2)");
}

std::uint8_t encode_fp8_bits(double value, const Fp8Format& f) noexcept {
    const std::uint8_t sign = std::signbit(value) ? 0x80 : 0x00;
    if (std::isnan(value)) {
        return static_cast<std::uint8_t>(sign | f.nan_bits);
    }
    const double a = std::abs(value);
    if (a > f.max_finite) {
        return static_cast<std::uint8_t>(sign | f.max_finite_bits);
    }
    if (a == 0.0) {
        return sign;
    }

    const int mb = f.mantissa_bits;
    const int min_exp = 1 - f.bias;
    int e = 0;
    std::frexp(a, &e);
    int exponent = std::max(e - 1, min_exp);

    // a / quantum is exact: quantum is a power of two and the quotient stays
    // far inside binary64's normal range.
    double q = round_half_even(std::ldexp(a, mb - exponent));
    const double implicit_one = std::ldexp(1.0, mb);
    if (q == 2.0 * implicit_one) {
        ++exponent;
        q = implicit_one;
    }

    unsigned exp_field = 0;
    unsigned mant = 0;
    if (q < implicit_one) {
        // Only reachable at min_exp: subnormal (or rounded to zero).
        mant = static_cast<unsigned>(q);
    } else {
        exp_field = static_cast<unsigned>(exponent + f.bias);
        mant = static_cast<unsigned>(q - implicit_one);
    }
    return static_cast<std::uint8_t>(sign | (exp_field << mb) | mant);
}

const std::array<double, 256>& decode_table(Fp8Tag format) noexcept {
    static const std::array<double, 256> e4m3 = build_table(kE4M3);
    static const std::array<double, 256> e5m2 = build_table(kE5M2);
    return format == Fp8Tag::E4M3 ? e4m3 : e5m2;
}

double decode_fp8_bits(std::uint8_t bits, Fp8Tag format) noexcept { return decode_table(format)[bits]; }

Fp8Code encode_fp8(double value, Fp8Tag format) noexcept {
    return Fp8Code{encode_fp8_bits(value, format_of(format)), format};
}

double decode_fp8(Fp8Code code) noexcept { return decode_fp8_bits(code.bits, code.format); }

}  // namespace falqon
