// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace falqon {

enum class Fp8Tag : std::uint8_t { E4M3 = 0, E5M2 = 1 };

/// Bit layout and range of one 8-bit float encoding.
///
/// E4M3 follows the "fn" convention: no infinities, a single NaN mantissa
/// pattern per sign (exponent and mantissa all ones), max finite 448.
/// E5M2 is IEEE-like: exponent all ones encodes infinity (zero mantissa) or
/// NaN, max finite 57344.
struct Fp8Format {
    Fp8Tag tag;
    int exponent_bits;
    int mantissa_bits;
    int bias;
    double max_finite;
    std::uint8_t max_finite_bits;  // positive max finite code
    std::uint8_t nan_bits;         // canonical positive NaN code
};

inline constexpr Fp8Format kE4M3{Fp8Tag::E4M3, 4, 3, 7, 448.0, 0x7E, 0x7F};
inline constexpr Fp8Format kE5M2{Fp8Tag::E5M2, 5, 2, 15, 57344.0, 0x7B, 0x7F};

constexpr const Fp8Format& format_of(Fp8Tag tag) noexcept {
    return tag == Fp8Tag::E4M3 ? kE4M3 : kE5M2;
}

std::string_view to_string(Fp8Tag tag) noexcept;
// Accepts "e4m3"/"E4M3"/"e5m2"/"E5M2"; throws DomainError otherwise.
Fp8Tag parse_fp8_tag(std::string_view text);

struct Fp8Code {
    std::uint8_t bits = 0;
    Fp8Tag format = Fp8Tag::E4M3;

    friend bool operator==(const Fp8Code&, const Fp8Code&) = default;
};

/// Round-to-nearest-even onto the FP8 grid. Magnitudes above max finite
/// (infinities included) saturate to +-max finite; NaN maps to the
/// format's NaN code. The sign of zero is preserved.
Fp8Code encode_fp8(double value, Fp8Tag format) noexcept;

/// Exact real value of a code. -0 decodes to -0.0.
double decode_fp8(Fp8Code code) noexcept;

// Raw-byte variants used on hot paths.
std::uint8_t encode_fp8_bits(double value, const Fp8Format& format) noexcept;
double decode_fp8_bits(std::uint8_t bits, Fp8Tag format) noexcept;

// All 256 decoded values of a format, indexed by code.
const std::array<double, 256>& decode_table(Fp8Tag format) noexcept;

// True when encoding `value` clips it to max finite.
inline bool saturates(double value, const Fp8Format& format) noexcept {
    return value > format.max_finite || value < -format.max_finite;
}

}  // namespace falqon
