// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "falqon/matrix.hpp"
#include "falqon/melded_linear.hpp"
#include "falqon/optimizer.hpp"
#include "falqon/quantized_tensor.hpp"

namespace falqon {

struct Session;

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// State of one FP8 melded layer plus the AdamW moments of its implicit B.
struct CheckpointLayer {
    std::uint32_t m = 0;
    std::uint32_t n = 0;
    std::uint32_t r = 0;
    std::uint32_t k = 0;
    QuantizedTensor merged;  // (m + r) x n
    Matrix a_full;           // r x n
    Matrix delta_buffer;     // m x r
    AdamMoments moments;     // m x r each

    friend bool operator==(const CheckpointLayer&, const CheckpointLayer&) = default;
};

struct Checkpoint {
    std::vector<CheckpointLayer> layers;

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Layout (all little-endian): "FALQONCK", u32 version, u32 layer count,
/// then per layer m, n, r, k (u32), s_W (f64), (m+r)*n code bytes,
/// A_full, delta buffer, first and second moments (f64, row-major) and the
/// u8 code format tag.
std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
/// Throws FormatError on bad magic, version mismatch, truncation, trailing
/// bytes or inconsistent shapes.
Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes);

/// Throws StateError unless every layer is an FP8 melded layer.
Checkpoint capture_checkpoint(const Session& session);
/// Replaces the session's layers and B moments. The session must have been
/// built from the same config (layer count and shapes); ShapeError otherwise.
void restore_checkpoint(const Checkpoint& ckpt, Session& session, BufferMode buffer_mode);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace falqon
