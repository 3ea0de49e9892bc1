// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "falqon/matrix.hpp"

namespace falqon {

enum class Task { linear_teacher, classification_blobs };

struct DatasetSpec {
    Task task = Task::linear_teacher;
    std::size_t in_features = 256;
    std::size_t out_features = 512;  // classes for blobs
    std::size_t train_samples = 4096;
    std::size_t eval_samples = 512;

    // linear_teacher: pretrained ~ N(0, weight_std^2); the teacher adds an
    // independent N(0, (drift * weight_std)^2) shift. Inputs live in a random
    // input_rank-dimensional subspace (0 = full rank) with unit variance per
    // coordinate on average. noise is the std of additive label noise.
    double weight_std = 0.001;
    double drift = 1.0;
    std::size_t input_rank = 4;
    double noise = 0.0;

    // classification_blobs: class means are separation * sigma apart on
    // average (sigma = 1), one cluster per class.
    double separation = 10.0;
};

/// Columns are samples.
struct Dataset {
    Task task = Task::linear_teacher;
    Matrix pretrained;  // out x in, the backbone the adapters start from
    Matrix teacher;     // out x in (linear_teacher only)
    Matrix train_x;
    Matrix train_y;     // linear_teacher targets
    std::vector<std::size_t> train_labels;
    Matrix eval_x;
    Matrix eval_y;
    std::vector<std::size_t> eval_labels;

    std::size_t train_size() const noexcept { return train_x.cols(); }
};

/// Deterministic in (spec, seed), bit for bit.
std::string_view to_string(Task t) noexcept;
// Throws DomainError on unknown names.
Task parse_task(std::string_view s);

Dataset synthetic_dataset(const DatasetSpec& spec, std::uint64_t seed);

struct Batch {
    Matrix x;
    Matrix y;
    std::vector<std::size_t> labels;
};

/// Training batch for 1-based `step`: samples (step-1)*size ... wrapping
/// around the training set. A pure function of step, so resumed runs see the
/// same batches.
Batch training_batch(const Dataset& data, std::size_t step, std::size_t size);

}  // namespace falqon
