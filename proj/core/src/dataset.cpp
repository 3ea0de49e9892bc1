// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/dataset.hpp"

#include <cmath>
#include <random>
#include <string>

#include "falqon/error.hpp"
#include "falqon/tensor_ops.hpp"

namespace falqon {

namespace {

Matrix gaussian(std::size_t rows, std::size_t cols, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Matrix m(rows, cols);
    for (double& v : m.values()) v = stddev * dist(rng);
    return m;
}

// n x q with orthonormal columns (modified Gram-Schmidt on Gaussian columns).
Matrix orthonormal_columns(std::size_t n, std::size_t q, std::mt19937_64& rng) {
    Matrix p = gaussian(n, q, 1.0, rng);
    for (std::size_t j = 0; j < q; ++j) {
        for (std::size_t prev = 0; prev < j; ++prev) {
            double d = 0.0;
            for (std::size_t i = 0; i < n; ++i) d += p(i, j) * p(i, prev);
            for (std::size_t i = 0; i < n; ++i) p(i, j) -= d * p(i, prev);
        }
        double norm = 0.0;
        for (std::size_t i = 0; i < n; ++i) norm += p(i, j) * p(i, j);
        norm = std::sqrt(norm);
        for (std::size_t i = 0; i < n; ++i) p(i, j) /= norm;
    }
    return p;
}

void fill_teacher_split(const DatasetSpec& spec, const Matrix& basis, const Matrix& teacher, std::size_t count,
                        std::mt19937_64& rng, Matrix& x, Matrix& y) {
    if (basis.empty()) {
        x = gaussian(spec.in_features, count, 1.0, rng);
    } else {
        const double gain = std::sqrt(static_cast<double>(spec.in_features) / static_cast<double>(basis.cols()));
        x = matmul(basis, gaussian(basis.cols(), count, gain, rng));
    }
    y = matmul(teacher, x);
    if (spec.noise > 0.0) y += gaussian(y.rows(), y.cols(), spec.noise, rng);
}

void fill_blob_split(const Matrix& means, std::size_t count, std::mt19937_64& rng, Matrix& x,
                     std::vector<std::size_t>& labels) {
    const std::size_t classes = means.cols();
    std::uniform_int_distribution<std::size_t> pick(0, classes - 1);
    x = gaussian(means.rows(), count, 1.0, rng);
    labels.resize(count);
    for (std::size_t s = 0; s < count; ++s) {
        labels[s] = pick(rng);
        for (std::size_t i = 0; i < means.rows(); ++i) x(i, s) += means(i, labels[s]);
    }
}

}  // namespace

Dataset synthetic_dataset(const DatasetSpec& spec, std::uint64_t seed) {
    if (spec.in_features == 0 || spec.out_features == 0 || spec.train_samples == 0 || spec.eval_samples == 0) {
        throw DomainError("synthetic_dataset: sizes must be positive");
    }
    if (spec.input_rank > spec.in_features) {
        throw DomainError("synthetic_dataset: input_rank exceeds in_features");
    }
    if (!(spec.weight_std >= 0.0) || !(spec.drift >= 0.0) || !(spec.noise >= 0.0) || !(spec.separation >= 0.0)) {
        throw DomainError("synthetic_dataset: negative scale parameter");
    }
    std::mt19937_64 rng(seed);
    Dataset data;
    data.task = spec.task;
    data.pretrained = gaussian(spec.out_features, spec.in_features, spec.weight_std, rng);

    if (spec.task == Task::linear_teacher) {
        data.teacher = data.pretrained + gaussian(spec.out_features, spec.in_features, spec.drift * spec.weight_std, rng);
        const Matrix basis =
            spec.input_rank == 0 ? Matrix() : orthonormal_columns(spec.in_features, spec.input_rank, rng);
        fill_teacher_split(spec, basis, data.teacher, spec.train_samples, rng, data.train_x, data.train_y);
        fill_teacher_split(spec, basis, data.teacher, spec.eval_samples, rng, data.eval_x, data.eval_y);
    } else {
        if (spec.out_features < 2) throw DomainError("synthetic_dataset: blobs need at least two classes");
        const double spread = spec.separation / std::sqrt(2.0 * static_cast<double>(spec.in_features));
        const Matrix means = gaussian(spec.in_features, spec.out_features, spread, rng);
        fill_blob_split(means, spec.train_samples, rng, data.train_x, data.train_labels);
        fill_blob_split(means, spec.eval_samples, rng, data.eval_x, data.eval_labels);
    }
    return data;
}

std::string_view to_string(Task t) noexcept {
    return t == Task::linear_teacher ? "linear_teacher" : "classification_blobs";
}

Task parse_task(std::string_view s) {
    if (s == "linear_teacher") return Task::linear_teacher;
    if (s == "classification_blobs") return Task::classification_blobs;
    throw DomainError("unknown task '" + std::string(s) + "' (expected linear_teacher, classification_blobs)");
}

Batch training_batch(const Dataset& data, std::size_t step, std::size_t size) {
    if (step == 0 || size == 0) throw DomainError("training_batch: step and size are 1-based and positive");
    const std::size_t total = data.train_size();
    const bool regression = data.task == Task::linear_teacher;
    Batch b{Matrix(data.train_x.rows(), size), regression ? Matrix(data.train_y.rows(), size) : Matrix(), {}};
    for (std::size_t j = 0; j < size; ++j) {
        const std::size_t s = ((step - 1) * size + j) % total;
        for (std::size_t i = 0; i < b.x.rows(); ++i) b.x(i, j) = data.train_x(i, s);
        if (regression) {
            for (std::size_t i = 0; i < b.y.rows(); ++i) b.y(i, j) = data.train_y(i, s);
        } else {
            b.labels.push_back(data.train_labels[s]);
        }
    }
    return b;
}

}  // namespace falqon
