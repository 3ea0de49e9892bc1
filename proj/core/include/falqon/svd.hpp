// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "falqon/matrix.hpp"

namespace falqon {

/// Rank-r factors of M ~= U * diag(S) * Vt.
///
/// U (m x r) has orthonormal columns, Vt (r x n) orthonormal rows, S is
/// non-negative and descending. The first entry of each U column whose
/// magnitude exceeds 1e-12 is positive (the matching Vt row is flipped with
/// it), so factorizations are reproducible.
struct TruncatedSvd {
    Matrix u;
    std::vector<double> singular_values;
    Matrix vt;
};

/// Full one-sided Jacobi SVD followed by truncation to the leading r
/// triplets. Requires 1 <= r <= min(m, n) (DomainError) and finite input
/// (NumericalError).
TruncatedSvd truncated_svd(const Matrix& m, std::size_t r);

/// U * diag(S) * Vt.
Matrix reconstruct(const TruncatedSvd& svd);

struct LoraFactors {
    Matrix b;  // m x r, U * diag(sqrt S)
    Matrix a;  // r x n, diag(sqrt S) * Vt
};

/// Balanced split of the singular values between the two adapter factors.
LoraFactors factor_to_lora(const TruncatedSvd& svd);

}  // namespace falqon
