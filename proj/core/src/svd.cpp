// Copyright 2026 The falqon Authors
// SPDX-License-Identifier: Apache-2.0

#include "falqon/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "falqon/error.hpp"

namespace falqon {

namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();
constexpr int kMaxSweeps = 80;

using Columns = std::vector<std::vector<double>>;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void rotate(std::vector<double>& p, std::vector<double>& q, double c, double s) {
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double xp = p[i];
        const double xq = q[i];
        p[i] = c * xp - s * xq;
        q[i] = s * xp + c * xq;
    }
}

struct FullSvd {
    Columns u;  // rows >= cols; one column per singular value
    std::vector<double> s;
    Columns v;
};

// Hestenes one-sided Jacobi on a tall matrix given by its columns.
FullSvd jacobi_tall(Columns a) {
    const std::size_t n = a.size();
    const std::size_t m = n == 0 ? 0 : a[0].size();
    Columns v(n, std::vector<double>(n, 0.0));
    for (std::size_t j = 0; j < n; ++j) v[j][j] = 1.0;

    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double alpha = dot(a[p], a[p]);
                const double beta = dot(a[q], a[q]);
                const double gamma = dot(a[p], a[q]);
                if (gamma == 0.0 || std::fabs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::fabs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                rotate(a[p], a[q], c, s);
                rotate(v[p], v[q], c, s);
            }
        }
        if (!rotated) break;
    }

    FullSvd out;
    out.s.resize(n);
    for (std::size_t j = 0; j < n; ++j) out.s[j] = std::sqrt(dot(a[j], a[j]));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return out.s[x] > out.s[y]; });

    const double smax = n == 0 ? 0.0 : out.s[order[0]];
    const double zero_floor = smax * static_cast<double>(std::max(m, n)) * kEps;
    std::vector<double> sorted_s;
    for (std::size_t idx : order) {
        const double sigma = out.s[idx];
        std::vector<double> col = a[idx];
        const bool degenerate = sigma == 0.0 || sigma <= zero_floor;
        if (!degenerate) {
            for (double& x : col) x /= sigma;
        } else {
            col.clear();
        }
        out.u.push_back(std::move(col));
        out.v.push_back(std::move(v[idx]));
        sorted_s.push_back(sigma);
    }
    out.s = std::move(sorted_s);

    // Complete U with unit vectors orthogonalized against the columns found so
    // far (two Gram-Schmidt passes).
    std::size_t candidate = 0;
    for (auto& col : out.u) {
        if (!col.empty()) continue;
        while (candidate < m) {
            std::vector<double> e(m, 0.0);
            e[candidate++] = 1.0;
            for (int pass = 0; pass < 2; ++pass) {
                for (const auto& other : out.u) {
                    if (other.empty() || &other == &col) continue;
                    const double proj = dot(e, other);
                    for (std::size_t i = 0; i < m; ++i) e[i] -= proj * other[i];
                }
            }
            const double norm = std::sqrt(dot(e, e));
            if (norm > 0.5) {
                for (double& x : e) x /= norm;
                col = std::move(e);
                break;
            }
        }
    }
    return out;
}

}  // namespace

TruncatedSvd truncated_svd(const Matrix& mat, std::size_t r) {
    const std::size_t rows = mat.rows();
    const std::size_t cols = mat.cols();
    if (r < 1 || r > std::min(rows, cols)) {
        throw DomainError("truncated_svd: rank " + std::to_string(r) + " outside [1, " +
                          std::to_string(std::min(rows, cols)) + "]");
    }
    if (!all_finite(mat)) {
        throw NumericalError("truncated_svd: non-finite input");
    }

    const bool tall = rows >= cols;
    const std::size_t big = tall ? rows : cols;
    const std::size_t small = tall ? cols : rows;
    Columns a(small, std::vector<double>(big));
    for (std::size_t i = 0; i < rows; ++i) {
        for (std::size_t j = 0; j < cols; ++j) {
            if (tall) {
                a[j][i] = mat(i, j);
            } else {
                a[i][j] = mat(i, j);
            }
        }
    }
    FullSvd full = jacobi_tall(std::move(a));
    // Tall: M = U S V^T. Wide: M^T = U' S V'^T, so M = V' S U'^T.
    Columns& left = tall ? full.u : full.v;
    Columns& right = tall ? full.v : full.u;

    TruncatedSvd out{Matrix(rows, r), std::vector<double>(full.s.begin(), full.s.begin() + static_cast<long>(r)),
                     Matrix(r, cols)};
    for (std::size_t k = 0; k < r; ++k) {
        double sign = 1.0;
        for (double x : left[k]) {
            if (std::fabs(x) > 1e-12) {
                sign = x > 0.0 ? 1.0 : -1.0;
                break;
            }
        }
        for (std::size_t i = 0; i < rows; ++i) out.u(i, k) = sign * left[k][i];
        for (std::size_t j = 0; j < cols; ++j) out.vt(k, j) = sign * right[k][j];
    }
    return out;
}

Matrix reconstruct(const TruncatedSvd& svd) {
    const std::size_t r = svd.singular_values.size();
    Matrix out(svd.u.rows(), svd.vt.cols());
    for (std::size_t i = 0; i < out.rows(); ++i) {
        for (std::size_t k = 0; k < r; ++k) {
            const double us = svd.u(i, k) * svd.singular_values[k];
            for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += us * svd.vt(k, j);
        }
    }
    return out;
}

LoraFactors factor_to_lora(const TruncatedSvd& svd) {
    const std::size_t r = svd.singular_values.size();
    LoraFactors f{svd.u, svd.vt};
    for (std::size_t k = 0; k < r; ++k) {
        const double root = std::sqrt(svd.singular_values[k]);
        for (std::size_t i = 0; i < f.b.rows(); ++i) f.b(i, k) *= root;
        for (std::size_t j = 0; j < f.a.cols(); ++j) f.a(k, j) *= root;
    }
    return f;
}

}  // namespace falqon
