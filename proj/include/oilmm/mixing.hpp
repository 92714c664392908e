/*
 * Copyright 2026 The OILMM Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "oilmm/linalg.hpp"

namespace oilmm {

/// Relative threshold below which the m-th eigenvalue of a truncated
/// eigendecomposition is treated as zero.
inline constexpr double kEigenFloor = 1e-12;

/// Mixing basis H = U S^{1/2} with orthonormal U (p x m) and positive S.
struct OrthogonalBasis {
    Matrix U;
    Vector S;

    /// Validates orthonormality (Frobenius 1e-10), positivity and m <= p.
    static OrthogonalBasis create(Matrix U, Vector S);

    long p() const noexcept { return U.rows(); }
    long m() const noexcept { return U.cols(); }
    Matrix H() const { return U * S.cwiseSqrt().asDiagonal(); }
};

/// Unconstrained ILMM basis with full column rank.
struct GeneralBasis {
    Matrix H;

    static GeneralBasis create(Matrix H);

    long p() const noexcept { return H.rows(); }
    long m() const noexcept { return H.cols(); }
};

/// Observation noise sigma2 I + H D H^T. When `heterogeneous` holds p
/// per-output weights v the noise is instead sigma2 diag(v), which needs
/// D = 0 and a whitened basis (see whiten_basis).
struct NoiseModel {
    double sigma2 = 1.0;
    Vector D;
    std::optional<Vector> heterogeneous;

    static NoiseModel isotropic(double sigma2, long m);

    void validate(long p, long m) const;
    bool has_D() const { return D.size() > 0 && (D.array() != 0.0).any(); }
};

/// Dense p x p observation covariance of an OILMM.
Matrix noise_covariance(const OrthogonalBasis& basis, const NoiseModel& noise);

/// Sufficient-statistic projection T and its projected noise.
struct Projection {
    /// m x (number of outputs the projection acts on).
    Matrix T;
    Matrix SigmaT;
    bool diagonal = false;

    // Likelihood correction context.
    double log_det_S = 0.0;
    double log_det_gram = 0.0;
    /// Output indices T acts on, in order; all outputs for full data.
    std::vector<long> observed;
    /// Dense projected noise before the diagonal approximation (missing-data
    /// blocks only; empty otherwise).
    Matrix SigmaT_dense;

    Vector sigma_diagonal() const { return SigmaT.diagonal(); }
};

/// Time stamps, a p x n observation matrix and a mask (true = observed).
/// Unobserved entries of Y are NaN.
struct Dataset {
    Vector times;
    Matrix Y;
    BoolMatrix mask;

    /// Builds a dataset whose mask is the set of non-NaN entries of Y.
    static Dataset from_matrix(Vector times, Matrix Y);

    long n() const noexcept { return Y.cols(); }
    long p() const noexcept { return Y.rows(); }
    bool fully_observed() const { return mask.all(); }
    void validate() const;

    Dataset select_columns(std::span<const long> cols) const;
};

struct Block {
    std::vector<long> columns;
    std::vector<long> observed;
};

/// T = S^{-1/2} U^T, SigmaT = diag(sigma2 / S + D).
Projection build_projection(const OrthogonalBasis& basis, const NoiseModel& noise);

/// T = (H^T Sigma^{-1} H)^{-1} H^T Sigma^{-1} and SigmaT = (H^T Sigma^{-1} H)^{-1}, dense.
Projection build_general_projection(const GeneralBasis& basis, const Matrix& Sigma);

/// T Y for a fully observed dataset.
Matrix project(const Projection& proj, const Dataset& data);

/// Groups columns with identical observed-output sets. Blocks are ordered by
/// first column; columns inside a block stay in ascending order. Columns
/// with nothing observed form a block with an empty observed set.
std::vector<Block> partition_blocks(const Dataset& data);

struct BlockProjection {
    Matrix values;
    Projection projection;
};

/// Projection of a block that observes the outputs in `observed`, with the
/// projected noise replaced by its diagonal. `y_block` is either p x n_b
/// (unobserved rows ignored) or |observed| x n_b.
BlockProjection project_block(const OrthogonalBasis& basis, const NoiseModel& noise,
                              std::span<const long> observed, const Matrix& y_block);

struct DiagApproxError {
    double eps_rel = 0.0;
    /// (S_max / S_min) * lambda_max(U_m^T U_m). Not a guaranteed upper bound
    /// on eps_rel: it can be exceeded once three or more latents are mixed.
    double bound = 0.0;
    /// (S_max / S_min) * m (a - b) / (a + (m - 1) b), where a and b are the
    /// extreme eigenvalues of (U_o^T U_o)^{-1}. Always bounds eps_rel.
    double certified_bound = 0.0;
};

/// Relative operator-norm error of the diagonal approximation of the
/// missing-data projected noise, together with two a-priori bounds.
DiagApproxError diag_approx_error(const OrthogonalBasis& basis, const NoiseModel& noise,
                                  std::span<const long> observed);

/// U = U_1 (x) ... (x) U_q, S = S_1 (x) ... (x) S_q.
OrthogonalBasis kron_basis(std::span<const OrthogonalBasis> parts);

/// Top-m eigenpairs of a symmetric PSD matrix, descending.
OrthogonalBasis basis_from_kernel_matrix(const Matrix& K, long m);

/// basis_from_kernel_matrix(Y Y^T / n, m) for fully observed data.
OrthogonalBasis basis_from_data(const Dataset& data, long m);

/// H = diag(sqrt(v)) U S^{1/2}. With Sigma = sigma2 diag(v) the projection
/// is T = S^{-1/2} U^T diag(v)^{-1/2} and SigmaT = sigma2 S^{-1}.
struct WhitenedBasis {
    GeneralBasis general;
    OrthogonalBasis inner;
    Vector scale;

    Projection projection(double sigma2) const;
    Matrix Sigma(double sigma2) const;
};

WhitenedBasis whiten_basis(const Vector& variances, const OrthogonalBasis& basis);
/// Same, taking the variances from noise.heterogeneous; requires D = 0.
WhitenedBasis whiten_basis(const NoiseModel& noise, const OrthogonalBasis& basis);

struct DecouplingCheck {
    bool decoupled = false;
    double off_diagonal = 0.0;
};

/// Whether (H^T Sigma^{-1} H)^{-1} is diagonal: off-diagonal Frobenius norm
/// below 1e-10 relative to the norm of the diagonal.
DecouplingCheck check_decoupling(const GeneralBasis& basis, const Matrix& Sigma);

}  // namespace oilmm
