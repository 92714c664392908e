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

#include "oilmm/mixing.hpp"

#include <cmath>
#include <map>
#include <string>

#include "oilmm/errors.hpp"

namespace oilmm {

namespace {

constexpr double kOrthonormalTol = 1e-10;
constexpr double kRankTol = 1e-10;

Matrix select_rows(const Matrix& a, std::span<const long> rows) {
    Matrix out(static_cast<long>(rows.size()), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<long>(i)) = a.row(rows[i]);
    return out;
}

void check_rank(const Matrix& h) {
    if (h.cols() == 0 || h.cols() > h.rows())
        throw RankError("basis must be p x m with 1 <= m <= p, got " + std::to_string(h.rows()) + "x" +
                        std::to_string(h.cols()));
    Eigen::ColPivHouseholderQR<Matrix> qr(h);
    qr.setThreshold(kRankTol);
    if (qr.rank() < h.cols())
        throw RankError("basis columns are linearly dependent (rank " + std::to_string(qr.rank()) +
                        " < " + std::to_string(h.cols()) + ")");
}

}  // namespace

OrthogonalBasis OrthogonalBasis::create(Matrix U, Vector S) {
    if (U.cols() == 0) throw ContractError("orthogonal basis needs m >= 1");
    if (U.cols() > U.rows())
        throw ContractError("orthogonal basis needs m <= p, got m=" + std::to_string(U.cols()) +
                            ", p=" + std::to_string(U.rows()));
    if (S.size() != U.cols()) throw ContractError("orthogonal basis: S must have m entries");
    for (long i = 0; i < S.size(); ++i)
        if (!(S(i) > 0.0) || !std::isfinite(S(i)))
            throw ParameterDomainError("orthogonal basis: S entries must be positive");
    const double err = (U.transpose() * U - Matrix::Identity(U.cols(), U.cols())).norm();
    if (!(err <= kOrthonormalTol))
        throw ContractError("orthogonal basis: U^T U deviates from identity by " + std::to_string(err));
    return OrthogonalBasis{std::move(U), std::move(S)};
}

GeneralBasis GeneralBasis::create(Matrix H) {
    check_rank(H);
    return GeneralBasis{std::move(H)};
}

NoiseModel NoiseModel::isotropic(double sigma2, long m) {
    NoiseModel noise;
    noise.sigma2 = sigma2;
    noise.D = Vector::Zero(m);
    return noise;
}

void NoiseModel::validate(long p, long m) const {
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
        throw ParameterDomainError("noise: sigma2 must be positive, got " + std::to_string(sigma2));
    if (D.size() != m) throw ContractError("noise: D must have m entries");
    for (long i = 0; i < D.size(); ++i)
        if (!(D(i) >= 0.0) || !std::isfinite(D(i)))
            throw ParameterDomainError("noise: D entries must be nonnegative");
    if (heterogeneous) {
        if (heterogeneous->size() != p)
            throw ContractError("noise: heterogeneous variances must have p entries");
        for (long i = 0; i < p; ++i)
            if (!((*heterogeneous)(i) > 0.0))
                throw ParameterDomainError("noise: heterogeneous variances must be positive");
        if (has_D()) throw ContractError("noise: heterogeneous output variances require D = 0");
    }
}

Matrix noise_covariance(const OrthogonalBasis& basis, const NoiseModel& noise) {
    noise.validate(basis.p(), basis.m());
    if (noise.heterogeneous) return noise.sigma2 * Matrix(noise.heterogeneous->asDiagonal());
    const Matrix h = basis.H();
    Matrix sigma = h * noise.D.asDiagonal() * h.transpose();
    sigma.diagonal().array() += noise.sigma2;
    return sigma;
}

Dataset Dataset::from_matrix(Vector times, Matrix Y) {
    Dataset d;
    d.mask = Y.array().isFinite();
    d.times = std::move(times);
    d.Y = std::move(Y);
    d.validate();
    return d;
}

void Dataset::validate() const {
    if (times.size() != Y.cols())
        throw ContractError("dataset: " + std::to_string(times.size()) + " time stamps for " +
                            std::to_string(Y.cols()) + " columns");
    if (mask.rows() != Y.rows() || mask.cols() != Y.cols())
        throw ContractError("dataset: mask shape does not match Y");
    for (long j = 0; j < times.size(); ++j)
        if (!std::isfinite(times(j))) throw ContractError("dataset: non-finite time stamp");
    for (long j = 0; j < Y.cols(); ++j)
        for (long i = 0; i < Y.rows(); ++i)
            if (mask(i, j) && !std::isfinite(Y(i, j)))
                throw ContractError("dataset: observed entry is not finite");
}

Dataset Dataset::select_columns(std::span<const long> cols) const {
    Dataset out;
    const long k = static_cast<long>(cols.size());
    out.times.resize(k);
    out.Y.resize(p(), k);
    out.mask.resize(p(), k);
    for (long j = 0; j < k; ++j) {
        out.times(j) = times(cols[static_cast<std::size_t>(j)]);
        out.Y.col(j) = Y.col(cols[static_cast<std::size_t>(j)]);
        out.mask.col(j) = mask.col(cols[static_cast<std::size_t>(j)]);
    }
    return out;
}

Projection build_projection(const OrthogonalBasis& basis, const NoiseModel& noise) {
    noise.validate(basis.p(), basis.m());
    if (noise.heterogeneous)
        throw ContractError("build_projection: heterogeneous noise needs whiten_basis");
    Projection proj;
    const Vector inv_sqrt_s = basis.S.cwiseSqrt().cwiseInverse();
    proj.T = inv_sqrt_s.asDiagonal() * basis.U.transpose();
    proj.SigmaT = (noise.sigma2 * basis.S.cwiseInverse() + noise.D).asDiagonal();
    proj.diagonal = true;
    proj.log_det_S = basis.S.array().log().sum();
    proj.observed.resize(static_cast<std::size_t>(basis.p()));
    for (long i = 0; i < basis.p(); ++i) proj.observed[static_cast<std::size_t>(i)] = i;
    return proj;
}

Projection build_general_projection(const GeneralBasis& basis, const Matrix& Sigma) {
    check_rank(basis.H);
    if (Sigma.rows() != basis.p() || Sigma.cols() != basis.p())
        throw ContractError("build_general_projection: Sigma must be p x p");
    const Cholesky sigma_chol = cholesky_exact(Sigma);
    const Matrix b = sigma_chol.solve(basis.H);  // Sigma^{-1} H
    const Matrix precision = basis.H.transpose() * b;
    Eigen::LLT<Matrix> llt(precision);
    if (llt.info() != Eigen::Success) throw RankError("H^T Sigma^{-1} H is singular");
    Projection proj;
    proj.SigmaT = llt.solve(Matrix::Identity(basis.m(), basis.m()));
    proj.SigmaT = 0.5 * (proj.SigmaT + proj.SigmaT.transpose()).eval();
    proj.T = llt.solve(b.transpose());
    proj.diagonal = false;
    proj.observed.resize(static_cast<std::size_t>(basis.p()));
    for (long i = 0; i < basis.p(); ++i) proj.observed[static_cast<std::size_t>(i)] = i;
    return proj;
}

Matrix project(const Projection& proj, const Dataset& data) {
    if (data.p() != proj.T.cols())
        throw ContractError("project: dataset has " + std::to_string(data.p()) +
                            " outputs, projection expects " + std::to_string(proj.T.cols()));
    if (!data.fully_observed())
        throw ContractError("project: dataset has missing entries; use partition_blocks/project_block");
    return proj.T * data.Y;
}

std::vector<Block> partition_blocks(const Dataset& data) {
    std::vector<Block> blocks;
    std::map<std::vector<bool>, std::size_t> index;
    for (long j = 0; j < data.n(); ++j) {
        std::vector<bool> key(static_cast<std::size_t>(data.p()));
        for (long i = 0; i < data.p(); ++i) key[static_cast<std::size_t>(i)] = data.mask(i, j);
        auto [it, inserted] = index.try_emplace(key, blocks.size());
        if (inserted) {
            Block b;
            for (long i = 0; i < data.p(); ++i)
                if (data.mask(i, j)) b.observed.push_back(i);
            blocks.push_back(std::move(b));
        }
        blocks[it->second].columns.push_back(j);
    }
    return blocks;
}

BlockProjection project_block(const OrthogonalBasis& basis, const NoiseModel& noise,
                              std::span<const long> observed, const Matrix& y_block) {
    noise.validate(basis.p(), basis.m());
    const long p = basis.p();
    const long m = basis.m();
    const long po = static_cast<long>(observed.size());
    for (std::size_t k = 0; k < observed.size(); ++k) {
        if (observed[k] < 0 || observed[k] >= p) throw ContractError("project_block: output index out of range");
        if (k > 0 && observed[k] <= observed[k - 1])
            throw ContractError("project_block: observed outputs must be strictly increasing");
    }
    if (y_block.rows() != p && y_block.rows() != po)
        throw ContractError("project_block: block must have p or |observed| rows");
    if (po < m)
        throw InsufficientObservabilityError("project_block: " + std::to_string(po) +
                                             " observed outputs for " + std::to_string(m) +
                                             " latent processes");

    BlockProjection out;
    if (po == p) {
        out.projection = build_projection(basis, noise);
        out.values = out.projection.T * y_block;
        return out;
    }

    const Matrix yo = y_block.rows() == po ? y_block : select_rows(y_block, observed);
    const Matrix uo = select_rows(basis.U, observed);
    Eigen::LLT<Matrix> gram(uo.transpose() * uo);
    if (gram.info() != Eigen::Success)
        throw InsufficientObservabilityError("project_block: U_o^T U_o is singular");
    const Matrix gram_inv = gram.solve(Matrix::Identity(m, m));
    const Vector inv_sqrt_s = basis.S.cwiseSqrt().cwiseInverse();

    Projection& proj = out.projection;
    proj.T = inv_sqrt_s.asDiagonal() * gram.solve(uo.transpose());
    proj.SigmaT_dense = noise.sigma2 * inv_sqrt_s.asDiagonal() * gram_inv * inv_sqrt_s.asDiagonal();
    proj.SigmaT_dense.diagonal() += noise.D;
    proj.SigmaT = proj.SigmaT_dense.diagonal().asDiagonal();
    proj.diagonal = true;
    proj.log_det_S = basis.S.array().log().sum();
    proj.log_det_gram = 2.0 * Matrix(gram.matrixL()).diagonal().array().log().sum();
    proj.observed.assign(observed.begin(), observed.end());
    out.values = proj.T * yo;
    return out;
}

DiagApproxError diag_approx_error(const OrthogonalBasis& basis, const NoiseModel& noise,
                                  std::span<const long> observed) {
    const long p = basis.p();
    DiagApproxError out;
    std::vector<bool> seen(static_cast<std::size_t>(p), false);
    for (long i : observed) seen[static_cast<std::size_t>(i)] = true;
    std::vector<long> missing;
    for (long i = 0; i < p; ++i)
        if (!seen[static_cast<std::size_t>(i)]) missing.push_back(i);

    const BlockProjection bp = project_block(basis, noise, observed, Matrix(p, 0));
    if (!missing.empty()) {
        const Matrix& dense = bp.projection.SigmaT_dense;
        const Matrix diag = dense.diagonal().asDiagonal();
        out.eps_rel = symmetric_op_norm(dense - diag) / symmetric_op_norm(diag);
        const Matrix um = select_rows(basis.U, missing);
        const double lambda_max = symmetric_op_norm(um.transpose() * um);
        const double ratio = basis.S.maxCoeff() / basis.S.minCoeff();
        out.bound = ratio * lambda_max;
        const Matrix uo = select_rows(basis.U, observed);
        const Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(uo.transpose() * uo), Eigen::EigenvaluesOnly);
        // Eigenvalues of the inverse Gram: a = 1 / min, b = 1 / max.
        const double a = 1.0 / es.eigenvalues().minCoeff();
        const double b = 1.0 / es.eigenvalues().maxCoeff();
        const double m = static_cast<double>(basis.m());
        out.certified_bound = ratio * m * (a - b) / (a + (m - 1.0) * b);
    }
    return out;
}

OrthogonalBasis kron_basis(std::span<const OrthogonalBasis> parts) {
    if (parts.empty()) throw ContractError("kron_basis: empty factor list");
    Matrix u = parts.front().U;
    Vector s = parts.front().S;
    for (std::size_t i = 1; i < parts.size(); ++i) {
        u = kron(u, parts[i].U);
        s = kron(s, parts[i].S);
    }
    return OrthogonalBasis::create(std::move(u), std::move(s));
}

OrthogonalBasis basis_from_kernel_matrix(const Matrix& K, long m) {
    const long p = K.rows();
    if (K.cols() != p) throw ContractError("basis_from_kernel_matrix: matrix must be square");
    if (m < 1 || m > p)
        throw ContractError("basis_from_kernel_matrix: need 1 <= m <= p, got m=" + std::to_string(m));
    const double scale = K.cwiseAbs().maxCoeff();
    if ((K - K.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(scale, 1e-300))
        throw ContractError("basis_from_kernel_matrix: matrix is not symmetric");

    Eigen::SelfAdjointEigenSolver<Matrix> es(K);
    if (es.info() != Eigen::Success) throw ConditioningError("eigendecomposition failed");
    const Vector& evals = es.eigenvalues();  // ascending
    const double largest = evals(p - 1);
    const double mth = evals(p - m);
    if (!(largest > 0.0) || !(mth > kEigenFloor * largest))
        throw TruncationRankError("basis_from_kernel_matrix: eigenvalue " + std::to_string(m) + " (" +
                                  std::to_string(mth) + ") is below the floor " +
                                  std::to_string(kEigenFloor * largest));
    Matrix u(p, m);
    Vector s(m);
    for (long j = 0; j < m; ++j) {
        u.col(j) = es.eigenvectors().col(p - 1 - j);
        s(j) = evals(p - 1 - j);
    }
    canonicalize_column_signs(u);
    return OrthogonalBasis{std::move(u), std::move(s)};
}

OrthogonalBasis basis_from_data(const Dataset& data, long m) {
    data.validate();
    if (!data.fully_observed())
        throw ContractError("basis_from_data: initialisation needs fully observed columns");
    if (data.n() == 0) throw ContractError("basis_from_data: dataset is empty");
    const Matrix cov = data.Y * data.Y.transpose() / static_cast<double>(data.n());
    return basis_from_kernel_matrix(0.5 * (cov + cov.transpose()), m);
}

Projection WhitenedBasis::projection(double sigma2) const {
    Projection proj;
    const Vector inv_sqrt_s = inner.S.cwiseSqrt().cwiseInverse();
    proj.T = inv_sqrt_s.asDiagonal() * inner.U.transpose() * scale.cwiseInverse().asDiagonal();
    proj.SigmaT = (sigma2 * inner.S.cwiseInverse()).asDiagonal();
    proj.diagonal = true;
    proj.log_det_S = inner.S.array().log().sum();
    proj.observed.resize(static_cast<std::size_t>(inner.p()));
    for (long i = 0; i < inner.p(); ++i) proj.observed[static_cast<std::size_t>(i)] = i;
    return proj;
}

Matrix WhitenedBasis::Sigma(double sigma2) const {
    return sigma2 * Matrix(scale.cwiseAbs2().asDiagonal());
}

WhitenedBasis whiten_basis(const Vector& variances, const OrthogonalBasis& basis) {
    if (variances.size() != basis.p()) throw ContractError("whiten_basis: need p variances");
    for (long i = 0; i < variances.size(); ++i)
        if (!(variances(i) > 0.0)) throw ParameterDomainError("whiten_basis: variances must be positive");
    WhitenedBasis out;
    out.inner = basis;
    out.scale = variances.cwiseSqrt();
    out.general = GeneralBasis{out.scale.asDiagonal() * basis.H()};
    return out;
}

WhitenedBasis whiten_basis(const NoiseModel& noise, const OrthogonalBasis& basis) {
    if (noise.has_D()) throw ContractError("whiten_basis: requires D = 0");
    if (!noise.heterogeneous) throw ContractError("whiten_basis: noise has no per-output variances");
    return whiten_basis(*noise.heterogeneous, basis);
}

DecouplingCheck check_decoupling(const GeneralBasis& basis, const Matrix& Sigma) {
    const Projection proj = build_general_projection(basis, Sigma);
    const Vector diag = proj.SigmaT.diagonal();
    Matrix off = proj.SigmaT;
    off.diagonal().setZero();
    DecouplingCheck out;
    out.off_diagonal = off.norm();
    out.decoupled = out.off_diagonal < 1e-10 * diag.norm();
    return out;
}

}  // namespace oilmm
