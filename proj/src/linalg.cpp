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

#include "oilmm/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "oilmm/errors.hpp"

namespace oilmm {

double Cholesky::log_det() const {
    return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Cholesky cholesky_exact(const Matrix& a) {
    Cholesky out;
    out.llt.compute(a);
    if (out.llt.info() != Eigen::Success) {
        throw ConditioningError("Cholesky factorization failed for a " + std::to_string(a.rows()) +
                                "x" + std::to_string(a.cols()) + " matrix");
    }
    return out;
}

Cholesky cholesky_with_jitter(const Matrix& a) {
    Cholesky out;
    out.llt.compute(a);
    if (out.llt.info() == Eigen::Success) return out;

    const long n = a.rows();
    double scale = n > 0 ? a.diagonal().mean() : 1.0;
    if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;

    Matrix work = a;
    for (double rel = kJitterStart; rel <= kJitterMax * (1.0 + 1e-9); rel *= 10.0) {
        const double jitter = rel * scale;
        work.diagonal() = a.diagonal().array() + jitter;
        out.llt.compute(work);
        if (out.llt.info() == Eigen::Success) {
            out.jitter = jitter;
            return out;
        }
    }
    throw ConditioningError("Cholesky factorization failed after maximum jitter (" +
                            std::to_string(kJitterMax) + " x mean diagonal) for a " +
                            std::to_string(n) + "x" + std::to_string(n) + " matrix");
}

double gaussian_logpdf(const Vector& y, const Cholesky& chol) {
    const Vector z = chol.lower().solve(y);
    return -0.5 * (static_cast<double>(y.size()) * kLog2Pi + chol.log_det() + z.squaredNorm());
}

double gaussian_logpdf(const Vector& y, const Vector& mean, const Matrix& cov) {
    return gaussian_logpdf(Vector(y - mean), cholesky_exact(cov));
}

Matrix kron(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (long i = 0; i < a.rows(); ++i)
        for (long j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Vector kron(const Vector& a, const Vector& b) {
    Vector out(a.size() * b.size());
    for (long i = 0; i < a.size(); ++i) out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

double symmetric_op_norm(const Matrix& a) {
    if (a.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

Vector principal_angles(const Matrix& a, const Matrix& b) {
    const Matrix qa = Eigen::HouseholderQR<Matrix>(a).householderQ() * Matrix::Identity(a.rows(), a.cols());
    const Matrix qb = Eigen::HouseholderQR<Matrix>(b).householderQ() * Matrix::Identity(b.rows(), b.cols());
    Eigen::JacobiSVD<Matrix> svd(qa.transpose() * qb);
    Vector cosines = svd.singularValues().cwiseMin(1.0);
    Vector angles = cosines.array().acos();
    std::sort(angles.data(), angles.data() + angles.size());
    return angles;
}

void canonicalize_column_signs(Matrix& u) {
    for (long j = 0; j < u.cols(); ++j) {
        long best = 0;
        for (long i = 1; i < u.rows(); ++i)
            if (std::abs(u(i, j)) > std::abs(u(best, j))) best = i;
        if (u.rows() > 0 && u(best, j) < 0.0) u.col(j) = -u.col(j);
    }
}

}  // namespace oilmm
