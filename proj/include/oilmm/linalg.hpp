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

#include <Eigen/Dense>

namespace oilmm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Jitter escalation bounds, relative to the mean diagonal.
inline constexpr double kJitterStart = 1e-10;
inline constexpr double kJitterMax = 1e-4;

/// Cholesky factor of a symmetric positive-definite matrix, with the
/// diagonal jitter that had to be added to obtain it.
struct Cholesky {
    Eigen::LLT<Matrix> llt;
    double jitter = 0.0;

    double log_det() const;
    Vector solve(const Vector& b) const { return llt.solve(b); }
    Matrix solve(const Matrix& b) const { return llt.solve(b); }
    const Eigen::TriangularView<const Matrix, Eigen::Lower> lower() const {
        return llt.matrixL();
    }
};

/// Factorizes `a`, first without jitter, then with jitter escalating by a
/// factor 10 from 1e-10 to 1e-4 times the mean diagonal. Throws
/// ConditioningError when every attempt fails.
Cholesky cholesky_with_jitter(const Matrix& a);

/// Plain Cholesky; throws ConditioningError on failure.
Cholesky cholesky_exact(const Matrix& a);

/// log N(y | 0, C) given a factorization of C.
double gaussian_logpdf(const Vector& y, const Cholesky& chol);

/// log N(y | mean, C), factorizing C without jitter.
double gaussian_logpdf(const Vector& y, const Vector& mean, const Matrix& cov);

Matrix kron(const Matrix& a, const Matrix& b);
Vector kron(const Vector& a, const Vector& b);

/// Spectral norm of a symmetric matrix.
double symmetric_op_norm(const Matrix& a);

/// Principal angles (radians, ascending) between col(a) and col(b).
Vector principal_angles(const Matrix& a, const Matrix& b);

/// Flips column signs so that the largest-magnitude entry of every column
/// is positive; ties go to the lowest row index.
void canonicalize_column_signs(Matrix& u);

}  // namespace oilmm
