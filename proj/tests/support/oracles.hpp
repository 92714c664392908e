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

// Test-side ground truth. Nothing here calls into the library's numerical
// paths: densities use LU determinants and explicit solves, kernels use
// their closed forms, and generators are hand-rolled on std::mt19937_64.

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "oilmm/kernels.hpp"
#include "oilmm/mixing.hpp"
#include "oilmm/model.hpp"

namespace oracles {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double normal() { return normal_(gen_); }
    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
    long integer(long lo, long hi) { return std::uniform_int_distribution<long>(lo, hi)(gen_); }
    bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }
    Matrix normal_matrix(long r, long c);
    Vector normal_vector(long n);
    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
    std::normal_distribution<double> normal_;
};

/// Haar-distributed p x m matrix with orthonormal columns.
Matrix haar(long p, long m, Rng& rng);

/// Well-conditioned symmetric positive-definite matrix.
Matrix random_spd(long n, Rng& rng, double floor = 0.1);

/// Random leaf or small composite kernel with parameters in sane ranges.
oilmm::KernelSpec random_kernel(Rng& rng, bool allow_composite = true);

/// Closed-form kernel value, written independently of the library.
double kernel_value(const oilmm::KernelSpec& spec, double a, double b);
Matrix kernel_matrix(const oilmm::KernelSpec& spec, const Vector& a, const Vector& b);

struct Instance {
    oilmm::OilmmModel model;
    oilmm::Dataset data;
};

struct InstanceShape {
    long p_max = 6;
    long m_max = 3;
    long n_max = 6;
    bool with_D = true;
    bool distinct_times = true;
};

/// Random OILMM with mixed kernels and data drawn iid normal.
Instance random_instance(Rng& rng, InstanceShape shape = {});

Vector sorted_times(long n, Rng& rng, double lo = 0.0, double hi = 5.0);

/// log N(y | mu, C) through an LU factorization.
double gaussian_logpdf(const Vector& y, const Vector& mu, const Matrix& c);

/// KL(N(mu0, c0) || N(mu1, c1)).
double gaussian_kl(const Vector& mu0, const Matrix& c0, const Vector& mu1, const Matrix& c1);

struct Conditional {
    Vector mean;
    Matrix cov;
};

/// Joint Gaussian conditioning by explicit linear solves.
Conditional condition_gaussian(const Matrix& kff, const Matrix& kfy, const Matrix& kyy, const Vector& y);

/// The full joint covariance of vec(Y) (time-major), built from H, Sigma
/// and the latent kernels with the oracle kernel formulas.
Matrix ilmm_joint_covariance(const Matrix& h, const Matrix& sigma, const std::vector<oilmm::KernelSpec>& kernels,
                             const Vector& times);

/// Nelder-Mead on f starting at x0.
Vector nelder_mead(const std::function<double(const Vector&)>& f, Vector x0, double step = 0.5,
                   int max_evals = 20000, double tol = 1e-14);

/// Column partition by exhaustive pairwise comparison of mask columns.
std::vector<std::vector<long>> brute_force_groups(const oilmm::BoolMatrix& mask);

/// Mean and variance of a sample.
struct Moments {
    double mean;
    double variance;
};
Moments moments(const std::vector<double>& xs);

double rel_err(double a, double b);

}  // namespace oracles
