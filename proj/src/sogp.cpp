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

#include "oilmm/sogp.hpp"

#include <cmath>
#include <random>

#include "oilmm/errors.hpp"

namespace oilmm {

namespace {

Matrix noisy_gram(const KernelSpec& spec, const LatentObservations& obs) {
    Matrix c = cross_kernel_matrix(spec, obs.times, obs.times);
    c.diagonal() += obs.noise;
    return c;
}

Vector prior_diagonal(const KernelSpec& spec, const Vector& query) {
    Vector d(query.size());
    for (long i = 0; i < query.size(); ++i) d(i) = eval_kernel(spec, query(i), query(i));
    return d;
}

void check_inputs(const KernelSpec& spec, const LatentObservations& obs, const Vector& query) {
    validate(spec);
    obs.validate();
    for (long i = 0; i < query.size(); ++i)
        if (!std::isfinite(query(i))) throw ContractError("non-finite query time");
}

// Posterior covariance at the query times, plus the posterior mean.
void posterior_moments(const KernelSpec& spec, const LatentObservations& obs, const Vector& query,
                       Vector& mean, Matrix& cov) {
    cov = cross_kernel_matrix(spec, query, query);
    if (obs.size() == 0) {
        mean = Vector::Zero(query.size());
        return;
    }
    const Cholesky chol = cholesky_with_jitter(noisy_gram(spec, obs));
    const Matrix cross = cross_kernel_matrix(spec, obs.times, query);
    mean = cross.transpose() * chol.solve(obs.values);
    const Matrix v = chol.lower().solve(cross);
    cov.noalias() -= v.transpose() * v;
}

}  // namespace

LatentObservations LatentObservations::homoscedastic(Vector times, Vector values, double noise_variance) {
    LatentObservations obs;
    obs.noise = Vector::Constant(times.size(), noise_variance);
    obs.times = std::move(times);
    obs.values = std::move(values);
    return obs;
}

void LatentObservations::validate() const {
    if (times.size() != values.size() || times.size() != noise.size())
        throw ContractError("latent observations: times, values and noise lengths differ");
    for (long i = 0; i < noise.size(); ++i)
        if (!(noise(i) > 0.0) || !std::isfinite(noise(i)))
            throw ContractError("latent observations: noise variance must be positive");
    for (long i = 0; i < times.size(); ++i)
        if (!std::isfinite(times(i)) || !std::isfinite(values(i)))
            throw ContractError("latent observations: non-finite time or value");
}

LatentPosterior ExactLatentSolver::condition(const KernelSpec& spec, const LatentObservations& obs,
                                             const Vector& query) const {
    check_inputs(spec, obs, query);
    LatentPosterior post;
    post.variance = prior_diagonal(spec, query);
    if (obs.size() == 0) {
        post.mean = Vector::Zero(query.size());
        return post;
    }
    const Cholesky chol = cholesky_with_jitter(noisy_gram(spec, obs));
    const Matrix cross = cross_kernel_matrix(spec, obs.times, query);
    const Vector alpha = chol.solve(obs.values);
    post.mean = cross.transpose() * alpha;
    const Matrix v = chol.lower().solve(cross);
    post.variance -= v.colwise().squaredNorm().transpose();
    for (long i = 0; i < post.variance.size(); ++i) {
        if (post.variance(i) < 0.0) {
            post.variance(i) = 0.0;
            ++post.clamped;
        }
    }
    post.lml = gaussian_logpdf(obs.values, chol);
    return post;
}

double ExactLatentSolver::log_marginal(const KernelSpec& spec, const LatentObservations& obs) const {
    validate(spec);
    obs.validate();
    if (obs.size() == 0) return 0.0;
    return gaussian_logpdf(obs.values, cholesky_with_jitter(noisy_gram(spec, obs)));
}

Vector ExactLatentSolver::sample_posterior(const KernelSpec& spec, const LatentObservations& obs,
                                           const Vector& query, std::uint64_t seed) const {
    check_inputs(spec, obs, query);
    Vector mean;
    Matrix cov;
    posterior_moments(spec, obs, query, mean, cov);
    const Vector z = standard_normals(seed, query.size());
    try {
        const Cholesky chol = cholesky_with_jitter(cov);
        return mean + chol.lower() * z;
    } catch (const ConditioningError&) {
        // Numerically indefinite posterior covariance; fall back to a
        // clamped symmetric square root.
        Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
        const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
        return mean + es.eigenvectors() * root.asDiagonal() * z;
    }
}

const LatentSolver& exact_solver() {
    static const ExactLatentSolver solver;
    return solver;
}

LatentLmlGradient log_marginal_gradient(const KernelSpec& spec, const LatentObservations& obs) {
    validate(spec);
    obs.validate();
    LatentLmlGradient out;
    const long n = obs.size();
    const std::size_t np = num_params(spec);
    out.kernel = Vector::Zero(static_cast<long>(np));
    out.noise = Vector::Zero(n);
    out.values = Vector::Zero(n);
    if (n == 0) return out;

    const Cholesky chol = cholesky_with_jitter(noisy_gram(spec, obs));
    const Vector alpha = chol.solve(obs.values);
    out.lml = gaussian_logpdf(obs.values, chol);
    out.values = -alpha;

    // W = alpha alpha^T - C^{-1}; d lml = 1/2 tr(W dC).
    Matrix w = -chol.solve(Matrix(Matrix::Identity(n, n)));
    w.noalias() += alpha * alpha.transpose();
    out.noise = 0.5 * w.diagonal();

    const std::vector<Matrix> grads = kernel_matrix_log_grads(spec, obs.times);
    for (std::size_t q = 0; q < np; ++q)
        out.kernel(static_cast<long>(q)) = 0.5 * w.cwiseProduct(grads[q]).sum();
    return out;
}

Vector standard_normals(std::uint64_t seed, long count) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector z(count);
    for (long i = 0; i < count; ++i) z(i) = normal(gen);
    return z;
}

}  // namespace oilmm
