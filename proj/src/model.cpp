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

#include "oilmm/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "oilmm/errors.hpp"

namespace oilmm {

namespace {

// Noise seen by the orthogonal part once heterogeneous output variances have
// been whitened away.
NoiseModel inner_noise(const NoiseModel& noise) {
    NoiseModel out;
    out.sigma2 = noise.sigma2;
    out.D = noise.D;
    return out;
}

// Rows of Y divided by the square roots of the per-output variances.
Matrix whiten(const Matrix& y, const NoiseModel& noise) {
    if (!noise.heterogeneous) return y;
    return noise.heterogeneous->cwiseSqrt().cwiseInverse().asDiagonal() * y;
}

LatentObservations latent_observations(const ProjectedData& pd, long i) {
    LatentObservations obs;
    obs.times = pd.times;
    obs.values = pd.values.row(i).transpose();
    obs.noise = pd.noise.row(i).transpose();
    return obs;
}

void check_dataset(const OilmmModel& model, const Dataset& data) {
    data.validate();
    if (data.p() != model.p())
        throw ContractError("dataset has " + std::to_string(data.p()) + " outputs, model has " +
                            std::to_string(model.p()));
}

// Rescales reconstructed outputs back from the whitened space.
void unwhiten(const NoiseModel& noise, Matrix& mean, Matrix* variance) {
    if (!noise.heterogeneous) return;
    const Vector& v = *noise.heterogeneous;
    mean = v.cwiseSqrt().asDiagonal() * mean;
    if (variance) *variance = v.asDiagonal() * *variance;
}

void validate_kernel_unit(const KernelSpec& k) {
    validate(k);
    const double k0 = eval_kernel(k, 0.0, 0.0);
    if (std::abs(k0 - 1.0) > 1e-9)
        throw ContractError("model: latent kernel must satisfy k(t, t) = 1, got " + std::to_string(k0) +
                            " for " + render_kernel_spec(k));
}

}  // namespace

OilmmModel OilmmModel::create(OrthogonalBasis basis, NoiseModel noise, std::vector<KernelSpec> kernels) {
    OilmmModel model;
    model.basis = OrthogonalBasis::create(std::move(basis.U), std::move(basis.S));
    model.noise = std::move(noise);
    model.latent_kernels.reserve(kernels.size());
    for (const auto& k : kernels) model.latent_kernels.push_back(normalize_unit_variance(k));
    model.validate();
    return model;
}

void OilmmModel::validate() const {
    if (static_cast<long>(latent_kernels.size()) != m())
        throw ContractError("model: " + std::to_string(latent_kernels.size()) + " latent kernels for m=" +
                            std::to_string(m()));
    noise.validate(p(), m());
    for (const auto& k : latent_kernels) validate_kernel_unit(k);
}

ProjectedData project_dataset(const OilmmModel& model, const Dataset& data, ProjectOptions opts) {
    check_dataset(model, data);
    const OrthogonalBasis& basis = model.basis;
    const NoiseModel noise = inner_noise(model.noise);
    const long p = model.p();
    const long m = model.m();
    const double sigma2 = noise.sigma2;
    const double log_det_s = basis.S.array().log().sum();
    const double log_2pi_sigma2 = kLog2Pi + std::log(sigma2);

    ProjectedData pd;
    double jacobian = 0.0;  // log-determinant of the whitening map
    const Matrix y = whiten(data.Y, model.noise);

    if (data.fully_observed() && !opts.force_block_path) {
        const long n = data.n();
        const Projection proj = build_projection(basis, noise);
        pd.times = data.times;
        pd.values = proj.T * y;
        pd.noise = proj.sigma_diagonal().replicate(1, n);
        pd.gram_diag = Matrix::Ones(m, n);
        const Matrix uty = basis.U.transpose() * y;
        pd.residual_energy = y.squaredNorm() - uty.squaredNorm();
        pd.residual_dof = static_cast<double>(n * (p - m));
        pd.regulariser = -0.5 * static_cast<double>(n) * log_det_s -
                         0.5 * pd.residual_dof * log_2pi_sigma2 - pd.residual_energy / (2.0 * sigma2);
        pd.noise_lost = 0.5 * static_cast<double>(n) * (static_cast<double>(p - m) * std::log(sigma2) + log_det_s);
        pd.blocks.push_back(BlockDiagnostic{n, p, 0.0, 0.0, 0.0});
        if (model.noise.heterogeneous)
            jacobian = -0.5 * static_cast<double>(n) * model.noise.heterogeneous->array().log().sum();
    } else {
        std::vector<long> kept;
        std::vector<Block> blocks = partition_blocks(data);
        for (const auto& b : blocks) {
            if (b.observed.empty())
                pd.dropped_columns.insert(pd.dropped_columns.end(), b.columns.begin(), b.columns.end());
        }
        // Retained columns keep their original order.
        std::vector<long> position(static_cast<std::size_t>(data.n()), -1);
        for (long j = 0; j < data.n(); ++j) {
            if (data.mask.col(j).any()) {
                position[static_cast<std::size_t>(j)] = static_cast<long>(kept.size());
                kept.push_back(j);
            }
        }
        const long nk = static_cast<long>(kept.size());
        pd.times.resize(nk);
        for (long j = 0; j < nk; ++j) pd.times(j) = data.times(kept[static_cast<std::size_t>(j)]);
        pd.values.resize(m, nk);
        pd.noise.resize(m, nk);
        pd.gram_diag.resize(m, nk);

        for (const auto& b : blocks) {
            if (b.observed.empty()) continue;
            const long nb = static_cast<long>(b.columns.size());
            const long po = static_cast<long>(b.observed.size());
            Matrix yo(po, nb);
            for (long c = 0; c < nb; ++c)
                for (long r = 0; r < po; ++r)
                    yo(r, c) = y(b.observed[static_cast<std::size_t>(r)], b.columns[static_cast<std::size_t>(c)]);

            const BlockProjection bp = project_block(basis, noise, b.observed, yo);
            const Projection& proj = bp.projection;
            Vector gdiag;
            double energy;
            if (po == p) {
                gdiag = Vector::Ones(m);
                energy = yo.squaredNorm() - (basis.U.transpose() * yo).squaredNorm();
            } else {
                gdiag = (proj.SigmaT_dense.diagonal() - noise.D).cwiseProduct(basis.S) / sigma2;
                // z^T (U_o^T U_o)^{-1} z with z = U_o^T y_o, via S^{1/2} T_o y_o = (U_o^T U_o)^{-1} z.
                Matrix uo(po, m);
                for (long r = 0; r < po; ++r) uo.row(r) = basis.U.row(b.observed[static_cast<std::size_t>(r)]);
                const Matrix z = uo.transpose() * yo;
                const Matrix w = basis.S.cwiseSqrt().asDiagonal() * bp.values;
                energy = yo.squaredNorm() - z.cwiseProduct(w).sum();
            }
            for (long c = 0; c < nb; ++c) {
                const long col = position[static_cast<std::size_t>(b.columns[static_cast<std::size_t>(c)])];
                pd.values.col(col) = bp.values.col(c);
                pd.noise.col(col) = proj.sigma_diagonal();
                pd.gram_diag.col(col) = gdiag;
            }
            const double dnb = static_cast<double>(nb);
            pd.residual_energy += energy;
            pd.residual_dof += dnb * static_cast<double>(po - m);
            pd.regulariser += -0.5 * dnb * log_det_s - 0.5 * dnb * proj.log_det_gram -
                              0.5 * dnb * static_cast<double>(po - m) * log_2pi_sigma2 -
                              energy / (2.0 * sigma2);
            pd.noise_lost += 0.5 * dnb *
                             (static_cast<double>(po - m) * std::log(sigma2) + log_det_s + proj.log_det_gram);

            BlockDiagnostic diag{nb, po, 0.0, 0.0, 0.0};
            if (po < p) {
                const DiagApproxError err = diag_approx_error(basis, noise, b.observed);
                diag.eps_rel = err.eps_rel;
                diag.bound = err.bound;
                diag.certified_bound = err.certified_bound;
            }
            pd.blocks.push_back(diag);

            if (model.noise.heterogeneous) {
                for (long r : b.observed) jacobian -= 0.5 * dnb * std::log((*model.noise.heterogeneous)(r));
            }
        }
    }
    pd.data_lost = pd.residual_energy / (2.0 * sigma2);
    // The whitening Jacobian is a constant shift of the regulariser.
    pd.regulariser += jacobian;
    pd.noise_lost -= jacobian;
    return pd;
}

LmlBreakdown log_likelihood(const OilmmModel& model, const Dataset& data, Execution exec, ProjectOptions opts) {
    model.validate();
    const ProjectedData pd = project_dataset(model, data, opts);
    const long m = model.m();

    LmlBreakdown out;
    out.per_latent_lml = Vector::Zero(m);
    parallel_for(m, exec, [&](long i) {
        out.per_latent_lml(i) = log_marginal(model.latent_kernels[static_cast<std::size_t>(i)],
                                             latent_observations(pd, i));
    });
    out.regulariser = pd.regulariser;
    out.total = out.regulariser;
    for (long i = 0; i < m; ++i) out.total += out.per_latent_lml(i);
    out.noise_lost = pd.noise_lost;
    out.data_lost = pd.data_lost;
    out.dropped_columns = pd.dropped_columns;
    out.blocks = pd.blocks;
    return out;
}

JointPrediction predict(const OilmmModel& model, const Dataset& data, const Vector& query_times,
                        bool include_observation_noise, Execution exec) {
    model.validate();
    const ProjectedData pd = project_dataset(model, data);
    const long m = model.m();
    const long q = query_times.size();

    JointPrediction out;
    out.latent.resize(static_cast<std::size_t>(m));
    parallel_for(m, exec, [&](long i) {
        out.latent[static_cast<std::size_t>(i)] =
            condition(model.latent_kernels[static_cast<std::size_t>(i)], latent_observations(pd, i), query_times);
    });

    Matrix mu(m, q);
    Matrix nu(m, q);
    for (long i = 0; i < m; ++i) {
        mu.row(i) = out.latent[static_cast<std::size_t>(i)].mean.transpose();
        nu.row(i) = out.latent[static_cast<std::size_t>(i)].variance.transpose();
    }
    const Matrix h = model.basis.H();
    out.mean = h * mu;
    out.marginal_variance = h.cwiseAbs2() * nu;
    unwhiten(model.noise, out.mean, &out.marginal_variance);

    if (include_observation_noise) {
        Vector obs_var;
        if (model.noise.heterogeneous) {
            obs_var = model.noise.sigma2 * *model.noise.heterogeneous;
        } else {
            obs_var = h.cwiseAbs2() * model.noise.D;
            obs_var.array() += model.noise.sigma2;
        }
        out.marginal_variance.colwise() += obs_var;
    }
    return out;
}

std::uint64_t latent_seed(std::uint64_t seed, long index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index)};
    std::uint32_t words[2];
    seq.generate(words, words + 2);
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

Matrix sample(const OilmmModel& model, const Dataset& data, const Vector& query_times, std::uint64_t seed,
              Execution exec) {
    model.validate();
    const ProjectedData pd = project_dataset(model, data);
    const long m = model.m();
    Matrix x(m, query_times.size());
    parallel_for(m, exec, [&](long i) {
        x.row(i) = sample_posterior(model.latent_kernels[static_cast<std::size_t>(i)], latent_observations(pd, i),
                                    query_times, latent_seed(seed, i))
                       .transpose();
    });
    Matrix out = model.basis.H() * x;
    unwhiten(model.noise, out, nullptr);
    return out;
}

Matrix simulate(const OilmmModel& model, const Vector& times, std::uint64_t seed, Execution exec) {
    model.validate();
    const long p = model.p();
    const long m = model.m();
    const long n = times.size();
    Dataset empty;
    empty.times = Vector(0);
    empty.Y = Matrix(p, 0);
    empty.mask = BoolMatrix(p, 0);
    Matrix y = sample(model, empty, times, seed, exec);

    // Noise uses a stream separate from every latent stream.
    const Vector white = standard_normals(latent_seed(seed, -1), p * n);
    const Matrix eps = Eigen::Map<const Matrix>(white.data(), p, n);
    if (model.noise.heterogeneous) {
        y += (model.noise.sigma2 * *model.noise.heterogeneous).cwiseSqrt().asDiagonal() * eps;
    } else {
        y += std::sqrt(model.noise.sigma2) * eps;
        if (model.noise.has_D()) {
            const Vector z = standard_normals(latent_seed(seed, -2), m * n);
            const Matrix eta = Eigen::Map<const Matrix>(z.data(), m, n);
            y += model.basis.H() * model.noise.D.cwiseSqrt().asDiagonal() * eta;
        }
    }
    return y;
}

MseDecomposition mse_decompose(const OrthogonalBasis& basis, const Vector& y, const Vector& x) {
    if (y.size() != basis.p() || x.size() != basis.m())
        throw ContractError("mse_decompose: dimension mismatch");
    MseDecomposition out;
    out.total = (y - basis.H() * x).squaredNorm();
    const Vector uty = basis.U.transpose() * y;
    out.unexplained = (y - basis.U * uty).squaredNorm();
    const Vector ty = uty.cwiseQuotient(basis.S.cwiseSqrt());
    out.per_latent = basis.S.cwiseProduct((ty - x).cwiseAbs2());
    return out;
}

ProjectionLoss projection_loss(const OrthogonalBasis& basis, const NoiseModel& noise, const Vector& y) {
    noise.validate(basis.p(), basis.m());
    if (noise.heterogeneous) throw ContractError("projection_loss: heterogeneous noise is not supported");
    if (y.size() != basis.p()) throw ContractError("projection_loss: dimension mismatch");
    // |Sigma| / |Sigma_T| = sigma2^{p-m} |S| regardless of D, and
    // Sigma^{-1} acts as 1/sigma2 on the complement of col(U).
    ProjectionLoss out;
    const double pm = static_cast<double>(basis.p() - basis.m());
    out.noise_lost = 0.5 * (pm * std::log(noise.sigma2) + basis.S.array().log().sum());
    const Vector residual = y - basis.U * (basis.U.transpose() * y);
    out.data_lost = residual.squaredNorm() / (2.0 * noise.sigma2);
    return out;
}

}  // namespace oilmm
