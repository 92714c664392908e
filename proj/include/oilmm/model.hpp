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

#include <cstdint>
#include <vector>

#include "oilmm/kernels.hpp"
#include "oilmm/mixing.hpp"
#include "oilmm/parallel.hpp"
#include "oilmm/sogp.hpp"

namespace oilmm {

/// Orthogonal instantaneous linear mixing model: y(t) = H x(t) + noise with
/// H = U S^{1/2}, independent unit-variance latent GPs x_i, and noise
/// sigma2 I + H D H^T.
struct OilmmModel {
    OrthogonalBasis basis;
    NoiseModel noise;
    std::vector<KernelSpec> latent_kernels;

    /// Validates shapes and normalizes every latent kernel to k(t, t) = 1.
    static OilmmModel create(OrthogonalBasis basis, NoiseModel noise, std::vector<KernelSpec> kernels);

    long p() const noexcept { return basis.p(); }
    long m() const noexcept { return basis.m(); }
    void validate() const;
};

struct BlockDiagnostic {
    long columns = 0;
    long observed_outputs = 0;
    double eps_rel = 0.0;
    double bound = 0.0;
    double certified_bound = 0.0;
};

/// Data mapped onto the latent processes: one row of projected values and
/// projected noise per latent, one column per retained time stamp.
struct ProjectedData {
    Vector times;
    Matrix values;
    Matrix noise;
    /// (U_o^T U_o)^{-1}_{ii} per column; all ones for fully observed columns.
    Matrix gram_diag;

    double regulariser = 0.0;
    double noise_lost = 0.0;
    double data_lost = 0.0;
    /// sum over blocks of n_b (p_b - m); enters d regulariser / d log sigma2.
    double residual_dof = 0.0;
    /// sum over blocks of ||Y_o||^2 - ||chol(U_o^T U_o)^{-1} U_o^T Y_o||^2.
    double residual_energy = 0.0;

    std::vector<long> dropped_columns;
    std::vector<BlockDiagnostic> blocks;
};

struct ProjectOptions {
    /// Route fully observed data through the missing-data block path.
    bool force_block_path = false;
};

ProjectedData project_dataset(const OilmmModel& model, const Dataset& data, ProjectOptions opts = {});

struct LmlBreakdown {
    double regulariser = 0.0;
    Vector per_latent_lml;
    double total = 0.0;
    double noise_lost = 0.0;
    double data_lost = 0.0;
    std::vector<long> dropped_columns;
    std::vector<BlockDiagnostic> blocks;
};

struct JointPrediction {
    Matrix mean;
    Matrix marginal_variance;
    std::vector<LatentPosterior> latent;
};

/// Exact evidence for fully observed data; diagonal-approximation evidence
/// when entries are missing. total = regulariser + sum of per-latent terms,
/// accumulated in that order.
LmlBreakdown log_likelihood(const OilmmModel& model, const Dataset& data,
                            Execution exec = Execution::Parallel, ProjectOptions opts = {});

JointPrediction predict(const OilmmModel& model, const Dataset& data, const Vector& query_times,
                        bool include_observation_noise = false, Execution exec = Execution::Parallel);

/// H times independent latent posterior samples. Latent i draws from a
/// generator seeded by (seed, i), so the result does not depend on `exec`.
Matrix sample(const OilmmModel& model, const Dataset& data, const Vector& query_times,
              std::uint64_t seed, Execution exec = Execution::Parallel);

/// Draws Y = H X + noise at `times` with X from the latent priors. Noise
/// follows the model: sigma2 I + H D H^T, or sigma2 diag(v) when heterogeneous.
Matrix simulate(const OilmmModel& model, const Vector& times, std::uint64_t seed,
                Execution exec = Execution::Parallel);

/// Seed for latent `index` derived from a run seed.
std::uint64_t latent_seed(std::uint64_t seed, long index);

struct MseDecomposition {
    double total = 0.0;
    double unexplained = 0.0;
    Vector per_latent;
};

/// ||y - H x||^2 split into the part outside col(U) and S_ii ((T y)_i - x_i)^2.
MseDecomposition mse_decompose(const OrthogonalBasis& basis, const Vector& y, const Vector& x);

struct ProjectionLoss {
    double noise_lost = 0.0;
    double data_lost = 0.0;
};

/// 1/2 log(|Sigma| / |Sigma_T|) and 1/2 ||(I - H T) y||_Sigma^2 for one observation.
ProjectionLoss projection_loss(const OrthogonalBasis& basis, const NoiseModel& noise, const Vector& y);

}  // namespace oilmm
