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

#include "oilmm/kernels.hpp"
#include "oilmm/linalg.hpp"

namespace oilmm {

/// Observations of one latent process. Noise is stored per observation so
/// that projected data from different missing-data blocks, which carry
/// different projected noise, can be conditioned on jointly.
struct LatentObservations {
    Vector times;
    Vector values;
    Vector noise;

    static LatentObservations homoscedastic(Vector times, Vector values, double noise_variance);

    long size() const noexcept { return times.size(); }
    /// Throws ContractError on length mismatch or nonpositive noise.
    void validate() const;
};

struct LatentPosterior {
    Vector mean;
    Vector variance;
    /// log N(values | 0, K + diag(noise)).
    double lml = 0.0;
    /// Number of predictive variances clamped up to zero.
    long clamped = 0;
};

/// Value and gradient of the log marginal likelihood.
struct LatentLmlGradient {
    double lml = 0.0;
    /// d lml / d log(theta) for every kernel parameter.
    Vector kernel;
    /// d lml / d noise_j for every observation.
    Vector noise;
    /// d lml / d values_j.
    Vector values;
};

/// Single-output GP backend. Only the exact dense backend ships; the
/// interface is what an approximate backend would implement.
class LatentSolver {
public:
    virtual ~LatentSolver() = default;

    virtual LatentPosterior condition(const KernelSpec& spec, const LatentObservations& obs,
                                      const Vector& query_times) const = 0;
    virtual double log_marginal(const KernelSpec& spec, const LatentObservations& obs) const = 0;
    virtual Vector sample_posterior(const KernelSpec& spec, const LatentObservations& obs,
                                    const Vector& query_times, std::uint64_t seed) const = 0;
};

class ExactLatentSolver final : public LatentSolver {
public:
    LatentPosterior condition(const KernelSpec& spec, const LatentObservations& obs,
                              const Vector& query_times) const override;
    double log_marginal(const KernelSpec& spec, const LatentObservations& obs) const override;
    Vector sample_posterior(const KernelSpec& spec, const LatentObservations& obs,
                            const Vector& query_times, std::uint64_t seed) const override;
};

const LatentSolver& exact_solver();

inline LatentPosterior condition(const KernelSpec& spec, const LatentObservations& obs,
                                 const Vector& query_times) {
    return exact_solver().condition(spec, obs, query_times);
}

inline double log_marginal(const KernelSpec& spec, const LatentObservations& obs) {
    return exact_solver().log_marginal(spec, obs);
}

inline Vector sample_posterior(const KernelSpec& spec, const LatentObservations& obs,
                               const Vector& query_times, std::uint64_t seed) {
    return exact_solver().sample_posterior(spec, obs, query_times, seed);
}

/// Closed-form gradient of the exact log marginal likelihood.
LatentLmlGradient log_marginal_gradient(const KernelSpec& spec, const LatentObservations& obs);

/// Draws `count` standard normals from a generator seeded with `seed`.
Vector standard_normals(std::uint64_t seed, long count);

}  // namespace oilmm
