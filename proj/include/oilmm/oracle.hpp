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

#include <vector>

#include "oilmm/kernels.hpp"
#include "oilmm/mixing.hpp"
#include "oilmm/model.hpp"

/// Dense reference implementations. Everything here assembles full joint
/// covariances and is O(n^3 p^3) or O(n^3 m^3); use only on small problems.
namespace oilmm::oracle {

inline constexpr long kDefaultCap = 2000;

/// General ILMM: y = H x + e, e ~ N(0, Sigma) white in time.
struct DenseIlmm {
    GeneralBasis H;
    Matrix Sigma;
    std::vector<KernelSpec> latent_kernels;

    static DenseIlmm from_oilmm(const OilmmModel& model);
    void validate() const;
};

/// log N(vec(Y_observed) | 0, C) with C assembled time-major from
/// H K_i(t, t') H^T + delta Sigma; unobserved entries are deleted.
double dense_evidence(const DenseIlmm& model, const Dataset& data, long cap = kDefaultCap);

struct DensePosterior {
    Matrix mean;
    Matrix variance;
};

/// Posterior marginals of f = H x at the query times by joint conditioning.
DensePosterior dense_posterior(const DenseIlmm& model, const Dataset& data, const Vector& query_times,
                               long cap = kDefaultCap);

/// Posterior marginals of f obtained by conditioning the coupled latent
/// process on T Y under projected noise Sigma_T (fully observed data).
DensePosterior projected_posterior(const DenseIlmm& model, const Dataset& data, const Vector& query_times,
                                   long cap = kDefaultCap);

/// Evidence as per-column corrections log N(y|0,Sigma) - log N(Ty|0,Sigma_T)
/// plus the evidence of T Y under the coupled m-dimensional latent process.
/// The latter is one nm x nm Cholesky; `cap` bounds nm.
double projected_evidence(const DenseIlmm& model, const Dataset& data, long cap = kDefaultCap);

/// n ||H - H2||_F^2 / (2 sigma2).
double kl_between_ilmms(const GeneralBasis& H, const GeneralBasis& H2, double sigma2, long n);

struct KlBound {
    double achieved = 0.0;
    double bound = 0.0;
};

/// KL to the OILMM built from the SVD of H, and the bound
/// n prior_trace ||I - V||_F^2 / (2 sigma2).
KlBound kl_oilmm_bound(const GeneralBasis& H, double sigma2, long n, double prior_trace);

}  // namespace oilmm::oracle
