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

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "oilmm/linalg.hpp"

namespace oilmm {

enum class KernelFamily {
    ExponentiatedQuadratic,
    Matern12,
    Matern32,
    Matern52,
    Periodic,
    Sum,
    Product,
    Scaled,
};

/// A scalar stationary kernel over real inputs, possibly composed of
/// sums, products and positive rescalings of other kernels.
///
/// Parameters are enumerated depth-first. A leaf contributes
/// (lengthscale, variance) and, for Periodic, period; Scaled contributes its
/// weight followed by its child's parameters; Sum and Product contribute
/// their children's parameters in order.
struct KernelSpec {
    KernelFamily family = KernelFamily::ExponentiatedQuadratic;
    double lengthscale = 1.0;
    double variance = 1.0;
    double period = 1.0;
    double weight = 1.0;
    std::vector<KernelSpec> children;

    static KernelSpec eq(double lengthscale, double variance = 1.0);
    static KernelSpec matern12(double lengthscale, double variance = 1.0);
    static KernelSpec matern32(double lengthscale, double variance = 1.0);
    static KernelSpec matern52(double lengthscale, double variance = 1.0);
    static KernelSpec periodic(double lengthscale, double variance, double period);
    static KernelSpec sum(std::vector<KernelSpec> parts);
    static KernelSpec product(std::vector<KernelSpec> parts);
    static KernelSpec scaled(double weight, KernelSpec inner);

    bool is_leaf() const noexcept;
    bool operator==(const KernelSpec&) const = default;
};

/// Throws ParameterDomainError if any parameter is nonpositive or not finite,
/// or if a combinator has no children.
void validate(const KernelSpec& spec);

double eval_kernel(const KernelSpec& spec, double t, double t2);

struct KernelMatrix {
    Matrix entries;
    /// Diagonal jitter needed for the Cholesky factorization to succeed.
    double jitter_applied = 0.0;
};

/// Kernel matrix over `times`, checked for factorizability under the jitter
/// escalation policy. Throws ConditioningError if no jitter suffices.
KernelMatrix build_kernel_matrix(const KernelSpec& spec, const Vector& times);

/// Entries k(a_i, b_j) with no factorization check.
Matrix cross_kernel_matrix(const KernelSpec& spec, const Vector& a, const Vector& b);

KernelSpec parse_kernel_spec(std::string_view text);
std::string render_kernel_spec(const KernelSpec& spec);

std::size_t num_params(const KernelSpec& spec);
std::vector<std::string> param_names(const KernelSpec& spec);
Vector log_params(const KernelSpec& spec);
KernelSpec with_log_params(const KernelSpec& spec, std::span<const double> values);

/// d k(t, t2) / d log(theta_j) for every parameter, written to `out`.
void eval_kernel_log_grad(const KernelSpec& spec, double t, double t2, std::span<double> out);

/// One n x n matrix per parameter: d K / d log(theta_j).
std::vector<Matrix> kernel_matrix_log_grads(const KernelSpec& spec, const Vector& times);

/// Rescales `spec` so that k(t, t) = 1. Leaves get variance 1; a top-level
/// Scaled node gets its weight reset; Sum and Product are wrapped in Scaled.
KernelSpec normalize_unit_variance(const KernelSpec& spec);

/// Index of the parameter pinned by normalize_unit_variance (the leaf
/// variance or the top-level Scaled weight).
std::size_t normalizing_param_index(const KernelSpec& spec);

}  // namespace oilmm
