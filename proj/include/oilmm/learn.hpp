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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "oilmm/model.hpp"

namespace oilmm {

/// Named slice of a flat parameter vector.
struct ParamSegment {
    std::string name;
    long offset = 0;
    long size = 0;
};

/// Everything needed to turn a flat vector back into a model that is not
/// itself optimized: shapes, reflector signs, kernel structure and any
/// fixed noise components.
struct ParamLayout {
    long p = 0;
    long m = 0;
    bool learn_D = false;
    /// Sign applied to column j after the reflectors (+1 or -1).
    Vector column_signs;
    /// Normalized kernels; their free parameters are overwritten on decode.
    std::vector<KernelSpec> kernel_templates;
    /// D when it is not learned (may be empty).
    Vector fixed_D;
    std::optional<Vector> heterogeneous;
    std::vector<ParamSegment> segments;

    long size() const;
    /// Throws ContractError for unknown names.
    const ParamSegment& segment(const std::string& name) const;
    bool has_segment(const std::string& name) const;
};

struct ParamVector {
    ParamLayout layout;
    Vector values;
};

/// Number of reflector coordinates for a p x m orthonormal frame.
long householder_size(long p, long m);

/// Encodes U as m Householder reflectors applied to the first m columns of
/// the identity, followed by column signs.
Vector householder_encode(const Matrix& U, Vector& signs);
Matrix householder_decode(const Vector& coords, const Vector& signs, long p, long m);

struct EncodeOptions {
    /// Put log D in the parameter vector. Zero entries are floored at
    /// 1e-12 sigma2 so that their logarithm exists.
    bool learn_D = false;
};

/// Segments, in order: "U", "log_S", "log_sigma2", optionally "log_D", then
/// "kernel_0" ... "kernel_{m-1}" holding each kernel's free log parameters
/// (the parameter fixed by unit-variance normalization is excluded).
ParamVector encode(const OilmmModel& model, EncodeOptions opts = {});
OilmmModel decode(const ParamVector& params);
OilmmModel decode(const ParamLayout& layout, const Vector& values);

double nll(const ParamVector& params, const Dataset& data);

enum class GradientMode { FiniteDifference, AnalyticKernelOnly };

/// Central differences with h = 1e-6 (1 + |theta|) per coordinate, or
/// closed-form gradients for every coordinate except U (which stays on
/// finite differences).
Vector grad_nll(const ParamVector& params, const Dataset& data, GradientMode mode,
                Execution exec = Execution::Parallel);

/// Central finite-difference gradient of an arbitrary objective.
Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x,
                                  Execution exec = Execution::Parallel);

enum class OptimizerKind { Adam, Lbfgs };

struct FitOptions {
    long max_iters = 1000;
    double tolerance = 1e-9;
    OptimizerKind optimizer = OptimizerKind::Adam;
    GradientMode gradient = GradientMode::FiniteDifference;
    double learning_rate = 1e-2;
    bool learn_D = false;
    std::uint64_t seed = 0;
    Execution exec = Execution::Parallel;
};

struct FitResult {
    OilmmModel model;
    /// nll at the start and after every accepted step.
    std::vector<double> trace;
    long iterations = 0;
    bool converged = false;
    /// Set when the objective or its gradient became non-finite; `model` is
    /// then the best point seen.
    bool diverged = false;
};

FitResult fit(const OilmmModel& model0, const Dataset& data, const FitOptions& opts = {});

struct InitOptions {
    /// Replace every leaf lengthscale by a tenth of the time span.
    bool reset_lengthscales = true;
};

/// Basis from the top-m eigenpairs of the empirical output covariance
/// (pairwise over jointly observed entries), sigma2 a tenth of the mean
/// discarded eigenvalue, D = 0.
OilmmModel initialize_model(const Dataset& data, long m, std::vector<KernelSpec> kernels, InitOptions opts = {});

}  // namespace oilmm
