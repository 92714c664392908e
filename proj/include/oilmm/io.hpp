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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "oilmm/learn.hpp"
#include "oilmm/model.hpp"

namespace oilmm::io {

/// Parses `time,out_0,...,out_{p-1}` CSV text. Empty cells are missing.
/// Errors name the 1-based row and column of the offending cell.
Dataset parse_data_csv(std::string_view text);
Dataset read_data_csv(const std::string& path);

/// First column of a CSV with a header row.
Vector parse_times_csv(std::string_view text);
Vector read_times_csv(const std::string& path);

std::string format_data_csv(const Vector& times, const Matrix& Y);
std::string format_predictions_csv(const Vector& times, const Matrix& mean, const Matrix& variance);

/// Canonical JSON: keys sorted, floats printed with 17 significant digits.
std::string serialize_model(const OilmmModel& model);
OilmmModel parse_model(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

/// Shortest-form double text that round-trips ("%.17g").
std::string format_double(double v);

enum class BasisInit { Data, SpatialKernel, Identity, Random };
enum class MissingPolicy { Error, DiagApprox };

struct RunConfig {
    long m = 0;
    /// One kernel per latent, or a single template.
    std::vector<KernelSpec> kernels;
    BasisInit basis = BasisInit::Data;
    /// Spatial-kernel basis: kernel over output locations, and the locations.
    std::optional<KernelSpec> spatial_kernel;
    Vector locations;
    /// Optional fixed starting values; heuristics fill the rest.
    std::optional<double> sigma2;
    std::optional<Vector> S;
    std::optional<Vector> D;
    std::optional<Vector> heterogeneous;
    FitOptions fit;
    std::uint64_t seed = 0;
    MissingPolicy missing = MissingPolicy::DiagApprox;
    /// Simulation only.
    long p = 0;
    double time_start = 0.0;
    double time_stop = 10.0;
};

/// Parses and validates a config. `base_dir` resolves relative file paths.
RunConfig parse_config(std::string_view text, const std::string& base_dir = ".");

/// Builds the starting model for `cmd fit` from a config and data.
OilmmModel initial_model(const RunConfig& config, const Dataset& data);

/// Builds the generating model for `cmd simulate`.
OilmmModel simulation_model(const RunConfig& config);

}  // namespace oilmm::io
