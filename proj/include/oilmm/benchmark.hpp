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
#include <string>
#include <vector>

#include "oilmm/parallel.hpp"

/// Evidence-evaluation timing harness: OILMM (per-latent, O(m)) against the
/// dense ILMM comparator (one nm x nm factorization, O(m^3)).
namespace oilmm::bench {

enum class Method { Oilmm, DenseIlmm };

std::string method_name(Method method);
/// Accepts "oilmm", "dense-ilmm" and "dense".
Method parse_method(const std::string& name);

struct BenchmarkOptions {
    long n = 500;
    long p = 200;
    std::vector<long> m_list{4, 8, 16, 32, 64};
    std::vector<Method> methods{Method::Oilmm, Method::DenseIlmm};
    long reps = 3;
    std::uint64_t seed = 0;
    /// Wall-clock budget per method; a cell whose predicted cost would
    /// exceed what is left is skipped.
    double time_budget_seconds = 600.0;
    /// Bytes a single cell may allocate; 0 means 80% of available memory.
    double memory_budget_bytes = 0.0;
    /// Latent loops run serially by default so that thread count does not
    /// mask the growth in m.
    Execution exec = Execution::Serial;
};

struct TimingRow {
    std::string method;
    long n = 0;
    long p = 0;
    long m = 0;
    long rep = 0;
    double seconds = 0.0;
};

struct SkippedCell {
    std::string method;
    long m = 0;
    std::string reason;
};

struct SlopeSummary {
    std::string method;
    /// Upper half of the requested m range.
    std::vector<long> m_upper;
    /// The subset of m_upper that was measured.
    std::vector<long> m_used;
    std::vector<double> median_seconds;
    /// Least-squares slope of log median time against log m over m_used;
    /// NaN with fewer than two points.
    double slope = 0.0;
    bool complete = false;
};

struct BenchmarkResult {
    std::vector<TimingRow> rows;
    std::vector<SkippedCell> skipped;
    std::vector<SlopeSummary> summaries;
};

using Progress = std::function<void(const std::string&)>;

BenchmarkResult run_benchmark(const BenchmarkOptions& opts, const Progress& progress = {});

/// Header `method,n,p,m,rep,seconds` followed by one row per timing.
std::string format_timings_csv(const std::vector<TimingRow>& rows);
std::string format_summary_json(const BenchmarkResult& result);

double median(std::vector<double> values);
double loglog_slope(const std::vector<long>& ms, const std::vector<double>& seconds);

/// Slope summaries from raw timings (median over reps per m).
std::vector<SlopeSummary> summarize(const std::vector<TimingRow>& rows, const std::vector<long>& m_list,
                                    const std::vector<Method>& methods);

/// min(MemAvailable, cgroup limit) in bytes; 0 if unknown.
double available_memory_bytes();

/// Bytes held by one dense-ILMM evidence evaluation.
double dense_ilmm_bytes(long n, long m);

}  // namespace oilmm::bench
