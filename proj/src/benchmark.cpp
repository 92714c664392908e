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

#include "oilmm/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "oilmm/errors.hpp"
#include "oilmm/io.hpp"
#include "oilmm/model.hpp"
#include "oilmm/oracle.hpp"

namespace oilmm::bench {

namespace {

using Clock = std::chrono::steady_clock;

Matrix gaussian_matrix(long rows, long cols, std::mt19937_64& gen) {
    std::normal_distribution<double> normal;
    Matrix a(rows, cols);
    for (long j = 0; j < cols; ++j)
        for (long i = 0; i < rows; ++i) a(i, j) = normal(gen);
    return a;
}

Dataset synthetic_data(long n, long p, std::mt19937_64& gen) {
    std::uniform_real_distribution<double> uniform(0.0, 10.0);
    Vector t(n);
    for (long j = 0; j < n; ++j) t(j) = uniform(gen);
    std::sort(t.data(), t.data() + n);
    return Dataset::from_matrix(std::move(t), gaussian_matrix(p, n, gen));
}

std::vector<KernelSpec> bench_kernels(long m) {
    return std::vector<KernelSpec>(static_cast<std::size_t>(m), KernelSpec::matern52(1.0));
}

OilmmModel oilmm_model(long p, long m, std::mt19937_64& gen) {
    const Matrix g = gaussian_matrix(p, m, gen);
    Matrix u = Eigen::HouseholderQR<Matrix>(g).householderQ() * Matrix::Identity(p, m);
    return OilmmModel::create(OrthogonalBasis{std::move(u), Vector::Ones(m)}, NoiseModel::isotropic(0.1, m),
                              bench_kernels(m));
}

oracle::DenseIlmm dense_model(long p, long m, std::mt19937_64& gen) {
    oracle::DenseIlmm model;
    model.H = GeneralBasis::create(gaussian_matrix(p, m, gen) / std::sqrt(static_cast<double>(p)));
    model.Sigma = 0.1 * Matrix::Identity(p, p);
    model.latent_kernels = bench_kernels(m);
    return model;
}

void say(const Progress& progress, const std::string& msg) {
    if (progress) progress(msg);
}

std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(3);
    ss << v;
    return ss.str();
}

}  // namespace

std::string method_name(Method method) { return method == Method::Oilmm ? "oilmm" : "dense-ilmm"; }

Method parse_method(const std::string& name) {
    if (name == "oilmm") return Method::Oilmm;
    if (name == "dense-ilmm" || name == "dense") return Method::DenseIlmm;
    throw ContractError("benchmark: unknown method '" + name + "'");
}

double dense_ilmm_bytes(long n, long m) {
    const double nm = static_cast<double>(n) * static_cast<double>(m);
    // Coupled covariance plus the m latent kernel matrices (twice, for the
    // cross-kernel temporaries).
    return 8.0 * (nm * nm + 2.0 * static_cast<double>(m) * static_cast<double>(n) * static_cast<double>(n));
}

double available_memory_bytes() {
    double avail = 0.0;
    std::ifstream meminfo("/proc/meminfo");
    std::string key;
    double value = 0.0;
    std::string unit;
    while (meminfo >> key >> value >> unit) {
        if (key == "MemAvailable:") {
            avail = value * 1024.0;
            break;
        }
    }
    std::ifstream cg("/sys/fs/cgroup/memory.max");
    std::string limit;
    if (cg >> limit && limit != "max") {
        const double lim = std::stod(limit);
        if (lim > 0.0 && (avail == 0.0 || lim < avail)) avail = lim;
    }
    return avail;
}

double median(std::vector<double> values) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const std::size_t k = values.size() / 2;
    return values.size() % 2 ? values[k] : 0.5 * (values[k - 1] + values[k]);
}

double loglog_slope(const std::vector<long>& ms, const std::vector<double>& seconds) {
    if (ms.size() != seconds.size()) throw ContractError("loglog_slope: size mismatch");
    if (ms.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const long k = static_cast<long>(ms.size());
    Matrix a(k, 2);
    Vector b(k);
    for (long i = 0; i < k; ++i) {
        a(i, 0) = 1.0;
        a(i, 1) = std::log(static_cast<double>(ms[static_cast<std::size_t>(i)]));
        b(i) = std::log(seconds[static_cast<std::size_t>(i)]);
    }
    const Vector coef = a.colPivHouseholderQr().solve(b);
    return coef(1);
}

std::vector<SlopeSummary> summarize(const std::vector<TimingRow>& rows, const std::vector<long>& m_list,
                                    const std::vector<Method>& methods) {
    std::vector<long> ms(m_list.begin(), m_list.end());
    std::sort(ms.begin(), ms.end());
    ms.erase(std::unique(ms.begin(), ms.end()), ms.end());
    const std::size_t half = ms.size() / 2;
    const std::vector<long> upper(ms.begin() + static_cast<std::ptrdiff_t>(half), ms.end());

    std::vector<SlopeSummary> out;
    for (Method method : methods) {
        SlopeSummary s;
        s.method = method_name(method);
        s.m_upper = upper;
        for (long m : upper) {
            std::vector<double> times;
            for (const auto& r : rows)
                if (r.method == s.method && r.m == m) times.push_back(r.seconds);
            if (times.empty()) continue;
            s.m_used.push_back(m);
            s.median_seconds.push_back(median(times));
        }
        s.complete = s.m_used.size() == upper.size() && !upper.empty();
        s.slope = loglog_slope(s.m_used, s.median_seconds);
        out.push_back(std::move(s));
    }
    return out;
}

BenchmarkResult run_benchmark(const BenchmarkOptions& opts, const Progress& progress) {
    if (opts.n < 1 || opts.p < 1 || opts.reps < 1)
        throw ContractError("benchmark: n, p and reps must be positive");
    for (long m : opts.m_list)
        if (m < 1 || m > opts.p) throw ContractError("benchmark: every m must satisfy 1 <= m <= p");
    const double memory_budget =
        opts.memory_budget_bytes > 0.0 ? opts.memory_budget_bytes : 0.8 * available_memory_bytes();

    std::vector<long> ms(opts.m_list.begin(), opts.m_list.end());
    std::sort(ms.begin(), ms.end());

    BenchmarkResult result;
    // Methods run one after the other so their timings do not interfere.
    for (Method method : opts.methods) {
        const std::string name = method_name(method);
        double spent = 0.0;
        long last_m = 0;
        double last_time = 0.0;
        for (long m : ms) {
            if (method == Method::DenseIlmm) {
                const double bytes = dense_ilmm_bytes(opts.n, m);
                if (memory_budget > 0.0 && bytes > memory_budget) {
                    result.skipped.push_back({name, m,
                                              "memory: needs " + fmt(bytes / 1e9) + " GB, budget " +
                                                  fmt(memory_budget / 1e9) + " GB"});
                    say(progress, name + " m=" + std::to_string(m) + " skipped (" + result.skipped.back().reason + ")");
                    continue;
                }
            }
            if (last_m > 0) {
                const double power = method == Method::DenseIlmm ? 3.0 : 1.0;
                const double predicted =
                    last_time * std::pow(static_cast<double>(m) / static_cast<double>(last_m), power) *
                    static_cast<double>(opts.reps);
                if (spent + predicted > opts.time_budget_seconds) {
                    result.skipped.push_back({name, m,
                                              "time: predicted " + fmt(predicted) + " s exceeds remaining budget " +
                                                  fmt(opts.time_budget_seconds - spent) + " s"});
                    say(progress, name + " m=" + std::to_string(m) + " skipped (" + result.skipped.back().reason + ")");
                    continue;
                }
            }

            std::mt19937_64 gen(opts.seed ^ (static_cast<std::uint64_t>(m) * 0x9E3779B97F4A7C15ULL));
            const Dataset data = synthetic_data(opts.n, opts.p, gen);
            std::vector<double> times;
            if (method == Method::Oilmm) {
                const OilmmModel model = oilmm_model(opts.p, m, gen);
                for (long rep = 0; rep < opts.reps; ++rep) {
                    const auto t0 = Clock::now();
                    const double lml = log_likelihood(model, data, opts.exec).total;
                    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
                    if (!std::isfinite(lml)) throw ConditioningError("benchmark: non-finite OILMM evidence");
                    times.push_back(secs);
                }
            } else {
                const oracle::DenseIlmm model = dense_model(opts.p, m, gen);
                const long cap = std::numeric_limits<long>::max();
                for (long rep = 0; rep < opts.reps; ++rep) {
                    const auto t0 = Clock::now();
                    const double lml = oracle::projected_evidence(model, data, cap);
                    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
                    if (!std::isfinite(lml)) throw ConditioningError("benchmark: non-finite dense evidence");
                    times.push_back(secs);
                }
            }
            for (long rep = 0; rep < opts.reps; ++rep)
                result.rows.push_back({name, opts.n, opts.p, m, rep, times[static_cast<std::size_t>(rep)]});
            const double med = median(times);
            for (double t : times) spent += t;
            last_m = m;
            last_time = med;
            say(progress, name + " m=" + std::to_string(m) + " median " + fmt(med) + " s");
        }
    }
    result.summaries = summarize(result.rows, opts.m_list, opts.methods);
    return result;
}

std::string format_timings_csv(const std::vector<TimingRow>& rows) {
    std::string out = "method,n,p,m,rep,seconds\n";
    for (const auto& r : rows) {
        out += r.method + ',' + std::to_string(r.n) + ',' + std::to_string(r.p) + ',' + std::to_string(r.m) + ',' +
               std::to_string(r.rep) + ',' + io::format_double(r.seconds) + '\n';
    }
    return out;
}

std::string format_summary_json(const BenchmarkResult& result) {
    std::ostringstream out;
    auto list = [&](const auto& v) {
        out << '[';
        for (std::size_t i = 0; i < v.size(); ++i) {
            if (i) out << ", ";
            if constexpr (std::is_floating_point_v<std::decay_t<decltype(v[i])>>)
                out << io::format_double(v[i]);
            else
                out << v[i];
        }
        out << ']';
    };
    out << "{\n  \"skipped\": [";
    for (std::size_t i = 0; i < result.skipped.size(); ++i) {
        const auto& s = result.skipped[i];
        out << (i ? "," : "") << "\n    {\"m\": " << s.m << ", \"method\": \"" << s.method << "\", \"reason\": \""
            << s.reason << "\"}";
    }
    out << (result.skipped.empty() ? "" : "\n  ") << "],\n  \"slopes\": [";
    for (std::size_t i = 0; i < result.summaries.size(); ++i) {
        const auto& s = result.summaries[i];
        out << (i ? "," : "") << "\n    {\"complete\": " << (s.complete ? "true" : "false") << ", \"m_upper\": ";
        list(s.m_upper);
        out << ", \"m_used\": ";
        list(s.m_used);
        out << ", \"median_seconds\": ";
        list(s.median_seconds);
        out << ", \"method\": \"" << s.method << "\", \"slope\": ";
        if (std::isfinite(s.slope))
            out << io::format_double(s.slope);
        else
            out << "null";
        out << '}';
    }
    out << (result.summaries.empty() ? "" : "\n  ") << "]\n}\n";
    return out.str();
}

}  // namespace oilmm::bench
