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

// Evidence evaluation: OILMM with serial and parallel latent loops, and the
// dense ILMM comparator. Arguments are {n, p, m}.

#include <benchmark/benchmark.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "oilmm/model.hpp"
#include "oilmm/oracle.hpp"

namespace {

using oilmm::Matrix;
using oilmm::Vector;

oilmm::Dataset synthetic(long n, long p, std::mt19937_64& gen) {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> uniform(0.0, 10.0);
    Vector t(n);
    for (long j = 0; j < n; ++j) t(j) = uniform(gen);
    std::sort(t.data(), t.data() + n);
    Matrix y(p, n);
    for (long j = 0; j < n; ++j)
        for (long i = 0; i < p; ++i) y(i, j) = normal(gen);
    return oilmm::Dataset::from_matrix(t, y);
}

Matrix gaussian(long r, long c, std::mt19937_64& gen) {
    std::normal_distribution<double> normal;
    Matrix a(r, c);
    for (long j = 0; j < c; ++j)
        for (long i = 0; i < r; ++i) a(i, j) = normal(gen);
    return a;
}

oilmm::OilmmModel oilmm_model(long p, long m, std::mt19937_64& gen) {
    const Eigen::HouseholderQR<Matrix> qr(gaussian(p, m, gen));
    const Matrix u = qr.householderQ() * Matrix::Identity(p, m);
    return oilmm::OilmmModel::create(oilmm::OrthogonalBasis::create(u, Vector::Ones(m)),
                                     oilmm::NoiseModel::isotropic(0.1, m),
                                     std::vector<oilmm::KernelSpec>(static_cast<std::size_t>(m), oilmm::KernelSpec::matern52(1.0)));
}

void run_oilmm(benchmark::State& state, oilmm::Execution exec) {
    const long n = state.range(0), p = state.range(1), m = state.range(2);
    std::mt19937_64 gen(static_cast<std::uint64_t>(m));
    const oilmm::Dataset data = synthetic(n, p, gen);
    const oilmm::OilmmModel model = oilmm_model(p, m, gen);
    for (auto _ : state) benchmark::DoNotOptimize(oilmm::log_likelihood(model, data, exec).total);
    state.SetComplexityN(m);
}

void BM_OilmmSerial(benchmark::State& state) { run_oilmm(state, oilmm::Execution::Serial); }
void BM_OilmmParallel(benchmark::State& state) { run_oilmm(state, oilmm::Execution::Parallel); }

void BM_DenseIlmm(benchmark::State& state) {
    const long n = state.range(0), p = state.range(1), m = state.range(2);
    std::mt19937_64 gen(static_cast<std::uint64_t>(m));
    const oilmm::Dataset data = synthetic(n, p, gen);
    oilmm::oracle::DenseIlmm model{oilmm::GeneralBasis::create(gaussian(p, m, gen) / std::sqrt(static_cast<double>(p))),
                                   0.1 * Matrix::Identity(p, p),
                                   std::vector<oilmm::KernelSpec>(static_cast<std::size_t>(m), oilmm::KernelSpec::matern52(1.0))};
    for (auto _ : state)
        benchmark::DoNotOptimize(oilmm::oracle::projected_evidence(model, data, std::numeric_limits<long>::max()));
    state.SetComplexityN(m);
}

void oilmm_grid(benchmark::internal::Benchmark* b) {
    for (long m : {4, 8, 16, 32, 64}) b->Args({500, 200, m});
    b->Unit(benchmark::kMillisecond)->Complexity(benchmark::oN);
}

void dense_grid(benchmark::internal::Benchmark* b) {
    for (long m : {1, 2, 4, 8}) b->Args({250, 100, m});
    b->Unit(benchmark::kMillisecond)->Complexity(benchmark::oNCubed);
}

}  // namespace

BENCHMARK(BM_OilmmSerial)->Apply(oilmm_grid);
BENCHMARK(BM_OilmmParallel)->Apply(oilmm_grid)->UseRealTime();
BENCHMARK(BM_DenseIlmm)->Apply(dense_grid);

BENCHMARK_MAIN();
