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

#include <doctest.h>

#include <cmath>

#include "oilmm/errors.hpp"
#include "oilmm/learn.hpp"
#include "support/oracles.hpp"

using namespace oilmm;

namespace {

double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).cwiseAbs().maxCoeff(); }

void check_same_model(const OilmmModel& a, const OilmmModel& b, double tol) {
    CHECK((a.basis.U - b.basis.U).cwiseAbs().maxCoeff() <= tol);
    CHECK(max_abs_diff(a.basis.S, b.basis.S) <= tol * b.basis.S.cwiseAbs().maxCoeff());
    CHECK(std::abs(a.noise.sigma2 - b.noise.sigma2) <= tol * b.noise.sigma2);
    CHECK(max_abs_diff(a.noise.D, b.noise.D) <= tol);
    REQUIRE(a.latent_kernels.size() == b.latent_kernels.size());
    for (std::size_t i = 0; i < a.latent_kernels.size(); ++i)
        CHECK(max_abs_diff(log_params(a.latent_kernels[i]), log_params(b.latent_kernels[i])) <= tol);
}

oracles::Instance standard_instance(std::uint64_t seed) {
    oracles::Rng rng(seed);
    return oracles::random_instance(rng, {.p_max = 4, .m_max = 2, .n_max = 8});
}

}  // namespace

TEST_SUITE("learn") {

TEST_CASE("Householder coordinates") {
    CHECK(householder_size(2, 1) == 1);
    CHECK(householder_size(5, 3) == 9);
    CHECK(householder_size(3, 3) == 3);
    SUBCASE("p=2, m=1 decodes to a unit column") {
        for (double w : {-3.0, 0.0, 0.4, 10.0}) {
            const Matrix u = householder_decode(Vector::Constant(1, w), Vector::Ones(1), 2, 1);
            CHECK(u.col(0).norm() == doctest::Approx(1.0).epsilon(1e-15));
        }
    }
    SUBCASE("round trip and orthonormality") {
        oracles::Rng rng(401);
        for (int trial = 0; trial < 100; ++trial) {
            const long p = rng.integer(1, 8);
            const long m = rng.integer(1, p);
            const Matrix u = oracles::haar(p, m, rng);
            Vector signs;
            const Vector coords = householder_encode(u, signs);
            CHECK(coords.size() == householder_size(p, m));
            CHECK((householder_decode(coords, signs, p, m) - u).cwiseAbs().maxCoeff() <= 1e-12);
            const Matrix v = householder_decode(rng.normal_vector(coords.size()) * 3.0, signs, p, m);
            CHECK((v.transpose() * v - Matrix::Identity(m, m)).norm() <= 1e-10);
        }
    }
}

TEST_CASE("encode/decode round trip") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const oracles::Instance inst = standard_instance(seed);
        const ParamVector pv = encode(inst.model, {.learn_D = true});
        CHECK(pv.values.size() == pv.layout.size());
        const OilmmModel back = decode(pv);
        CHECK((back.basis.U - inst.model.basis.U).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(max_abs_diff(back.basis.S, inst.model.basis.S) <= 1e-12);
        CHECK(std::abs(back.noise.sigma2 - inst.model.noise.sigma2) <= 1e-12);
        // Zero D entries are floored before taking logs.
        CHECK(max_abs_diff(back.noise.D, inst.model.noise.D) <= 1e-11 * inst.model.noise.sigma2 + 1e-12);
        for (std::size_t i = 0; i < back.latent_kernels.size(); ++i)
            CHECK(max_abs_diff(log_params(back.latent_kernels[i]), log_params(inst.model.latent_kernels[i])) <= 1e-12);
        check_same_model(decode(encode(inst.model)), inst.model, 1e-12);
    }
}

TEST_CASE("segment layout") {
    const oracles::Instance inst = standard_instance(3);
    const long p = inst.model.p();
    const long m = inst.model.m();
    const ParamVector pv = encode(inst.model);
    CHECK(pv.layout.segment("U").size == householder_size(p, m));
    CHECK(pv.layout.segment("log_S").size == m);
    CHECK(pv.layout.segment("log_sigma2").size == 1);
    CHECK_FALSE(pv.layout.has_segment("log_D"));
    CHECK(encode(inst.model, {.learn_D = true}).layout.segment("log_D").size == m);
    CHECK_THROWS_AS(pv.layout.segment("nope"), ContractError);
    long total = 0;
    for (const auto& seg : pv.layout.segments) {
        CHECK(seg.offset == total);
        total += seg.size;
    }
    CHECK(total == pv.values.size());
}

TEST_CASE("perturbing one S coordinate changes only S") {
    const oracles::Instance inst = standard_instance(5);
    ParamVector pv = encode(inst.model);
    const OilmmModel base = decode(pv);
    pv.values(pv.layout.segment("log_S").offset) += 0.3;
    const OilmmModel moved = decode(pv);
    CHECK(moved.basis.U == base.basis.U);
    CHECK(moved.noise.sigma2 == base.noise.sigma2);
    CHECK(moved.basis.S(0) == doctest::Approx(base.basis.S(0) * std::exp(0.3)).epsilon(1e-14));
    for (long i = 1; i < base.m(); ++i) CHECK(moved.basis.S(i) == base.basis.S(i));
    for (std::size_t i = 0; i < base.latent_kernels.size(); ++i)
        CHECK(moved.latent_kernels[i] == base.latent_kernels[i]);
}

TEST_CASE("nll is the negated evidence and gauge-invariant") {
    for (std::uint64_t seed = 10; seed < 20; ++seed) {
        const oracles::Instance inst = standard_instance(seed);
        const ParamVector pv = encode(inst.model);
        CHECK(nll(pv, inst.data) == -log_likelihood(decode(pv), inst.data).total);
        const double again = nll(encode(decode(pv)), inst.data);
        CHECK(std::abs(again - nll(pv, inst.data)) <= 1e-12 * std::max(1.0, std::abs(again)));
    }
}

TEST_CASE("nll sweep stays NaN-free") {
    const oracles::Instance inst = standard_instance(21);
    const ParamVector pv = encode(inst.model, {.learn_D = true});
    for (long j = 0; j < pv.values.size(); ++j) {
        for (double delta : {-10.0, -5.0, -1.0, 1.0, 5.0, 10.0}) {
            ParamVector moved = pv;
            moved.values(j) += delta;
            double v = 0.0;
            CHECK_NOTHROW(v = nll(moved, inst.data));
            CHECK_FALSE(std::isnan(v));
        }
    }
}

TEST_CASE("vanishing noise is penalized on noisy data") {
    oracles::Rng rng(23);
    const oracles::Instance inst = standard_instance(23);
    const OilmmModel& truth = inst.model;
    const Vector t = oracles::sorted_times(30, rng);
    const Dataset d = Dataset::from_matrix(t, simulate(truth, t, 99));
    ParamVector pv = encode(truth);
    const long at = pv.layout.segment("log_sigma2").offset;
    const double ref = nll(pv, d);
    double prev = ref;
    for (double shift : {-2.0, -4.0, -8.0, -16.0}) {
        ParamVector low = pv;
        low.values(at) += shift;
        const double v = nll(low, d);
        CHECK(v > ref);
        CHECK(v > prev - 1e-9);
        prev = v;
    }
}

TEST_CASE("finite differences on a hand-built quadratic") {
    const auto f = [](const Vector& x) { return 3.0 * (x(0) - 1.0) * (x(0) - 1.0) + 2.0 * x(1); };
    Vector x(2);
    x << 0.25, -7.0;
    const Vector g = finite_difference_gradient(f, x);
    CHECK(std::abs(g(0) - 6.0 * (x(0) - 1.0)) <= 1e-6);
    CHECK(std::abs(g(1) - 2.0) <= 1e-6);
    CHECK(finite_difference_gradient(f, x, Execution::Serial) == g);
}

TEST_CASE("analytic gradients agree with finite differences") {
    for (std::uint64_t seed = 30; seed < 40; ++seed) {
        const oracles::Instance inst = standard_instance(seed);
        const ParamVector pv = encode(inst.model, {.learn_D = seed % 2 == 0});
        const Vector fd = grad_nll(pv, inst.data, GradientMode::FiniteDifference);
        const Vector an = grad_nll(pv, inst.data, GradientMode::AnalyticKernelOnly);
        REQUIRE(fd.size() == an.size());
        const long u = pv.layout.segment("U").size;
        for (long j = u; j < fd.size(); ++j)
            CHECK(std::abs(an(j) - fd(j)) <= 1e-4 * std::max(1.0, std::abs(fd(j))));
        // U coordinates are finite differences in both modes.
        for (long j = 0; j < u; ++j) CHECK(an(j) == fd(j));
    }
}

TEST_CASE("gradient vanishes at the closed-form noise optimum") {
    // p = m = 1 with widely spaced times: y_t are iid N(0, S + sigma2), whose
    // evidence is stationary when S + sigma2 equals the mean square.
    oracles::Rng rng(41);
    const long n = 40;
    const Vector t = Vector::LinSpaced(n, 0.0, 1000.0 * (n - 1));
    Matrix y = rng.normal_matrix(1, n) * 1.7;
    const double ms = y.squaredNorm() / n;
    const OilmmModel model = OilmmModel::create(OrthogonalBasis::create(Matrix::Ones(1, 1), Vector::Constant(1, 0.5 * ms)),
                                                NoiseModel::isotropic(0.5 * ms, 1), {KernelSpec::matern32(1.0)});
    const Dataset d = Dataset::from_matrix(t, y);
    const ParamVector pv = encode(model);
    CHECK(grad_nll(pv, d, GradientMode::AnalyticKernelOnly).cwiseAbs().maxCoeff() <= 1e-5);
    CHECK(grad_nll(pv, d, GradientMode::FiniteDifference).cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("fit") {
    const oracles::Instance inst = standard_instance(50);
    oracles::Rng rng(50);
    const Vector t = oracles::sorted_times(25, rng);
    const Dataset d = Dataset::from_matrix(t, simulate(inst.model, t, 7));

    SUBCASE("zero iterations return the start model") {
        const FitResult r = fit(inst.model, d, {.max_iters = 0});
        check_same_model(r.model, inst.model, 1e-12);
        CHECK(r.iterations == 0);
        CHECK(r.trace.size() == 1);
    }
    SUBCASE("accepted steps never increase the objective") {
        for (OptimizerKind kind : {OptimizerKind::Adam, OptimizerKind::Lbfgs}) {
            const FitResult r = fit(inst.model, d, {.max_iters = 40, .optimizer = kind,
                                                    .gradient = GradientMode::AnalyticKernelOnly});
            REQUIRE_FALSE(r.trace.empty());
            for (std::size_t i = 1; i < r.trace.size(); ++i) CHECK(r.trace[i] <= r.trace[i - 1]);
            CHECK(-log_likelihood(r.model, d).total <= -log_likelihood(inst.model, d).total + 1e-9);
            CHECK_FALSE(r.diverged);
        }
    }
    SUBCASE("runs are deterministic") {
        const FitOptions opts{.max_iters = 15, .seed = 3};
        CHECK(fit(inst.model, d, opts).trace == fit(inst.model, d, opts).trace);
        FitOptions serial = opts;
        serial.exec = Execution::Serial;
        CHECK(fit(inst.model, d, serial).trace == fit(inst.model, d, opts).trace);
    }
}

TEST_CASE("initialization") {
    oracles::Rng rng(61);
    const Matrix u = oracles::haar(5, 2, rng);
    Vector s(2);
    s << 9.0, 4.0;
    const OilmmModel truth = OilmmModel::create(OrthogonalBasis::create(u, s), NoiseModel::isotropic(0.05, 2),
                                                {KernelSpec::eq(0.5), KernelSpec::eq(0.5)});
    const Vector t = Vector::LinSpaced(200, 0.0, 20.0);
    const Dataset d = Dataset::from_matrix(t, simulate(truth, t, 4));
    const OilmmModel init = initialize_model(d, 2, {KernelSpec::matern52(7.0)});
    CHECK(init.m() == 2);
    CHECK(init.latent_kernels.size() == 2);
    CHECK(init.latent_kernels[1].lengthscale == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(init.noise.sigma2 > 0.0);
    CHECK(principal_angles(init.basis.U, u).maxCoeff() <= 0.3);
    CHECK_THROWS_AS(initialize_model(d, 6, {KernelSpec::eq(1.0)}), ContractError);
}

}  // TEST_SUITE
