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

#include "oilmm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "oilmm/errors.hpp"

namespace oilmm::oracle {

namespace {

struct ObservedIndex {
    long time;
    long output;
};

// Observed entries in time-major order.
std::vector<ObservedIndex> observed_entries(const Dataset& data) {
    std::vector<ObservedIndex> out;
    for (long a = 0; a < data.n(); ++a)
        for (long k = 0; k < data.p(); ++k)
            if (data.mask(k, a)) out.push_back({a, k});
    return out;
}

void check_inputs(const DenseIlmm& model, const Dataset& data, long size, long cap) {
    model.validate();
    data.validate();
    if (data.p() != model.H.p())
        throw ContractError("oracle: dataset has " + std::to_string(data.p()) + " outputs, model has " +
                            std::to_string(model.H.p()));
    if (size > cap)
        throw ContractError("oracle: joint size " + std::to_string(size) + " exceeds the cap of " +
                            std::to_string(cap));
}

// Latent kernel matrices between two time vectors, one per latent.
std::vector<Matrix> latent_cross(const DenseIlmm& model, const Vector& a, const Vector& b) {
    std::vector<Matrix> out;
    out.reserve(model.latent_kernels.size());
    for (const auto& k : model.latent_kernels) out.push_back(cross_kernel_matrix(k, a, b));
    return out;
}

// cov(y_k(t_a), y_l(t_b)) without noise: sum_i H_ki H_li k_i(t_a, t_b).
Matrix signal_block(const Matrix& h, const std::vector<Matrix>& ks, long a, long b) {
    Matrix out = Matrix::Zero(h.rows(), h.rows());
    for (std::size_t i = 0; i < ks.size(); ++i) {
        const long col = static_cast<long>(i);
        out.noalias() += ks[i](a, b) * h.col(col) * h.col(col).transpose();
    }
    return out;
}

Matrix observed_covariance(const DenseIlmm& model, const Dataset& data, const std::vector<ObservedIndex>& idx) {
    const long n = data.n();
    const std::vector<Matrix> ks = latent_cross(model, data.times, data.times);
    // Full time-major covariance, then row/column deletion.
    const long p = data.p();
    Matrix full(n * p, n * p);
    for (long a = 0; a < n; ++a) {
        for (long b = 0; b <= a; ++b) {
            Matrix blk = signal_block(model.H.H, ks, a, b);
            if (a == b) blk += model.Sigma;
            full.block(a * p, b * p, p, p) = blk;
            full.block(b * p, a * p, p, p) = blk.transpose();
        }
    }
    const long size = static_cast<long>(idx.size());
    Matrix c(size, size);
    for (long r = 0; r < size; ++r) {
        const long fr = idx[static_cast<std::size_t>(r)].time * p + idx[static_cast<std::size_t>(r)].output;
        for (long s = 0; s < size; ++s) {
            const long fs = idx[static_cast<std::size_t>(s)].time * p + idx[static_cast<std::size_t>(s)].output;
            c(r, s) = full(fr, fs);
        }
    }
    return c;
}

Vector observed_values(const Dataset& data, const std::vector<ObservedIndex>& idx) {
    Vector y(static_cast<long>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) y(static_cast<long>(r)) = data.Y(idx[r].output, idx[r].time);
    return y;
}

// Coupled latent covariance for projected data: time-major blocks of size m,
// K_x(a, b) = diag_i k_i(t_a, t_b), plus Sigma_T on the diagonal blocks.
void fill_coupled_covariance(Eigen::Ref<Matrix> c, const std::vector<Matrix>& ks, const Matrix& sigma_t) {
    const long m = sigma_t.rows();
    const long n = ks.empty() ? 0 : ks.front().rows();
    c.setZero();
    for (long a = 0; a < n; ++a) {
        for (long b = 0; b < n; ++b)
            for (long i = 0; i < m; ++i) c(a * m + i, b * m + i) = ks[static_cast<std::size_t>(i)](a, b);
        c.block(a * m, a * m, m, m) += sigma_t;
    }
}

void check_fully_observed(const Dataset& data, const char* what) {
    if (!data.fully_observed())
        throw ContractError(std::string(what) + ": projected oracle paths need fully observed data");
}

}  // namespace

DenseIlmm DenseIlmm::from_oilmm(const OilmmModel& model) {
    model.validate();
    DenseIlmm out;
    if (model.noise.heterogeneous) {
        const WhitenedBasis wb = whiten_basis(model.noise, model.basis);
        out.H = wb.general;
        out.Sigma = wb.Sigma(model.noise.sigma2);
    } else {
        out.H = GeneralBasis::create(model.basis.H());
        out.Sigma = noise_covariance(model.basis, model.noise);
    }
    out.latent_kernels = model.latent_kernels;
    return out;
}

void DenseIlmm::validate() const {
    if (static_cast<long>(latent_kernels.size()) != H.m())
        throw ContractError("oracle: " + std::to_string(latent_kernels.size()) + " latent kernels for m=" +
                            std::to_string(H.m()));
    if (Sigma.rows() != H.p() || Sigma.cols() != H.p()) throw ContractError("oracle: Sigma must be p x p");
    for (const auto& k : latent_kernels) oilmm::validate(k);
}

double dense_evidence(const DenseIlmm& model, const Dataset& data, long cap) {
    const std::vector<ObservedIndex> idx = observed_entries(data);
    check_inputs(model, data, static_cast<long>(idx.size()), cap);
    if (idx.empty()) return 0.0;
    const Matrix c = observed_covariance(model, data, idx);
    return gaussian_logpdf(observed_values(data, idx), cholesky_with_jitter(c));
}

DensePosterior dense_posterior(const DenseIlmm& model, const Dataset& data, const Vector& query_times, long cap) {
    const std::vector<ObservedIndex> idx = observed_entries(data);
    check_inputs(model, data, static_cast<long>(idx.size()), cap);
    const Matrix& h = model.H.H;
    const long p = h.rows();
    const long q = query_times.size();
    const long size = static_cast<long>(idx.size());

    DensePosterior out;
    out.mean = Matrix::Zero(p, q);
    out.variance.resize(p, q);
    const std::vector<Matrix> kqq = latent_cross(model, query_times, query_times);
    for (long s = 0; s < q; ++s) out.variance.col(s) = signal_block(h, kqq, s, s).diagonal();
    if (size == 0) return out;

    const Matrix c = observed_covariance(model, data, idx);
    const Cholesky chol = cholesky_with_jitter(c);
    const Vector alpha = chol.solve(observed_values(data, idx));
    const std::vector<Matrix> kqy = latent_cross(model, query_times, data.times);

    for (long s = 0; s < q; ++s) {
        // Rows: outputs at query s; columns: observed entries.
        Matrix cross(p, size);
        for (long r = 0; r < size; ++r) {
            const ObservedIndex& o = idx[static_cast<std::size_t>(r)];
            cross.col(r) = signal_block(h, kqy, s, o.time).col(o.output);
        }
        out.mean.col(s) = cross * alpha;
        const Matrix z = chol.lower().solve(cross.transpose());
        out.variance.col(s) -= z.cwiseAbs2().colwise().sum().transpose();
    }
    return out;
}

DensePosterior projected_posterior(const DenseIlmm& model, const Dataset& data, const Vector& query_times,
                                   long cap) {
    check_fully_observed(data, "projected_posterior");
    const long m = model.H.m();
    const long n = data.n();
    check_inputs(model, data, n * m, cap);
    const Projection proj = build_general_projection(model.H, model.Sigma);
    const Matrix& h = model.H.H;
    const long p = h.rows();
    const long q = query_times.size();

    DensePosterior out;
    out.mean = Matrix::Zero(p, q);
    out.variance.resize(p, q);
    const std::vector<Matrix> kqq = latent_cross(model, query_times, query_times);
    for (long s = 0; s < q; ++s) out.variance.col(s) = signal_block(h, kqq, s, s).diagonal();
    if (n == 0) return out;

    const Matrix z = proj.T * data.Y;  // m x n
    const Vector zvec = Eigen::Map<const Vector>(z.data(), n * m);  // time-major
    Matrix c(n * m, n * m);
    fill_coupled_covariance(c, latent_cross(model, data.times, data.times), proj.SigmaT);
    const Cholesky chol = cholesky_with_jitter(c);
    const Vector alpha = chol.solve(zvec);
    const std::vector<Matrix> kqz = latent_cross(model, query_times, data.times);

    for (long s = 0; s < q; ++s) {
        // cov(x(t_s), z): m x nm, nonzero only where latent indices agree.
        Matrix cross = Matrix::Zero(m, n * m);
        for (long a = 0; a < n; ++a)
            for (long i = 0; i < m; ++i) cross(i, a * m + i) = kqz[static_cast<std::size_t>(i)](s, a);
        const Vector mu = cross * alpha;
        const Matrix w = chol.lower().solve(cross.transpose());
        Matrix cov = -w.transpose() * w;
        for (long i = 0; i < m; ++i) cov(i, i) += kqq[static_cast<std::size_t>(i)](s, s);
        out.mean.col(s) = h * mu;
        out.variance.col(s) = (h * cov * h.transpose()).diagonal();
    }
    return out;
}

double projected_evidence(const DenseIlmm& model, const Dataset& data, long cap) {
    check_fully_observed(data, "projected_evidence");
    const long m = model.H.m();
    const long n = data.n();
    const long p = model.H.p();
    check_inputs(model, data, n * m, cap);
    if (n == 0) return 0.0;
    const Projection proj = build_general_projection(model.H, model.Sigma);
    const Matrix z = proj.T * data.Y;

    // Per-column corrections log N(y | 0, Sigma) - log N(T y | 0, Sigma_T).
    const Cholesky sigma_chol = cholesky_exact(model.Sigma);
    const Cholesky sigma_t_chol = cholesky_exact(proj.SigmaT);
    const Matrix ry = sigma_chol.lower().solve(data.Y);
    const Matrix rz = sigma_t_chol.lower().solve(z);
    const double dn = static_cast<double>(n);
    double total = -0.5 * dn * (static_cast<double>(p - m) * kLog2Pi + sigma_chol.log_det() - sigma_t_chol.log_det()) -
                   0.5 * (ry.squaredNorm() - rz.squaredNorm());

    // Coupled evidence of T Y, factorized in place.
    const std::vector<Matrix> ks = latent_cross(model, data.times, data.times);
    const Vector zvec = Eigen::Map<const Vector>(z.data(), n * m);
    Matrix c(n * m, n * m);
    fill_coupled_covariance(c, ks, proj.SigmaT);
    Eigen::LLT<Eigen::Ref<Matrix>> llt(c);
    if (llt.info() != Eigen::Success) {
        fill_coupled_covariance(c, ks, proj.SigmaT);
        const Cholesky chol = cholesky_with_jitter(c);
        return total + gaussian_logpdf(zvec, chol);
    }
    const Vector w = llt.matrixL().solve(zvec);
    const double log_det = 2.0 * c.diagonal().array().log().sum();
    total += -0.5 * (static_cast<double>(n * m) * kLog2Pi + log_det + w.squaredNorm());
    return total;
}

double kl_between_ilmms(const GeneralBasis& H, const GeneralBasis& H2, double sigma2, long n) {
    if (H.p() != H2.p() || H.m() != H2.m())
        throw ContractError("kl_between_ilmms: bases must have equal shapes");
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
        throw ParameterDomainError("kl_between_ilmms: sigma2 must be positive");
    if (n < 0) throw ContractError("kl_between_ilmms: n must be nonnegative");
    return static_cast<double>(n) * (H.H - H2.H).squaredNorm() / (2.0 * sigma2);
}

KlBound kl_oilmm_bound(const GeneralBasis& H, double sigma2, long n, double prior_trace) {
    const GeneralBasis checked = GeneralBasis::create(H.H);
    if (!(prior_trace >= 0.0) || !std::isfinite(prior_trace))
        throw ParameterDomainError("kl_oilmm_bound: prior_trace must be nonnegative");
    const long m = checked.m();
    Eigen::JacobiSVD<Matrix> svd(checked.H, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Matrix& u = svd.matrixU();
    const Vector& s = svd.singularValues();
    const Matrix& v = svd.matrixV();

    // The SVD is unique only up to a signed permutation; pick the one that
    // brings V closest to the identity. Exhaustive for small m.
    std::vector<long> perm(static_cast<std::size_t>(m));
    std::iota(perm.begin(), perm.end(), 0L);
    std::vector<long> best = perm;
    auto score = [&](const std::vector<long>& pi) {
        double t = 0.0;
        for (long k = 0; k < m; ++k) t += std::abs(v(k, pi[static_cast<std::size_t>(k)]));
        return t;
    };
    if (m <= 8) {
        double best_score = score(perm);
        while (std::next_permutation(perm.begin(), perm.end())) {
            const double sc = score(perm);
            if (sc > best_score + 1e-15) {
                best_score = sc;
                best = perm;
            }
        }
    }

    Matrix h_hat(checked.p(), m);
    Matrix v_hat(m, m);
    for (long k = 0; k < m; ++k) {
        const long src = best[static_cast<std::size_t>(k)];
        const double sign = v(k, src) < 0.0 ? -1.0 : 1.0;
        h_hat.col(k) = sign * s(src) * u.col(src);
        v_hat.col(k) = sign * v.col(src);
    }
    KlBound out;
    out.achieved = kl_between_ilmms(checked, GeneralBasis{h_hat}, sigma2, n);
    const double dist = (Matrix::Identity(m, m) - v_hat).squaredNorm();
    out.bound = static_cast<double>(n) * prior_trace * dist / (2.0 * sigma2);
    return out;
}

}  // namespace oilmm::oracle
