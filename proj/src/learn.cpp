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

#include "oilmm/learn.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <string>

#include "oilmm/errors.hpp"

namespace oilmm {

namespace {

constexpr double kDFloor = 1e-12;

std::string kernel_segment_name(long i) { return "kernel_" + std::to_string(i); }

// Free log parameters of a normalized kernel: all but the pinned one.
Vector free_log_params(const KernelSpec& k) {
    const Vector all = log_params(k);
    const long pin = static_cast<long>(normalizing_param_index(k));
    Vector out(all.size() - 1);
    out << all.head(pin), all.tail(all.size() - pin - 1);
    return out;
}

KernelSpec kernel_from_free(const KernelSpec& templ, const Eigen::Ref<const Vector>& free) {
    Vector all = log_params(templ);
    const long pin = static_cast<long>(normalizing_param_index(templ));
    all.head(pin) = free.head(pin);
    all.tail(all.size() - pin - 1) = free.tail(free.size() - pin);
    return normalize_unit_variance(with_log_params(templ, std::span<const double>(all.data(), all.size())));
}

double safe_nll(const ParamLayout& layout, const Vector& x, const Dataset& data) {
    if (!x.allFinite()) return std::numeric_limits<double>::infinity();
    try {
        const OilmmModel model = decode(layout, x);
        const double v = -log_likelihood(model, data, Execution::Serial).total;
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
    } catch (const NumericalError&) {
        return std::numeric_limits<double>::infinity();
    } catch (const ParameterDomainError&) {
        return std::numeric_limits<double>::infinity();
    }
}

void set_leaf_lengthscales(KernelSpec& k, double ell) {
    if (k.is_leaf()) {
        if (k.family != KernelFamily::Periodic) k.lengthscale = ell;
        return;
    }
    for (auto& c : k.children) set_leaf_lengthscales(c, ell);
}

}  // namespace

long ParamLayout::size() const {
    long total = 0;
    for (const auto& s : segments) total += s.size;
    return total;
}

const ParamSegment& ParamLayout::segment(const std::string& name) const {
    for (const auto& s : segments)
        if (s.name == name) return s;
    throw ContractError("parameter layout has no segment named '" + name + "'");
}

bool ParamLayout::has_segment(const std::string& name) const {
    return std::any_of(segments.begin(), segments.end(), [&](const ParamSegment& s) { return s.name == name; });
}

long householder_size(long p, long m) { return p * m - m * (m + 1) / 2; }

Vector householder_encode(const Matrix& U, Vector& signs) {
    const long p = U.rows();
    const long m = U.cols();
    if (m > p) throw ContractError("householder_encode: need m <= p");
    Vector coords(householder_size(p, m));
    signs.resize(m);
    Matrix a = U;
    long offset = 0;
    for (long j = 0; j < m; ++j) {
        const long len = p - j;
        const Vector x = a.col(j).tail(len);
        const double s = x(0) < 0.0 ? -1.0 : 1.0;
        Vector v = x;
        v(0) += s * x.norm();
        const Vector w = v.tail(len - 1) / v(0);
        coords.segment(offset, len - 1) = w;
        offset += len - 1;
        // Apply the reflector to the trailing columns.
        Vector vn(len);
        vn << 1.0, w;
        const double tau = 2.0 / vn.squaredNorm();
        auto rows = a.bottomRightCorner(len, m - j);
        rows -= tau * vn * (vn.transpose() * rows);
        signs(j) = -s;
    }
    return coords;
}

Matrix householder_decode(const Vector& coords, const Vector& signs, long p, long m) {
    if (coords.size() != householder_size(p, m) || signs.size() != m)
        throw ContractError("householder_decode: dimension mismatch");
    Matrix q = Matrix::Identity(p, m);
    std::vector<long> offsets(static_cast<std::size_t>(m), 0);
    for (long j = 1; j < m; ++j) offsets[static_cast<std::size_t>(j)] = offsets[static_cast<std::size_t>(j - 1)] + (p - j);
    for (long j = m - 1; j >= 0; --j) {
        const long len = p - j;
        Vector v(len);
        v << 1.0, coords.segment(offsets[static_cast<std::size_t>(j)], len - 1);
        const double tau = 2.0 / v.squaredNorm();
        auto rows = q.bottomRows(len);
        rows -= tau * v * (v.transpose() * rows);
    }
    return q * signs.asDiagonal();
}

ParamVector encode(const OilmmModel& model, EncodeOptions opts) {
    model.validate();
    const long p = model.p();
    const long m = model.m();
    if (opts.learn_D && model.noise.heterogeneous)
        throw ContractError("encode: D cannot be learned together with heterogeneous noise");

    ParamVector out;
    ParamLayout& layout = out.layout;
    layout.p = p;
    layout.m = m;
    layout.learn_D = opts.learn_D;
    layout.kernel_templates = model.latent_kernels;
    layout.heterogeneous = model.noise.heterogeneous;
    if (!opts.learn_D) layout.fixed_D = model.noise.D;

    std::vector<Vector> parts;
    auto add = [&](const std::string& name, Vector v) {
        layout.segments.push_back({name, layout.size(), v.size()});
        parts.push_back(std::move(v));
    };
    add("U", householder_encode(model.basis.U, layout.column_signs));
    add("log_S", model.basis.S.array().log().matrix());
    add("log_sigma2", Vector::Constant(1, std::log(model.noise.sigma2)));
    if (opts.learn_D) {
        Vector d = model.noise.D.size() == m ? model.noise.D : Vector::Zero(m);
        d = d.cwiseMax(kDFloor * model.noise.sigma2);
        add("log_D", d.array().log().matrix());
    }
    for (long i = 0; i < m; ++i)
        add(kernel_segment_name(i), free_log_params(model.latent_kernels[static_cast<std::size_t>(i)]));

    out.values.resize(layout.size());
    long offset = 0;
    for (const auto& v : parts) {
        out.values.segment(offset, v.size()) = v;
        offset += v.size();
    }
    return out;
}

OilmmModel decode(const ParamVector& params) { return decode(params.layout, params.values); }

OilmmModel decode(const ParamLayout& layout, const Vector& values) {
    if (values.size() != layout.size())
        throw ContractError("decode: parameter vector has " + std::to_string(values.size()) +
                            " entries, layout expects " + std::to_string(layout.size()));
    const long m = layout.m;
    auto seg = [&](const std::string& name) {
        const ParamSegment& s = layout.segment(name);
        return values.segment(s.offset, s.size);
    };
    OilmmModel model;
    model.basis.U = householder_decode(seg("U"), layout.column_signs, layout.p, m);
    model.basis.S = seg("log_S").array().exp().matrix();
    model.noise.sigma2 = std::exp(seg("log_sigma2")(0));
    if (layout.learn_D)
        model.noise.D = seg("log_D").array().exp().matrix();
    else
        model.noise.D = layout.fixed_D.size() == m ? layout.fixed_D : Vector::Zero(m);
    model.noise.heterogeneous = layout.heterogeneous;
    model.latent_kernels.reserve(static_cast<std::size_t>(m));
    for (long i = 0; i < m; ++i)
        model.latent_kernels.push_back(
            kernel_from_free(layout.kernel_templates[static_cast<std::size_t>(i)], seg(kernel_segment_name(i))));
    if (!(model.basis.S.array() > 0.0).all() || !(model.noise.sigma2 > 0.0))
        throw ParameterDomainError("decode: S and sigma2 must be positive");
    model.validate();
    return model;
}

double nll(const ParamVector& params, const Dataset& data) {
    return -log_likelihood(decode(params), data).total;
}

Vector finite_difference_gradient(const std::function<double(const Vector&)>& f, const Vector& x, Execution exec) {
    Vector g(x.size());
    parallel_for(x.size(), exec, [&](long c) {
        const double h = 1e-6 * (1.0 + std::abs(x(c)));
        Vector xp = x;
        Vector xm = x;
        xp(c) += h;
        xm(c) -= h;
        g(c) = (f(xp) - f(xm)) / (2.0 * h);
    });
    return g;
}

Vector grad_nll(const ParamVector& params, const Dataset& data, GradientMode mode, Execution exec) {
    const ParamLayout& layout = params.layout;
    auto objective = [&](const Vector& x) {
        return -log_likelihood(decode(layout, x), data, Execution::Serial).total;
    };
    if (mode == GradientMode::FiniteDifference) return finite_difference_gradient(objective, params.values, exec);

    const OilmmModel model = decode(params);
    const ProjectedData pd = project_dataset(model, data);
    const long m = model.m();
    const double sigma2 = model.noise.sigma2;
    const Vector& S = model.basis.S;

    std::vector<LatentLmlGradient> lg(static_cast<std::size_t>(m));
    parallel_for(m, exec, [&](long i) {
        LatentObservations obs;
        obs.times = pd.times;
        obs.values = pd.values.row(i).transpose();
        obs.noise = pd.noise.row(i).transpose();
        lg[static_cast<std::size_t>(i)] = log_marginal_gradient(model.latent_kernels[static_cast<std::size_t>(i)], obs);
    });

    // Gradient of the log likelihood; negated at the end.
    Vector g = Vector::Zero(layout.size());
    const double n_kept = static_cast<double>(pd.times.size());
    const ParamSegment& s_seg = layout.segment("log_S");
    double d_sigma = -0.5 * pd.residual_dof + pd.residual_energy / (2.0 * sigma2);
    for (long i = 0; i < m; ++i) {
        const LatentLmlGradient& gi = lg[static_cast<std::size_t>(i)];
        const Vector a = pd.gram_diag.row(i).transpose();
        const Vector y = pd.values.row(i).transpose();
        // values scale as S^{-1/2}; projected noise has a sigma2 a / S part.
        const double noise_part = gi.noise.dot(a) * sigma2 / S(i);
        g(s_seg.offset + i) = -0.5 * gi.values.dot(y) - noise_part - 0.5 * n_kept;
        d_sigma += noise_part;
        if (layout.learn_D) g(layout.segment("log_D").offset + i) = gi.noise.sum() * model.noise.D(i);

        const KernelSpec& k = model.latent_kernels[static_cast<std::size_t>(i)];
        const std::size_t np = num_params(k);
        std::vector<double> g0(np);
        eval_kernel_log_grad(k, 0.0, 0.0, g0);
        const long pin = static_cast<long>(normalizing_param_index(k));
        const ParamSegment& kseg = layout.segment(kernel_segment_name(i));
        long c = 0;
        for (long q = 0; q < static_cast<long>(np); ++q) {
            if (q == pin) continue;
            g(kseg.offset + c) = gi.kernel(q) - gi.kernel(pin) * g0[static_cast<std::size_t>(q)];
            ++c;
        }
    }
    g(layout.segment("log_sigma2").offset) = d_sigma;
    g = -g;

    const ParamSegment& u_seg = layout.segment("U");
    parallel_for(u_seg.size, exec, [&](long c) {
        const long idx = u_seg.offset + c;
        const double h = 1e-6 * (1.0 + std::abs(params.values(idx)));
        Vector xp = params.values;
        Vector xm = params.values;
        xp(idx) += h;
        xm(idx) -= h;
        g(idx) = (objective(xp) - objective(xm)) / (2.0 * h);
    });
    return g;
}

namespace {

struct Optimizer {
    const ParamLayout& layout;
    const Dataset& data;
    const FitOptions& opts;

    double value(const Vector& x) const { return safe_nll(layout, x, data); }

    Vector gradient(const Vector& x) const {
        try {
            return grad_nll(ParamVector{layout, x}, data, opts.gradient, opts.exec);
        } catch (const NumericalError&) {
            return Vector::Constant(x.size(), std::numeric_limits<double>::quiet_NaN());
        }
    }

    bool small_change(double before, double after) const {
        return before - after <= opts.tolerance * std::max(1.0, std::abs(after));
    }
};

void run_adam(const Optimizer& o, Vector& x, double& f, FitResult& res) {
    constexpr double b1 = 0.9;
    constexpr double b2 = 0.999;
    constexpr double eps = 1e-8;
    double lr = o.opts.learning_rate;
    Vector m1 = Vector::Zero(x.size());
    Vector m2 = Vector::Zero(x.size());
    Vector g = o.gradient(x);
    long t = 0;
    int quiet = 0;
    for (long it = 0; it < o.opts.max_iters; ++it) {
        res.iterations = it + 1;
        if (!g.allFinite()) {
            res.diverged = true;
            return;
        }
        ++t;
        m1 = b1 * m1 + (1.0 - b1) * g;
        m2 = b2 * m2 + (1.0 - b2) * g.cwiseAbs2();
        const Vector mhat = m1 / (1.0 - std::pow(b1, static_cast<double>(t)));
        const Vector vhat = m2 / (1.0 - std::pow(b2, static_cast<double>(t)));
        const Vector cand = x - lr * mhat.cwiseQuotient((vhat.cwiseSqrt().array() + eps).matrix());
        const double fc = o.value(cand);
        if (fc < f) {
            quiet = o.small_change(f, fc) ? quiet + 1 : 0;
            x = cand;
            f = fc;
            res.trace.push_back(f);
            if (quiet >= 10) {
                res.converged = true;
                return;
            }
            g = o.gradient(x);
        } else {
            lr *= 0.5;
            if (lr < 1e-10) {
                res.converged = true;
                return;
            }
        }
    }
}

void run_lbfgs(const Optimizer& o, Vector& x, double& f, FitResult& res) {
    constexpr std::size_t history = 10;
    constexpr double c1 = 1e-4;
    std::deque<Vector> ss;
    std::deque<Vector> ys;
    Vector g = o.gradient(x);
    for (long it = 0; it < o.opts.max_iters; ++it) {
        res.iterations = it + 1;
        if (!g.allFinite()) {
            res.diverged = true;
            return;
        }
        if (g.cwiseAbs().maxCoeff() <= 1e-10) {
            res.converged = true;
            return;
        }
        // Two-loop recursion.
        Vector d = -g;
        std::vector<double> alpha(ss.size());
        for (std::size_t k = ss.size(); k-- > 0;) {
            alpha[k] = ss[k].dot(d) / ys[k].dot(ss[k]);
            d -= alpha[k] * ys[k];
        }
        if (!ss.empty()) d *= ss.back().dot(ys.back()) / ys.back().squaredNorm();
        for (std::size_t k = 0; k < ss.size(); ++k) {
            const double beta = ys[k].dot(d) / ys[k].dot(ss[k]);
            d += (alpha[k] - beta) * ss[k];
        }
        double slope = g.dot(d);
        if (!(slope < 0.0)) {
            ss.clear();
            ys.clear();
            d = -g;
            slope = g.dot(d);
        }
        // Keep any single log-space move within one unit.
        double step = std::min(1.0, 1.0 / std::max(d.cwiseAbs().maxCoeff(), 1e-300));
        bool accepted = false;
        Vector cand;
        double fc = f;
        for (int k = 0; k < 40; ++k) {
            cand = x + step * d;
            fc = o.value(cand);
            if (fc < f && fc <= f + c1 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            if (ss.empty()) {
                res.converged = true;
                return;
            }
            ss.clear();
            ys.clear();
            continue;
        }
        const Vector gc = o.gradient(cand);
        const bool small = o.small_change(f, fc);
        const Vector s = cand - x;
        const Vector y = gc - g;
        x = cand;
        f = fc;
        g = gc;
        res.trace.push_back(f);
        if (y.allFinite() && s.dot(y) > 1e-12 * s.norm() * y.norm()) {
            ss.push_back(s);
            ys.push_back(y);
            if (ss.size() > history) {
                ss.pop_front();
                ys.pop_front();
            }
        }
        if (small) {
            res.converged = true;
            return;
        }
    }
}

}  // namespace

FitResult fit(const OilmmModel& model0, const Dataset& data, const FitOptions& opts) {
    model0.validate();
    if (opts.max_iters < 0) throw ContractError("fit: max_iters must be nonnegative");
    FitResult res;
    res.model = model0;
    if (opts.max_iters == 0) {
        res.trace.push_back(-log_likelihood(model0, data, opts.exec).total);
        return res;
    }
    const ParamVector p0 = encode(model0, EncodeOptions{opts.learn_D});
    const Optimizer o{p0.layout, data, opts};
    Vector x = p0.values;
    double f = o.value(x);
    if (!std::isfinite(f)) {
        res.diverged = true;
        return res;
    }
    res.trace.push_back(f);
    if (opts.optimizer == OptimizerKind::Adam)
        run_adam(o, x, f, res);
    else
        run_lbfgs(o, x, f, res);
    // Accepted steps only ever lower f, so x is the best point seen.
    if (res.trace.size() > 1) res.model = decode(p0.layout, x);
    return res;
}

OilmmModel initialize_model(const Dataset& data, long m, std::vector<KernelSpec> kernels, InitOptions opts) {
    data.validate();
    const long p = data.p();
    if (m < 1 || m > p) throw ContractError("initialize_model: need 1 <= m <= p, got m=" + std::to_string(m));
    if (kernels.size() == 1 && m > 1) kernels.assign(static_cast<std::size_t>(m), kernels.front());
    if (static_cast<long>(kernels.size()) != m)
        throw ContractError("initialize_model: expected 1 or " + std::to_string(m) + " kernels, got " +
                            std::to_string(kernels.size()));

    // Empirical covariance over jointly observed pairs.
    Matrix cov = Matrix::Zero(p, p);
    Matrix count = Matrix::Zero(p, p);
    for (long j = 0; j < data.n(); ++j) {
        for (long k = 0; k < p; ++k) {
            if (!data.mask(k, j)) continue;
            for (long l = 0; l < p; ++l) {
                if (!data.mask(l, j)) continue;
                cov(k, l) += data.Y(k, j) * data.Y(l, j);
                count(k, l) += 1.0;
            }
        }
    }
    for (long k = 0; k < p; ++k)
        for (long l = 0; l < p; ++l) cov(k, l) = count(k, l) > 0.0 ? cov(k, l) / count(k, l) : 0.0;
    cov = 0.5 * (cov + cov.transpose()).eval();

    const OrthogonalBasis basis = basis_from_kernel_matrix(cov, m);
    const double total = cov.trace();
    const double kept = basis.S.sum();
    double residual = p > m ? (total - kept) / static_cast<double>(p - m) : basis.S.minCoeff();
    if (!(residual > 0.0) || !std::isfinite(residual)) residual = 0.01 * total / static_cast<double>(p);
    if (!(residual > 0.0) || !std::isfinite(residual)) residual = 1.0;
    const double sigma2 = 0.1 * residual;

    if (opts.reset_lengthscales) {
        double span = data.n() > 1 ? data.times.maxCoeff() - data.times.minCoeff() : 0.0;
        if (!(span > 0.0)) span = 10.0;
        for (auto& k : kernels) set_leaf_lengthscales(k, span / 10.0);
    }
    return OilmmModel::create(basis, NoiseModel::isotropic(sigma2, m), std::move(kernels));
}

}  // namespace oilmm
