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

#include "oilmm/kernels.hpp"

#include <cmath>
#include <numbers>

#include "oilmm/errors.hpp"

namespace oilmm {

namespace {

const double kSqrt3 = std::sqrt(3.0);
const double kSqrt5 = std::sqrt(5.0);

KernelSpec leaf(KernelFamily family, double lengthscale, double variance) {
    KernelSpec k;
    k.family = family;
    k.lengthscale = lengthscale;
    k.variance = variance;
    return k;
}

const char* family_name(KernelFamily f) {
    switch (f) {
        case KernelFamily::ExponentiatedQuadratic: return "eq";
        case KernelFamily::Matern12: return "matern12";
        case KernelFamily::Matern32: return "matern32";
        case KernelFamily::Matern52: return "matern52";
        case KernelFamily::Periodic: return "periodic";
        case KernelFamily::Sum: return "sum";
        case KernelFamily::Product: return "product";
        case KernelFamily::Scaled: return "scaled";
    }
    return "?";
}

void check_positive(double value, const char* what, KernelFamily f) {
    if (!(value > 0.0) || !std::isfinite(value)) {
        throw ParameterDomainError(std::string(family_name(f)) + ": " + what +
                                   " must be positive and finite, got " + std::to_string(value));
    }
}

// Value of a leaf kernel at separation r = |t - t2|.
double eval_leaf(const KernelSpec& k, double r) {
    switch (k.family) {
        case KernelFamily::ExponentiatedQuadratic:
            return k.variance * std::exp(-0.5 * r * r / (k.lengthscale * k.lengthscale));
        case KernelFamily::Matern12:
            return k.variance * std::exp(-r / k.lengthscale);
        case KernelFamily::Matern32: {
            const double a = kSqrt3 * r / k.lengthscale;
            return k.variance * (1.0 + a) * std::exp(-a);
        }
        case KernelFamily::Matern52: {
            const double a = kSqrt5 * r / k.lengthscale;
            return k.variance * (1.0 + a + a * a / 3.0) * std::exp(-a);
        }
        case KernelFamily::Periodic: {
            const double s = std::sin(std::numbers::pi * r / k.period);
            return k.variance * std::exp(-2.0 * s * s / (k.lengthscale * k.lengthscale));
        }
        default:
            break;
    }
    return 0.0;
}

void collect_params(const KernelSpec& k, std::vector<double>& out) {
    if (k.is_leaf()) {
        out.push_back(k.lengthscale);
        out.push_back(k.variance);
        if (k.family == KernelFamily::Periodic) out.push_back(k.period);
        return;
    }
    if (k.family == KernelFamily::Scaled) out.push_back(k.weight);
    for (const auto& c : k.children) collect_params(c, out);
}

void collect_names(const KernelSpec& k, const std::string& prefix, std::vector<std::string>& out) {
    const std::string base = prefix + family_name(k.family);
    if (k.is_leaf()) {
        out.push_back(base + ".lengthscale");
        out.push_back(base + ".variance");
        if (k.family == KernelFamily::Periodic) out.push_back(base + ".period");
        return;
    }
    if (k.family == KernelFamily::Scaled) out.push_back(base + ".weight");
    for (std::size_t i = 0; i < k.children.size(); ++i)
        collect_names(k.children[i], base + "." + std::to_string(i) + ".", out);
}

std::size_t assign_params(KernelSpec& k, std::span<const double> values, std::size_t pos) {
    auto next = [&]() {
        if (pos >= values.size()) throw ContractError("kernel parameter vector too short");
        return std::exp(values[pos++]);
    };
    if (k.is_leaf()) {
        k.lengthscale = next();
        k.variance = next();
        if (k.family == KernelFamily::Periodic) k.period = next();
        return pos;
    }
    if (k.family == KernelFamily::Scaled) k.weight = next();
    for (auto& c : k.children) pos = assign_params(c, values, pos);
    return pos;
}

// Writes d k / d log(theta) for the subtree into out, returns k(t, t2).
double log_grad(const KernelSpec& k, double t, double t2, std::span<double> out) {
    const double r = std::abs(t - t2);
    if (k.is_leaf()) {
        const double value = eval_leaf(k, r);
        const double l = k.lengthscale;
        double dl = 0.0;
        switch (k.family) {
            case KernelFamily::ExponentiatedQuadratic:
                dl = value * r * r / (l * l);
                break;
            case KernelFamily::Matern12:
                dl = value * r / l;
                break;
            case KernelFamily::Matern32: {
                const double a = kSqrt3 * r / l;
                dl = k.variance * a * a * std::exp(-a);
                break;
            }
            case KernelFamily::Matern52: {
                const double a = kSqrt5 * r / l;
                dl = k.variance * a * a * (1.0 + a) / 3.0 * std::exp(-a);
                break;
            }
            case KernelFamily::Periodic: {
                const double arg = std::numbers::pi * r / k.period;
                const double s = std::sin(arg);
                const double c = std::cos(arg);
                dl = value * 4.0 * s * s / (l * l);
                out[2] = value * 4.0 * s * c * arg / (l * l);
                break;
            }
            default:
                break;
        }
        out[0] = dl;
        out[1] = value;
        return value;
    }

    if (k.family == KernelFamily::Scaled) {
        const double inner = log_grad(k.children.front(), t, t2, out.subspan(1));
        const std::size_t n = num_params(k.children.front());
        for (std::size_t j = 0; j < n; ++j) out[1 + j] *= k.weight;
        out[0] = k.weight * inner;
        return out[0];
    }

    std::vector<double> values(k.children.size());
    std::vector<std::size_t> offsets(k.children.size());
    std::size_t pos = 0;
    for (std::size_t c = 0; c < k.children.size(); ++c) {
        offsets[c] = pos;
        const std::size_t n = num_params(k.children[c]);
        values[c] = log_grad(k.children[c], t, t2, out.subspan(pos, n));
        pos += n;
    }
    if (k.family == KernelFamily::Sum) {
        double total = 0.0;
        for (double v : values) total += v;
        return total;
    }
    // Product: scale each child's gradient by the product of the others.
    double total = 1.0;
    for (double v : values) total *= v;
    for (std::size_t c = 0; c < k.children.size(); ++c) {
        double others = 1.0;
        for (std::size_t d = 0; d < k.children.size(); ++d)
            if (d != c) others *= values[d];
        const std::size_t n = num_params(k.children[c]);
        for (std::size_t j = 0; j < n; ++j) out[offsets[c] + j] *= others;
    }
    return total;
}

}  // namespace

KernelSpec KernelSpec::eq(double lengthscale, double variance) {
    return leaf(KernelFamily::ExponentiatedQuadratic, lengthscale, variance);
}
KernelSpec KernelSpec::matern12(double lengthscale, double variance) {
    return leaf(KernelFamily::Matern12, lengthscale, variance);
}
KernelSpec KernelSpec::matern32(double lengthscale, double variance) {
    return leaf(KernelFamily::Matern32, lengthscale, variance);
}
KernelSpec KernelSpec::matern52(double lengthscale, double variance) {
    return leaf(KernelFamily::Matern52, lengthscale, variance);
}
KernelSpec KernelSpec::periodic(double lengthscale, double variance, double period) {
    KernelSpec k = leaf(KernelFamily::Periodic, lengthscale, variance);
    k.period = period;
    return k;
}
KernelSpec KernelSpec::sum(std::vector<KernelSpec> parts) {
    KernelSpec k;
    k.family = KernelFamily::Sum;
    k.children = std::move(parts);
    return k;
}
KernelSpec KernelSpec::product(std::vector<KernelSpec> parts) {
    KernelSpec k;
    k.family = KernelFamily::Product;
    k.children = std::move(parts);
    return k;
}
KernelSpec KernelSpec::scaled(double weight, KernelSpec inner) {
    KernelSpec k;
    k.family = KernelFamily::Scaled;
    k.weight = weight;
    k.children.push_back(std::move(inner));
    return k;
}

bool KernelSpec::is_leaf() const noexcept {
    return family != KernelFamily::Sum && family != KernelFamily::Product &&
           family != KernelFamily::Scaled;
}

void validate(const KernelSpec& k) {
    if (k.is_leaf()) {
        check_positive(k.lengthscale, "lengthscale", k.family);
        check_positive(k.variance, "variance", k.family);
        if (k.family == KernelFamily::Periodic) check_positive(k.period, "period", k.family);
        return;
    }
    if (k.children.empty())
        throw ParameterDomainError(std::string(family_name(k.family)) + ": needs at least one child");
    if (k.family == KernelFamily::Scaled) {
        if (k.children.size() != 1) throw ParameterDomainError("scaled: needs exactly one child");
        check_positive(k.weight, "weight", k.family);
    }
    for (const auto& c : k.children) validate(c);
}

namespace {

double eval_tree(const KernelSpec& k, double t, double t2) {
    if (k.is_leaf()) return eval_leaf(k, std::abs(t - t2));
    switch (k.family) {
        case KernelFamily::Sum: {
            double total = 0.0;
            for (const auto& c : k.children) total += eval_tree(c, t, t2);
            return total;
        }
        case KernelFamily::Product: {
            double total = 1.0;
            for (const auto& c : k.children) total *= eval_tree(c, t, t2);
            return total;
        }
        case KernelFamily::Scaled:
            return k.weight * eval_tree(k.children.front(), t, t2);
        default:
            break;
    }
    return 0.0;
}

}  // namespace

double eval_kernel(const KernelSpec& k, double t, double t2) {
    validate(k);
    return eval_tree(k, t, t2);
}

Matrix cross_kernel_matrix(const KernelSpec& spec, const Vector& a, const Vector& b) {
    validate(spec);
    Matrix out(a.size(), b.size());
    for (long j = 0; j < b.size(); ++j)
        for (long i = 0; i < a.size(); ++i) out(i, j) = eval_tree(spec, a(i), b(j));
    return out;
}

KernelMatrix build_kernel_matrix(const KernelSpec& spec, const Vector& times) {
    validate(spec);
    for (long i = 0; i < times.size(); ++i)
        if (!std::isfinite(times(i))) throw ContractError("build_kernel_matrix: non-finite time");
    const long n = times.size();
    KernelMatrix out;
    out.entries.resize(n, n);
    for (long j = 0; j < n; ++j) {
        out.entries(j, j) = eval_tree(spec, times(j), times(j));
        for (long i = j + 1; i < n; ++i) {
            const double v = eval_tree(spec, times(i), times(j));
            out.entries(i, j) = v;
            out.entries(j, i) = v;
        }
    }
    if (n > 0) out.jitter_applied = cholesky_with_jitter(out.entries).jitter;
    return out;
}

std::size_t num_params(const KernelSpec& k) {
    if (k.is_leaf()) return k.family == KernelFamily::Periodic ? 3 : 2;
    std::size_t n = k.family == KernelFamily::Scaled ? 1 : 0;
    for (const auto& c : k.children) n += num_params(c);
    return n;
}

std::vector<std::string> param_names(const KernelSpec& spec) {
    std::vector<std::string> out;
    collect_names(spec, "", out);
    return out;
}

Vector log_params(const KernelSpec& spec) {
    std::vector<double> raw;
    collect_params(spec, raw);
    Vector out(static_cast<long>(raw.size()));
    for (std::size_t i = 0; i < raw.size(); ++i) out(static_cast<long>(i)) = std::log(raw[i]);
    return out;
}

KernelSpec with_log_params(const KernelSpec& spec, std::span<const double> values) {
    KernelSpec out = spec;
    const std::size_t used = assign_params(out, values, 0);
    if (used != values.size()) throw ContractError("kernel parameter vector too long");
    return out;
}

void eval_kernel_log_grad(const KernelSpec& spec, double t, double t2, std::span<double> out) {
    if (out.size() != num_params(spec)) throw ContractError("eval_kernel_log_grad: wrong output size");
    log_grad(spec, t, t2, out);
}

std::vector<Matrix> kernel_matrix_log_grads(const KernelSpec& spec, const Vector& times) {
    const std::size_t np = num_params(spec);
    const long n = times.size();
    std::vector<Matrix> out(np, Matrix(n, n));
    std::vector<double> g(np);
    for (long j = 0; j < n; ++j) {
        for (long i = j; i < n; ++i) {
            eval_kernel_log_grad(spec, times(i), times(j), g);
            for (std::size_t q = 0; q < np; ++q) {
                out[q](i, j) = g[q];
                out[q](j, i) = g[q];
            }
        }
    }
    return out;
}

KernelSpec normalize_unit_variance(const KernelSpec& spec) {
    validate(spec);
    if (spec.is_leaf()) {
        KernelSpec out = spec;
        out.variance = 1.0;
        return out;
    }
    if (spec.family == KernelFamily::Scaled) {
        KernelSpec out = spec;
        out.weight = 1.0 / eval_tree(out.children.front(), 0.0, 0.0);
        return out;
    }
    return KernelSpec::scaled(1.0 / eval_tree(spec, 0.0, 0.0), spec);
}

std::size_t normalizing_param_index(const KernelSpec& spec) {
    if (spec.is_leaf()) return 1;
    if (spec.family == KernelFamily::Scaled) return 0;
    throw ContractError("normalizing_param_index: kernel is not normalized (Sum/Product at top level)");
}

}  // namespace oilmm
