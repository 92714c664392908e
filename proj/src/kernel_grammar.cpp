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

// Kernel grammar:
//
//   spec     := leaf | combo
//   leaf     := family '(' [ name '=' number { ',' name '=' number } ] ')'
//   family   := 'eq' | 'matern12' | 'matern32' | 'matern52' | 'periodic'
//   combo    := ('sum' | 'product') '(' spec { ',' spec } ')'
//             | 'scaled' '(' [ 'weight' '=' ] number ',' spec ')'
//
// Omitted leaf parameters default to 1.

#include <cctype>
#include <charconv>
#include <cstdio>
#include <string>

#include "oilmm/errors.hpp"
#include "oilmm/kernels.hpp"

namespace oilmm {

namespace {

class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    KernelSpec parse() {
        KernelSpec spec = parse_spec();
        skip_space();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return spec;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(what, pos_); }

    void skip_space() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool peek(char c) {
        skip_space();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    void expect(char c) {
        if (!peek(c)) fail(std::string("expected '") + c + "'");
        ++pos_;
    }

    std::string identifier() {
        skip_space();
        const std::size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        if (start == pos_) fail("expected identifier");
        return std::string(text_.substr(start, pos_ - start));
    }

    double number() {
        skip_space();
        double value = 0.0;
        const char* begin = text_.data() + pos_;
        const char* end = text_.data() + text_.size();
        if (begin != end && *begin == '+') ++begin;
        auto [ptr, ec] = std::from_chars(begin, end, value);
        if (ec != std::errc() || ptr == begin) fail("expected number");
        pos_ = static_cast<std::size_t>(ptr - text_.data());
        return value;
    }

    KernelSpec parse_spec() {
        const std::size_t name_pos = (skip_space(), pos_);
        const std::string name = identifier();
        expect('(');
        KernelSpec spec;
        if (name == "sum" || name == "product") {
            std::vector<KernelSpec> parts;
            parts.push_back(parse_spec());
            while (peek(',')) {
                ++pos_;
                parts.push_back(parse_spec());
            }
            spec = name == "sum" ? KernelSpec::sum(std::move(parts))
                                 : KernelSpec::product(std::move(parts));
        } else if (name == "scaled") {
            const std::size_t save = pos_;
            skip_space();
            if (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) {
                if (identifier() != "weight") {
                    pos_ = save;
                    fail("scaled: expected weight");
                }
                expect('=');
            }
            const double w = number();
            expect(',');
            spec = KernelSpec::scaled(w, parse_spec());
        } else {
            spec = leaf_for(name, name_pos);
            bool first = true;
            while (!peek(')')) {
                if (!first) expect(',');
                first = false;
                const std::size_t key_pos = (skip_space(), pos_);
                const std::string key = identifier();
                expect('=');
                const double v = number();
                if (key == "lengthscale") {
                    spec.lengthscale = v;
                } else if (key == "variance") {
                    spec.variance = v;
                } else if (key == "period" && spec.family == KernelFamily::Periodic) {
                    spec.period = v;
                } else {
                    throw ParseError("unknown parameter '" + key + "' for " + name, key_pos);
                }
            }
        }
        expect(')');
        return spec;
    }

    static KernelSpec leaf_for(const std::string& name, std::size_t at) {
        if (name == "eq") return KernelSpec::eq(1.0);
        if (name == "matern12") return KernelSpec::matern12(1.0);
        if (name == "matern32") return KernelSpec::matern32(1.0);
        if (name == "matern52") return KernelSpec::matern52(1.0);
        if (name == "periodic") return KernelSpec::periodic(1.0, 1.0, 1.0);
        throw ParseError("unknown kernel family '" + name + "'", at);
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void render(const KernelSpec& k, std::string& out) {
    switch (k.family) {
        case KernelFamily::Sum:
        case KernelFamily::Product:
            out += k.family == KernelFamily::Sum ? "sum(" : "product(";
            for (std::size_t i = 0; i < k.children.size(); ++i) {
                if (i) out += ", ";
                render(k.children[i], out);
            }
            out += ')';
            return;
        case KernelFamily::Scaled:
            out += "scaled(" + fmt(k.weight) + ", ";
            render(k.children.front(), out);
            out += ')';
            return;
        case KernelFamily::ExponentiatedQuadratic: out += "eq("; break;
        case KernelFamily::Matern12: out += "matern12("; break;
        case KernelFamily::Matern32: out += "matern32("; break;
        case KernelFamily::Matern52: out += "matern52("; break;
        case KernelFamily::Periodic: out += "periodic("; break;
    }
    out += "lengthscale=" + fmt(k.lengthscale) + ", variance=" + fmt(k.variance);
    if (k.family == KernelFamily::Periodic) out += ", period=" + fmt(k.period);
    out += ')';
}

}  // namespace

KernelSpec parse_kernel_spec(std::string_view text) {
    KernelSpec spec = Parser(text).parse();
    validate(spec);
    return spec;
}

std::string render_kernel_spec(const KernelSpec& spec) {
    std::string out;
    render(spec, out);
    return out;
}

}  // namespace oilmm
