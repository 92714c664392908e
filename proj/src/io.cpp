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

#include "oilmm/io.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>

#include "oilmm/errors.hpp"

namespace oilmm::io {

namespace {

using json = nlohmann::json;

struct Cell {
    std::string_view text;
    std::size_t offset;
};

struct Row {
    std::vector<Cell> cells;
    long line;
    std::size_t offset;
};

std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

// Splits CSV text into rows of cells; blank lines are skipped.
std::vector<Row> split_rows(std::string_view text) {
    std::vector<Row> rows;
    std::size_t pos = 0;
    long line = 0;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") pos = 3;  // UTF-8 byte order mark
    while (pos < text.size()) {
        ++line;
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        const std::string_view raw = text.substr(pos, end - pos);
        if (!trim(raw).empty()) {
            Row row{{}, line, pos};
            std::size_t start = 0;
            while (true) {
                const std::size_t comma = raw.find(',', start);
                const std::size_t stop = comma == std::string_view::npos ? raw.size() : comma;
                const std::string_view cell = raw.substr(start, stop - start);
                const std::size_t lead = cell.find_first_not_of(" \t\r");
                row.cells.push_back({trim(cell), pos + start + (lead == std::string_view::npos ? 0 : lead)});
                if (comma == std::string_view::npos) break;
                start = comma + 1;
            }
            rows.push_back(std::move(row));
        }
        pos = end + 1;
    }
    return rows;
}

std::string location(long line, std::size_t column) {
    return "row " + std::to_string(line) + ", column " + std::to_string(column + 1);
}

double parse_number(const Cell& cell, long line, std::size_t column) {
    double v = 0.0;
    const char* first = cell.text.data();
    const char* last = first + cell.text.size();
    if (!cell.text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || !std::isfinite(v))
        throw ParseError("csv: " + location(line, column) + ": '" + std::string(cell.text) + "' is not a finite number",
                         cell.offset);
    return v;
}

std::string read_stream(std::istream& in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Canonical JSON emitter: object keys are emitted in the order given
// (callers pass them sorted), numbers use format_double.
class Writer {
public:
    void open(char c) {
        out_ += c;
        ++depth_;
        first_ = true;
    }
    void close(char c) {
        --depth_;
        if (!first_) newline();
        out_ += c;
        first_ = false;
    }
    void key(const std::string& k) {
        item();
        out_ += json(k).dump();
        out_ += ": ";
        pending_value_ = true;
    }
    void number(double v) { value(format_double(v)); }
    void integer(long v) { value(std::to_string(v)); }
    void string(const std::string& s) { value(json(s).dump()); }
    void null() { value("null"); }
    void vector(const Vector& v) {
        begin_value();
        out_ += '[';
        for (long i = 0; i < v.size(); ++i) {
            if (i) out_ += ", ";
            out_ += format_double(v(i));
        }
        out_ += ']';
    }
    void begin_value() {
        if (pending_value_) {
            pending_value_ = false;
            return;
        }
        item();
    }
    std::string str() const { return out_ + "\n"; }

private:
    void value(const std::string& text) {
        begin_value();
        out_ += text;
    }
    void item() {
        if (!first_) out_ += ',';
        newline();
        first_ = false;
    }
    void newline() {
        out_ += '\n';
        out_.append(static_cast<std::size_t>(2 * depth_), ' ');
    }

    std::string out_;
    int depth_ = 0;
    bool first_ = true;
    bool pending_value_ = false;
};

Vector json_vector(const json& j, const std::string& what) {
    if (!j.is_array()) throw ContractError(what + " must be an array of numbers");
    Vector v(static_cast<long>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) {
        if (!j[i].is_number()) throw ContractError(what + " must be an array of numbers");
        v(static_cast<long>(i)) = j[i].get<double>();
    }
    return v;
}

json parse_json(std::string_view text, const std::string& what) {
    try {
        return json::parse(text.begin(), text.end());
    } catch (const json::parse_error& e) {
        throw ParseError(what + ": " + e.what(), e.byte > 0 ? e.byte - 1 : 0);
    }
}

const json& require(const json& obj, const std::string& key, const std::string& what) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ContractError(what + ": missing key '" + key + "'");
    return *it;
}

KernelSpec kernel_from_json(const json& j, const std::string& what) {
    if (!j.is_string()) throw ContractError(what + ": kernels must be grammar strings");
    return parse_kernel_spec(j.get<std::string>());
}

std::string resolve(const std::string& base_dir, const std::string& path) {
    const std::filesystem::path p(path);
    if (p.is_absolute()) return path;
    return (std::filesystem::path(base_dir) / p).string();
}

Matrix haar_orthonormal(long p, long m, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal;
    Matrix g(p, m);
    for (long j = 0; j < m; ++j)
        for (long i = 0; i < p; ++i) g(i, j) = normal(gen);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(p, m);
    // Fix the QR sign ambiguity so the distribution is Haar.
    const Matrix r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
    for (long j = 0; j < m; ++j)
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    return q;
}

}  // namespace

std::string format_double(double v) {
    if (v == 0.0) return "0";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Dataset parse_data_csv(std::string_view text) {
    const std::vector<Row> rows = split_rows(text);
    if (rows.empty()) throw ParseError("csv: missing header row", 0);
    const Row& header = rows.front();
    if (header.cells.size() < 2)
        throw ParseError("csv: need a time column and at least one output column", header.offset);
    if (header.cells.front().text != "time")
        throw ParseError("csv: " + location(header.line, 0) + ": first header must be 'time'",
                         header.cells.front().offset);
    const long p = static_cast<long>(header.cells.size()) - 1;
    const long n = static_cast<long>(rows.size()) - 1;

    Vector times(n);
    Matrix y(p, n);
    for (long j = 0; j < n; ++j) {
        const Row& row = rows[static_cast<std::size_t>(j + 1)];
        if (static_cast<long>(row.cells.size()) != p + 1)
            throw ParseError("csv: row " + std::to_string(row.line) + " has " + std::to_string(row.cells.size()) +
                                 " cells, header has " + std::to_string(p + 1),
                             row.offset);
        if (row.cells.front().text.empty())
            throw ParseError("csv: " + location(row.line, 0) + ": time is missing", row.cells.front().offset);
        times(j) = parse_number(row.cells.front(), row.line, 0);
        for (long k = 0; k < p; ++k) {
            const Cell& cell = row.cells[static_cast<std::size_t>(k + 1)];
            y(k, j) = cell.text.empty() ? std::numeric_limits<double>::quiet_NaN()
                                        : parse_number(cell, row.line, static_cast<std::size_t>(k + 1));
        }
    }
    return Dataset::from_matrix(std::move(times), std::move(y));
}

Dataset read_data_csv(const std::string& path) {
    try {
        return parse_data_csv(read_file(path));
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.detail(), e.offset());
    }
}

Vector parse_times_csv(std::string_view text) {
    const std::vector<Row> rows = split_rows(text);
    if (rows.empty()) throw ParseError("csv: missing header row", 0);
    Vector t(static_cast<long>(rows.size()) - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const Cell& cell = rows[r].cells.front();
        if (cell.text.empty()) throw ParseError("csv: " + location(rows[r].line, 0) + ": time is missing", cell.offset);
        t(static_cast<long>(r) - 1) = parse_number(cell, rows[r].line, 0);
    }
    return t;
}

Vector read_times_csv(const std::string& path) { return parse_times_csv(read_file(path)); }

std::string format_data_csv(const Vector& times, const Matrix& Y) {
    std::string out = "time";
    for (long k = 0; k < Y.rows(); ++k) out += ",out_" + std::to_string(k);
    out += '\n';
    for (long j = 0; j < Y.cols(); ++j) {
        out += format_double(times(j));
        for (long k = 0; k < Y.rows(); ++k) {
            out += ',';
            if (std::isfinite(Y(k, j))) out += format_double(Y(k, j));
        }
        out += '\n';
    }
    return out;
}

std::string format_predictions_csv(const Vector& times, const Matrix& mean, const Matrix& variance) {
    std::string out = "time";
    for (long k = 0; k < mean.rows(); ++k) out += ",mean_" + std::to_string(k);
    for (long k = 0; k < variance.rows(); ++k) out += ",var_" + std::to_string(k);
    out += '\n';
    for (long j = 0; j < times.size(); ++j) {
        out += format_double(times(j));
        for (long k = 0; k < mean.rows(); ++k) out += ',' + format_double(mean(k, j));
        for (long k = 0; k < variance.rows(); ++k) out += ',' + format_double(variance(k, j));
        out += '\n';
    }
    return out;
}

std::string serialize_model(const OilmmModel& model) {
    model.validate();
    Writer w;
    w.open('{');
    w.key("D");
    w.vector(model.noise.D.size() == model.m() ? model.noise.D : Vector::Zero(model.m()));
    w.key("S");
    w.vector(model.basis.S);
    w.key("U");
    w.begin_value();
    w.open('[');
    for (long i = 0; i < model.p(); ++i) w.vector(model.basis.U.row(i).transpose());
    w.close(']');
    w.key("format");
    w.string("oilmm-model");
    w.key("heterogeneous");
    if (model.noise.heterogeneous)
        w.vector(*model.noise.heterogeneous);
    else
        w.null();
    w.key("kernels");
    w.begin_value();
    w.open('[');
    for (const auto& k : model.latent_kernels) w.string(render_kernel_spec(k));
    w.close(']');
    w.key("m");
    w.integer(model.m());
    w.key("p");
    w.integer(model.p());
    w.key("sigma2");
    w.number(model.noise.sigma2);
    w.key("version");
    w.integer(1);
    w.close('}');
    return w.str();
}

OilmmModel parse_model(std::string_view text) {
    const std::string what = "model";
    const json j = parse_json(text, what);
    if (!j.is_object()) throw ContractError("model: expected a JSON object");
    if (require(j, "format", what) != "oilmm-model") throw ContractError("model: unknown format");
    if (require(j, "version", what) != 1) throw ContractError("model: unsupported version");
    const long p = require(j, "p", what).get<long>();
    const long m = require(j, "m", what).get<long>();
    const json& ju = require(j, "U", what);
    if (!ju.is_array() || static_cast<long>(ju.size()) != p) throw ContractError("model: U must have p rows");
    Matrix u(p, m);
    for (long i = 0; i < p; ++i) {
        const Vector row = json_vector(ju[static_cast<std::size_t>(i)], "model: U row");
        if (row.size() != m) throw ContractError("model: U rows must have m entries");
        u.row(i) = row.transpose();
    }
    OilmmModel model;
    model.basis = OrthogonalBasis::create(std::move(u), json_vector(require(j, "S", what), "model: S"));
    model.noise.sigma2 = require(j, "sigma2", what).get<double>();
    model.noise.D = json_vector(require(j, "D", what), "model: D");
    const json& het = require(j, "heterogeneous", what);
    if (!het.is_null()) model.noise.heterogeneous = json_vector(het, "model: heterogeneous");
    const json& jk = require(j, "kernels", what);
    if (!jk.is_array()) throw ContractError("model: kernels must be an array");
    for (const auto& k : jk) model.latent_kernels.push_back(kernel_from_json(k, what));
    // Stored kernels are already normalized; renormalizing could change the
    // last bit and break byte-identical round trips.
    model.validate();
    return model;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ContractError("cannot open '" + path + "' for reading");
    return read_stream(in);
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ContractError("cannot open '" + path + "' for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ContractError("failed writing '" + path + "'");
}

RunConfig parse_config(std::string_view text, const std::string& base_dir) {
    const std::string what = "config";
    const json j = parse_json(text, what);
    if (!j.is_object()) throw ContractError("config: expected a JSON object");
    RunConfig c;
    try {
        c.m = require(j, "m", what).get<long>();
        if (c.m < 1) throw ContractError("config: m must be at least 1, got " + std::to_string(c.m));

        if (j.contains("kernels")) {
            for (const auto& k : j["kernels"]) c.kernels.push_back(kernel_from_json(k, what));
        } else if (j.contains("kernel")) {
            c.kernels.push_back(kernel_from_json(j["kernel"], what));
        } else {
            c.kernels.push_back(KernelSpec::matern52(1.0));
        }
        if (c.kernels.size() != 1 && static_cast<long>(c.kernels.size()) != c.m)
            throw ContractError("config: expected 1 or m=" + std::to_string(c.m) + " kernels, got " +
                                std::to_string(c.kernels.size()));
        for (const auto& k : c.kernels) validate(k);

        if (j.contains("basis")) {
            const json& b = j["basis"];
            const std::string mode = b.is_string() ? b.get<std::string>() : require(b, "mode", what).get<std::string>();
            if (mode == "data") {
                c.basis = BasisInit::Data;
            } else if (mode == "identity") {
                c.basis = BasisInit::Identity;
            } else if (mode == "random") {
                c.basis = BasisInit::Random;
            } else if (mode == "spatial-kernel") {
                c.basis = BasisInit::SpatialKernel;
                c.spatial_kernel = kernel_from_json(require(b, "kernel", what), what);
                validate(*c.spatial_kernel);
                if (b.contains("locations"))
                    c.locations = json_vector(b["locations"], "config: basis.locations");
                else
                    c.locations = read_times_csv(resolve(base_dir, require(b, "file", what).get<std::string>()));
            } else {
                throw ContractError("config: unknown basis mode '" + mode + "'");
            }
        }

        if (j.contains("noise")) {
            const json& nz = j["noise"];
            if (nz.contains("sigma2")) c.sigma2 = nz["sigma2"].get<double>();
            if (nz.contains("D")) c.D = json_vector(nz["D"], "config: noise.D");
            if (nz.contains("heterogeneous")) c.heterogeneous = json_vector(nz["heterogeneous"], "config: noise.heterogeneous");
            if (nz.contains("learn_D")) c.fit.learn_D = nz["learn_D"].get<bool>();
            if (c.sigma2 && !(*c.sigma2 > 0.0)) throw ParameterDomainError("config: noise.sigma2 must be positive");
        }
        if (j.contains("S")) c.S = json_vector(j["S"], "config: S");

        if (j.contains("optimizer")) {
            const json& o = j["optimizer"];
            if (o.contains("kind")) {
                const std::string kind = o["kind"].get<std::string>();
                if (kind == "adam")
                    c.fit.optimizer = OptimizerKind::Adam;
                else if (kind == "lbfgs")
                    c.fit.optimizer = OptimizerKind::Lbfgs;
                else
                    throw ContractError("config: unknown optimizer '" + kind + "'");
            }
            if (o.contains("gradient")) {
                const std::string g = o["gradient"].get<std::string>();
                if (g == "finite_difference")
                    c.fit.gradient = GradientMode::FiniteDifference;
                else if (g == "analytic_kernel_only")
                    c.fit.gradient = GradientMode::AnalyticKernelOnly;
                else
                    throw ContractError("config: unknown gradient mode '" + g + "'");
            }
            if (o.contains("max_iters")) c.fit.max_iters = o["max_iters"].get<long>();
            if (o.contains("tolerance")) c.fit.tolerance = o["tolerance"].get<double>();
            if (o.contains("learning_rate")) c.fit.learning_rate = o["learning_rate"].get<double>();
            if (c.fit.max_iters < 0) throw ContractError("config: optimizer.max_iters must be nonnegative");
        }
        if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
        c.fit.seed = c.seed;

        if (j.contains("missing")) {
            const std::string mp = j["missing"].get<std::string>();
            if (mp == "error")
                c.missing = MissingPolicy::Error;
            else if (mp == "diag-approx")
                c.missing = MissingPolicy::DiagApprox;
            else
                throw ContractError("config: unknown missing-data policy '" + mp + "'");
        }

        if (j.contains("p")) c.p = j["p"].get<long>();
        if (j.contains("time_span")) {
            const Vector span = json_vector(j["time_span"], "config: time_span");
            if (span.size() != 2 || !(span(1) > span(0))) throw ContractError("config: time_span must be [start, stop]");
            c.time_start = span(0);
            c.time_stop = span(1);
        }
    } catch (const json::exception& e) {
        throw ContractError(std::string("config: ") + e.what());
    }
    return c;
}

namespace {

std::vector<KernelSpec> expand_kernels(const RunConfig& c) {
    if (c.kernels.size() == 1) return std::vector<KernelSpec>(static_cast<std::size_t>(c.m), c.kernels.front());
    return c.kernels;
}

OrthogonalBasis configured_basis(const RunConfig& c, long p, const OrthogonalBasis* from_data) {
    switch (c.basis) {
        case BasisInit::Data:
            return *from_data;
        case BasisInit::Identity:
            return OrthogonalBasis::create(Matrix::Identity(p, c.m), Vector::Ones(c.m));
        case BasisInit::Random:
            return OrthogonalBasis::create(haar_orthonormal(p, c.m, c.seed), Vector::Ones(c.m));
        case BasisInit::SpatialKernel: {
            if (c.locations.size() != p)
                throw ContractError("config: spatial basis has " + std::to_string(c.locations.size()) +
                                    " locations for p=" + std::to_string(p) + " outputs");
            const Matrix k = cross_kernel_matrix(*c.spatial_kernel, c.locations, c.locations);
            return basis_from_kernel_matrix(k, c.m);
        }
    }
    throw ContractError("config: unknown basis mode");
}

}  // namespace

OilmmModel initial_model(const RunConfig& config, const Dataset& data) {
    const long p = data.p();
    if (config.m > p)
        throw ContractError("config: m=" + std::to_string(config.m) + " exceeds the number of outputs p=" +
                            std::to_string(p));
    if (config.missing == MissingPolicy::Error && !data.fully_observed())
        throw ContractError("data has missing entries and the config sets \"missing\": \"error\"");
    // The data-driven model supplies the noise heuristic in every mode.
    const OilmmModel heuristic = initialize_model(data, config.m, expand_kernels(config));
    OrthogonalBasis basis = configured_basis(config, p, &heuristic.basis);
    if (config.basis == BasisInit::Identity || config.basis == BasisInit::Random)
        basis.S = Vector::Constant(config.m, std::max(heuristic.basis.S.mean(), 1e-12));
    if (config.S) basis.S = *config.S;

    NoiseModel noise = NoiseModel::isotropic(config.sigma2.value_or(heuristic.noise.sigma2), config.m);
    if (config.D) noise.D = *config.D;
    noise.heterogeneous = config.heterogeneous;
    return OilmmModel::create(std::move(basis), std::move(noise), heuristic.latent_kernels);
}

OilmmModel simulation_model(const RunConfig& config) {
    if (config.p < 1) throw ContractError("config: simulation needs \"p\" >= 1");
    if (config.m > config.p)
        throw ContractError("config: m=" + std::to_string(config.m) + " exceeds p=" + std::to_string(config.p));
    if (config.basis == BasisInit::Data) throw ContractError("config: simulation cannot use a data-driven basis");
    if (!config.sigma2) throw ContractError("config: simulation needs noise.sigma2");
    OrthogonalBasis basis = configured_basis(config, config.p, nullptr);
    if (config.S) basis.S = *config.S;
    NoiseModel noise = NoiseModel::isotropic(*config.sigma2, config.m);
    if (config.D) noise.D = *config.D;
    noise.heterogeneous = config.heterogeneous;
    return OilmmModel::create(std::move(basis), std::move(noise), expand_kernels(config));
}

}  // namespace oilmm::io
