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

// oilmm: fit, predict, sample, simulate and benchmark from the command line.
//
// Exit codes: 0 success, 2 input error, 3 numerical failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "oilmm/benchmark.hpp"
#include "oilmm/errors.hpp"
#include "oilmm/io.hpp"
#include "oilmm/learn.hpp"
#include "oilmm/model.hpp"

namespace {

using namespace oilmm;
using json = nlohmann::json;

constexpr int kExitInput = 2;
constexpr int kExitNumerical = 3;

void emit(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-")
        std::cout << text;
    else
        io::write_file(path, text);
}

std::string dir_of(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    return parent.empty() ? "." : parent.string();
}

void warn_dropped(const std::vector<long>& dropped) {
    if (dropped.empty()) return;
    std::ostringstream ss;
    ss << "warning: " << dropped.size() << " time stamp(s) with no observed outputs were dropped (rows";
    for (long c : dropped) ss << ' ' << c + 2;  // 1-based, after the header
    ss << ")\n";
    std::cerr << ss.str();
}

struct FitArgs {
    std::string data;
    std::string config;
    std::string model_out = "model.json";
    std::string report_out = "fit_report.json";
};

int run_fit(const FitArgs& a) {
    const Dataset data = io::read_data_csv(a.data);
    const io::RunConfig config = io::parse_config(io::read_file(a.config), dir_of(a.config));
    const OilmmModel model0 = io::initial_model(config, data);

    const auto t0 = std::chrono::steady_clock::now();
    const FitResult result = fit(model0, data, config.fit);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    const LmlBreakdown lml = log_likelihood(result.model, data);
    warn_dropped(lml.dropped_columns);
    if (result.diverged) std::cerr << "warning: optimizer diverged; writing the best model seen\n";

    json report;
    report["nll_trace"] = result.trace;
    report["wall_seconds"] = seconds;
    report["iterations"] = result.iterations;
    report["converged"] = result.converged;
    report["diverged"] = result.diverged;
    report["final_nll"] = -lml.total;
    report["noise_lost"] = lml.noise_lost;
    report["data_lost"] = lml.data_lost;
    report["dropped_columns"] = lml.dropped_columns;
    json blocks = json::array();
    for (const auto& b : lml.blocks)
        blocks.push_back({{"columns", b.columns}, {"observed_outputs", b.observed_outputs},
                          {"eps_rel", b.eps_rel}, {"bound", b.bound}, {"certified_bound", b.certified_bound}});
    report["blocks"] = blocks;

    io::write_file(a.model_out, io::serialize_model(result.model));
    io::write_file(a.report_out, report.dump(2) + "\n");
    return 0;
}

struct PredictArgs {
    std::string model;
    std::string data;
    std::string query;
    std::string out;
    bool noise = false;
    std::uint64_t seed = 0;
};

Vector query_times(const PredictArgs& a, const Dataset& data) {
    return a.query.empty() ? data.times : io::read_times_csv(a.query);
}

void check_outputs(const OilmmModel& model, const Dataset& data) {
    if (data.p() != model.p())
        throw ContractError("data has " + std::to_string(data.p()) + " outputs but the model has " +
                            std::to_string(model.p()));
}

int run_predict(const PredictArgs& a) {
    const OilmmModel model = io::parse_model(io::read_file(a.model));
    const Dataset data = io::read_data_csv(a.data);
    check_outputs(model, data);
    const Vector q = query_times(a, data);
    const JointPrediction pred = predict(model, data, q, a.noise);
    emit(a.out, io::format_predictions_csv(q, pred.mean, pred.marginal_variance));
    return 0;
}

int run_sample(const PredictArgs& a) {
    const OilmmModel model = io::parse_model(io::read_file(a.model));
    const Dataset data = io::read_data_csv(a.data);
    check_outputs(model, data);
    const Vector q = query_times(a, data);
    emit(a.out, io::format_data_csv(q, sample(model, data, q, a.seed)));
    return 0;
}

struct SimulateArgs {
    std::string config;
    long n = 100;
    std::uint64_t seed = 0;
    std::string out;
    std::string model_out;
};

int run_simulate(const SimulateArgs& a) {
    const io::RunConfig config = io::parse_config(io::read_file(a.config), dir_of(a.config));
    if (a.n < 0) throw ContractError("--n must be nonnegative");
    const OilmmModel model = io::simulation_model(config);
    const Vector times = a.n > 1 ? Vector(Vector::LinSpaced(a.n, config.time_start, config.time_stop))
                                 : Vector(Vector::Constant(a.n, config.time_start));
    emit(a.out, io::format_data_csv(times, simulate(model, times, a.seed)));
    if (!a.model_out.empty()) io::write_file(a.model_out, io::serialize_model(model));
    return 0;
}

struct BenchArgs {
    bench::BenchmarkOptions opts;
    std::vector<std::string> methods{"oilmm", "dense-ilmm"};
    double memory_budget_mb = 0.0;
    bool parallel = false;
    std::string out;
    std::string summary;
};

int run_benchmark(BenchArgs a) {
    a.opts.methods.clear();
    for (const auto& m : a.methods) a.opts.methods.push_back(bench::parse_method(m));
    a.opts.memory_budget_bytes = a.memory_budget_mb * 1e6;
    a.opts.exec = a.parallel ? Execution::Parallel : Execution::Serial;
    const bench::BenchmarkResult result =
        bench::run_benchmark(a.opts, [](const std::string& msg) { std::cerr << msg << '\n'; });
    emit(a.out, bench::format_timings_csv(result.rows));
    for (const auto& s : result.summaries) {
        std::cerr << s.method << ": log-log slope over m in {";
        for (std::size_t i = 0; i < s.m_used.size(); ++i) std::cerr << (i ? "," : "") << s.m_used[i];
        std::cerr << "} = " << s.slope << (s.complete ? "" : " (incomplete: some cells were skipped)") << '\n';
    }
    if (!a.summary.empty()) io::write_file(a.summary, bench::format_summary_json(result));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Orthogonal instantaneous linear mixing models: exact multi-output GP inference and learning"};
    app.require_subcommand(1);

    FitArgs fit_args;
    auto* fit_cmd = app.add_subcommand("fit", "Learn a model from data");
    fit_cmd->add_option("data", fit_args.data, "Training CSV (time,out_0,...)")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("config", fit_args.config, "Run configuration JSON")->required()->check(CLI::ExistingFile);
    fit_cmd->add_option("-o,--model-out", fit_args.model_out, "Where to write model.json");
    fit_cmd->add_option("-r,--report", fit_args.report_out, "Where to write the fit report");

    PredictArgs predict_args;
    auto* predict_cmd = app.add_subcommand("predict", "Posterior marginals at query times");
    predict_cmd->add_option("model", predict_args.model, "model.json")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("data", predict_args.data, "Conditioning CSV")->required()->check(CLI::ExistingFile);
    predict_cmd->add_option("-q,--query", predict_args.query, "CSV whose first column holds query times")
        ->check(CLI::ExistingFile);
    predict_cmd->add_flag("--noise", predict_args.noise, "Include observation noise in the variances");
    predict_cmd->add_option("-o,--out", predict_args.out, "Output CSV (default stdout)");

    PredictArgs sample_args;
    auto* sample_cmd = app.add_subcommand("sample", "One joint posterior sample at query times");
    sample_cmd->add_option("model", sample_args.model, "model.json")->required()->check(CLI::ExistingFile);
    sample_cmd->add_option("data", sample_args.data, "Conditioning CSV")->required()->check(CLI::ExistingFile);
    sample_cmd->add_option("-q,--query", sample_args.query, "CSV whose first column holds query times")
        ->check(CLI::ExistingFile);
    sample_cmd->add_option("--seed", sample_args.seed, "Random seed");
    sample_cmd->add_option("-o,--out", sample_args.out, "Output CSV (default stdout)");

    SimulateArgs sim_args;
    auto* sim_cmd = app.add_subcommand("simulate", "Draw data from the generative model in a config");
    sim_cmd->add_option("config", sim_args.config, "Run configuration JSON")->required()->check(CLI::ExistingFile);
    sim_cmd->add_option("-n,--n", sim_args.n, "Number of time stamps");
    sim_cmd->add_option("--seed", sim_args.seed, "Random seed");
    sim_cmd->add_option("-o,--out", sim_args.out, "Output CSV (default stdout)");
    sim_cmd->add_option("--model-out", sim_args.model_out, "Also write the generating model");

    BenchArgs bench_args;
    auto* bench_cmd = app.add_subcommand("benchmark", "Time evidence evaluation as m grows");
    bench_cmd->add_option("--n", bench_args.opts.n, "Number of time stamps");
    bench_cmd->add_option("--p", bench_args.opts.p, "Number of outputs");
    bench_cmd->add_option("--m-list", bench_args.opts.m_list, "Latent counts")->delimiter(',');
    bench_cmd->add_option("--method", bench_args.methods, "oilmm and/or dense-ilmm")->delimiter(',');
    bench_cmd->add_option("--reps", bench_args.opts.reps, "Repetitions per cell");
    bench_cmd->add_option("--seed", bench_args.opts.seed, "Random seed");
    bench_cmd->add_option("--time-budget", bench_args.opts.time_budget_seconds, "Seconds allowed per method");
    bench_cmd->add_option("--memory-budget-mb", bench_args.memory_budget_mb,
                          "Megabytes one cell may allocate (default 80% of available)");
    bench_cmd->add_flag("--parallel", bench_args.parallel, "Run latent loops on all threads");
    bench_cmd->add_option("-o,--out", bench_args.out, "timings.csv (default stdout)");
    bench_cmd->add_option("--summary", bench_args.summary, "Slope summary JSON");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitInput;
    }

    try {
        if (*fit_cmd) return run_fit(fit_args);
        if (*predict_cmd) return run_predict(predict_args);
        if (*sample_cmd) return run_sample(sample_args);
        if (*sim_cmd) return run_simulate(sim_args);
        if (*bench_cmd) return run_benchmark(bench_args);
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
