#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "kaczmarz/bench.hpp"
#include "kaczmarz/datasets.hpp"
#include "kaczmarz/io.hpp"
#include "kaczmarz/solvers.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

/// Bad input the user can fix by changing the invocation or config.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GenerateArgs {
    std::string family;
    std::size_t m = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::string out;
    std::optional<double> row_sigma;
    std::string csv_dir;
};

struct SolveArgs {
    std::string in;
    std::string method;
    std::uint64_t iters = 1000;
    std::uint64_t seed = 0;
    double alpha = 1.0;
    std::size_t q = 1;
    std::string selector;
    std::optional<double> eps;
    std::string trace;
    std::uint64_t stride = 1;
};

struct CalibrateArgs {
    std::string in;
    std::vector<std::string> methods;
    double eps = kz::bench::kDefaultEpsilon;
    std::size_t seeds = kz::bench::kDefaultSeedCount;
    std::uint64_t cap = kz::bench::kDefaultIterationCap;
    std::uint64_t master_seed = 0;
    bool time = false;
};

struct BenchArgs {
    std::string config;
    std::string out;
    std::optional<std::size_t> threads;
};

kz::Method method_arg(const std::string& id) {
    try {
        return kz::parse_method(id);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
}

int cmd_generate(const GenerateArgs& a) {
    kz::DatasetSpec spec;
    try {
        spec.family = kz::parse_family(a.family);
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    spec.m_max = a.m;
    spec.n_max = a.n;
    spec.seed = a.seed;
    spec.fixed_row_sigma = a.row_sigma;
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const auto g = kz::generate(spec);
    const auto files = kz::write_dataset(a.out, g);
    if (!a.csv_dir.empty()) {
        std::filesystem::create_directories(a.csv_dir);
        const auto stem = std::filesystem::path(a.out).stem().string();
        std::ofstream am(std::filesystem::path(a.csv_dir) / (stem + "_A.csv"));
        kz::io::write_matrix_csv(am, g.system.A);
        std::ofstream bv(std::filesystem::path(a.csv_dir) / (stem + "_b.csv"));
        kz::io::write_vector_csv(bv, g.system.b);
    }
    fmt::print("{} {}x{} seed {} -> {}\n", kz::to_string(spec.family), g.rows(), g.cols(), spec.seed,
               files.matrix.string());
    return kExitOk;
}

int cmd_solve(const SolveArgs& a) {
    const kz::Method method = method_arg(a.method);
    const kz::DenseSystem system = kz::load_dataset(a.in);
    const kz::DenseVector* ref = system.reference();
    if (!ref) throw std::runtime_error("dataset has no reference solution");

    kz::SolverConfig config;
    config.method = method;
    config.max_iterations = a.iters;
    config.seed = a.seed;
    config.alpha = a.alpha;
    config.rka_threads = a.q;
    config.stop_epsilon = a.eps;
    if (!a.trace.empty()) config.trace_stride = a.stride;
    try {
        config.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    kz::SolveRun run;
    if (!a.selector.empty()) {
        if (!kz::kaczmarz_selector(method)) {
            throw UsageError("--selector applies only to single-row Kaczmarz methods");
        }
        kz::SelectorSpec spec;
        try {
            spec = kz::parse_selector_spec(a.selector);
        } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
        }
        run = kz::run_kaczmarz(system, spec, config, ref);
    } else {
        run = kz::solve(system, config, ref);
    }

    if (!a.trace.empty()) {
        std::ofstream out(a.trace);
        if (!out) throw std::runtime_error("cannot open trace file: " + a.trace);
        out << "iteration,sq_error\n";
        for (const auto& p : run.trace) out << fmt::format("{},{}\n", p.iteration, p.sq_error);
    }
    fmt::print("iterations {}\n", run.iterations);
    fmt::print("final_sq_error {}\n", kz::squared_distance(run.x.span(), ref->span()));
    fmt::print(stderr, "wall_time_ns {}\n", run.wall_time.count());
    return kExitOk;
}

int cmd_calibrate(const CalibrateArgs& a) {
    std::vector<kz::Method> methods;
    for (const auto& id : a.methods) methods.push_back(method_arg(id));
    const kz::DenseSystem system = kz::load_dataset(a.in);

    kz::bench::BenchOptions options;
    options.epsilon = a.eps;
    options.seeds = a.seeds;
    options.iteration_cap = a.cap;
    options.master_seed = a.master_seed;

    bool any = false;
    for (const kz::Method method : methods) {
        const auto cal = kz::bench::calibrate(method, system, options);
        if (!cal.converged) {
            fmt::print("{:<12} {}\n", kz::to_string(method), cal.diverged ? "diverged" : "nonconvergent");
            continue;
        }
        any = true;
        if (a.time) {
            const auto rec = kz::bench::timed_run(method, system, cal.k, options);
            fmt::print("{:<12} k={} mean_time_ms={:.3f} std%={:.2f}\n", kz::to_string(method), cal.k,
                       rec.mean_time_ns / 1e6, rec.percent_std());
        } else {
            fmt::print("{:<12} k={}\n", kz::to_string(method), cal.k);
        }
    }
    return any || methods.empty() ? kExitOk : kExitRuntime;
}

int cmd_bench(const BenchArgs& a) {
    kz::bench::CampaignConfig config;
    {
        std::ifstream in(a.config);
        if (!in) throw std::runtime_error("cannot open config: " + a.config);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            throw UsageError(fmt::format("{}: malformed JSON at byte {}: {}", a.config, e.byte, e.what()));
        }
        try {
            config = kz::bench::parse_campaign_config(j);
        } catch (const kz::bench::ConfigError& e) {
            throw UsageError(fmt::format("{}: {}", a.config, e.what()));
        }
    }

    const std::size_t cells = config.datasets.size() * config.methods.size();
    std::size_t workers = kz::bench::campaign_workers(cells);
    if (a.threads) workers = std::max<std::size_t>(1, std::min(workers, *a.threads));
    const auto records = kz::bench::run_campaign(config, workers);

    {
        std::ofstream out(a.out);
        if (!out) throw std::runtime_error("cannot open for writing: " + a.out);
        kz::bench::write_csv(out, records);
    }
    auto meta_path = std::filesystem::path(a.out);
    meta_path.replace_extension(".meta.json");
    {
        std::ofstream meta(meta_path);
        meta << kz::bench::campaign_metadata(config).dump(2) << '\n';
    }

    fmt::print("{}", kz::bench::format_summary(records));
    std::size_t ok = 0;
    for (const auto& r : records) {
        if (r.status == "ok") ++ok;
        if (!r.detail.empty()) fmt::print(stderr, "{} {}x{} {}: {}\n", r.family, r.m, r.n,
                                          kz::to_string(r.method), r.detail);
    }
    fmt::print("{} of {} cells ok; wrote {}\n", ok, records.size(), a.out);
    return records.empty() || ok > 0 ? kExitOk : kExitRuntime;
}

int cmd_report(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    fmt::print("{}", kz::bench::format_summary(kz::bench::read_csv(in)));
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kaczmarz-type row-action solvers, dataset generators and benchmarks"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Generate a synthetic dataset");
    generate->add_option("--family", gen.family, "ds1, ds2 or ds3")->required();
    generate->add_option("--m", gen.m, "Rows")->required();
    generate->add_option("--n", gen.n, "Columns")->required();
    generate->add_option("--seed", gen.seed, "Generator seed")->required();
    generate->add_option("--out", gen.out, "Matrix file; sidecars are written next to it")->required();
    generate->add_option("--row-sigma", gen.row_sigma, "Fixed per-row sigma (near-equal row norms)");
    generate->add_option("--csv", gen.csv_dir, "Also export A and b as CSV into this directory");

    SolveArgs sol;
    auto* solve = app.add_subcommand("solve", "Run one solver on a dataset");
    solve->add_option("--in", sol.in, "Dataset matrix or sidecar path")->required()->check(CLI::ExistingFile);
    solve->add_option("--method", sol.method, "Method id")->required();
    solve->add_option("--iters", sol.iters, "Maximum iterations")->capture_default_str();
    solve->add_option("--seed", sol.seed, "Run seed")->capture_default_str();
    solve->add_option("--alpha", sol.alpha, "Relaxation / RKA weight")->capture_default_str();
    solve->add_option("--q", sol.q, "RKA rows averaged per step")->capture_default_str();
    solve->add_option("--selector", sol.selector, "Override the row selector of a Kaczmarz method");
    solve->add_option("--eps", sol.eps, "Stop once the squared error is below this value");
    solve->add_option("--trace", sol.trace, "Write the error trace to this CSV file");
    solve->add_option("--stride", sol.stride, "Trace stride")->capture_default_str()->check(CLI::PositiveNumber);

    CalibrateArgs cal;
    auto* calibrate = app.add_subcommand("calibrate", "Calibrate iteration budgets on a dataset");
    calibrate->add_option("--in", cal.in, "Dataset matrix or sidecar path")->required()->check(CLI::ExistingFile);
    calibrate->add_option("--method", cal.methods, "Method ids")->required();
    calibrate->add_option("--eps", cal.eps, "Target squared error")->capture_default_str();
    calibrate->add_option("--seeds", cal.seeds, "Seeds per method")->capture_default_str()->check(CLI::PositiveNumber);
    calibrate->add_option("--cap", cal.cap, "Iteration cap")->capture_default_str()->check(CLI::PositiveNumber);
    calibrate->add_option("--master-seed", cal.master_seed, "Master seed")->capture_default_str();
    calibrate->add_flag("--time", cal.time, "Also time the calibrated budget");

    BenchArgs bench;
    auto* benchmark = app.add_subcommand("bench", "Run a benchmark campaign");
    benchmark->add_option("--config", bench.config, "Campaign JSON")->required()->check(CLI::ExistingFile);
    benchmark->add_option("--out", bench.out, "Output CSV")->required();
    benchmark->add_option("--threads", bench.threads, "Worker cap")->check(CLI::PositiveNumber);

    std::string report_in;
    auto* report = app.add_subcommand("report", "Summarize a benchmark CSV");
    report->add_option("--in", report_in, "Benchmark CSV")->required()->check(CLI::ExistingFile);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*generate) return cmd_generate(gen);
        if (*solve) return cmd_solve(sol);
        if (*calibrate) return cmd_calibrate(cal);
        if (*benchmark) return cmd_bench(bench);
        if (*report) return cmd_report(report_in);
    } catch (const UsageError& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitUsage;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kExitRuntime;
    }
    return kExitUsage;
}
