#include "kaczmarz/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

namespace kz::bench {

namespace {

SolverConfig base_config(Method method, const BenchOptions& options) {
    SolverConfig config;
    config.method = method;
    config.alpha = options.alpha;
    config.rka_threads = options.rka_threads;
    return config;
}

const DenseVector& require_reference(const DenseSystem& system, const DenseVector* reference) {
    const DenseVector* ref = reference ? reference : system.reference();
    if (!ref) throw std::invalid_argument("benchmark requires a reference solution (x* or x_ls)");
    return *ref;
}

}  // namespace

CalibrationResult calibrate(Method method, const DenseSystem& system, const BenchOptions& options,
                            const DenseVector* reference) {
    if (!(options.epsilon > 0.0)) throw std::invalid_argument("calibrate: epsilon must be positive");
    if (options.seeds < 1) throw std::invalid_argument("calibrate: need at least one seed");
    if (options.iteration_cap < 1) throw std::invalid_argument("calibrate: iteration cap must be positive");
    const DenseVector& ref = require_reference(system, reference);

    CalibrationResult result;
    result.method = method;
    const std::size_t runs = is_randomized(method) ? options.seeds : 1;
    for (std::size_t r = 0; r < runs; ++r) {
        SolverConfig config = base_config(method, options);
        config.seed = options.seed(r);
        config.max_iterations = options.iteration_cap;
        config.stop_epsilon = options.epsilon;
        try {
            const SolveRun run = solve(system, config, &ref);
            const bool reached = run.converged && check_convergence(run.x.span(), ref.span(), options.epsilon);
            result.per_seed.push_back(reached ? std::optional(std::max<std::uint64_t>(run.iterations, 1))
                                              : std::nullopt);
        } catch (const DivergenceError&) {
            result.diverged = true;
            result.per_seed.push_back(std::nullopt);
        }
    }
    if (runs == 1 && options.seeds > 1) {
        result.per_seed.resize(options.seeds, result.per_seed.front());
    }

    std::vector<std::uint64_t> ks;
    for (const auto& k : result.per_seed) ks.push_back(k.value_or(UINT64_MAX));
    const std::size_t mid = (ks.size() - 1) / 2;
    std::nth_element(ks.begin(), ks.begin() + static_cast<std::ptrdiff_t>(mid), ks.end());
    result.converged = ks[mid] != UINT64_MAX;
    result.k = result.converged ? ks[mid] : options.iteration_cap;
    return result;
}

BenchRecord timed_run(Method method, const DenseSystem& system, std::uint64_t k,
                      const BenchOptions& options, const DenseVector* reference) {
    if (k < 1) throw std::invalid_argument("timed_run: k must be at least 1");
    if (options.seeds < 1) throw std::invalid_argument("timed_run: need at least one seed");
    const DenseVector& ref = require_reference(system, reference);

    BenchRecord rec;
    rec.method = method;
    rec.m = system.A.rows();
    rec.n = system.A.cols();
    rec.epsilon = options.epsilon;
    rec.calibrated_k = k;
    rec.seed_count = options.seeds;

    SolverConfig config = base_config(method, options);
    config.max_iterations = k;

    if (options.warmup) {
        config.seed = options.seed(0);
        (void)solve(system, config, &ref);
    }

    DenseVector x_sum(system.A.cols());
    double err_sum = 0.0;
    for (std::size_t r = 0; r < options.seeds; ++r) {
        config.seed = options.seed(r);
        const SolveRun run = solve(system, config, &ref);
        rec.seeds.push_back(config.seed);
        rec.times_ns.push_back(run.wall_time.count());
        err_sum += squared_distance(run.x.span(), ref.span());
        for (std::size_t j = 0; j < x_sum.size(); ++j) x_sum[j] += run.x[j];
    }

    const double count = static_cast<double>(options.seeds);
    double t_sum = 0.0;
    for (auto t : rec.times_ns) t_sum += static_cast<double>(t);
    rec.mean_time_ns = t_sum / count;
    double var = 0.0;
    for (auto t : rec.times_ns) {
        const double d = static_cast<double>(t) - rec.mean_time_ns;
        var += d * d;
    }
    rec.std_time_ns = options.seeds > 1 ? std::sqrt(var / (count - 1.0)) : 0.0;
    rec.mean_final_sq_error = err_sum / count;
    for (double& v : x_sum) v /= count;
    rec.averaged_x_sq_error = squared_distance(x_sum.span(), ref.span());
    return rec;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
T get_field(const nlohmann::json& obj, const std::string& key, const std::string& path) {
    if (!obj.contains(key)) throw ConfigError(path + "." + key, "missing required field");
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + "." + key, std::string("wrong type (") + e.what() + ")");
    }
}

template <typename T>
T get_optional(const nlohmann::json& obj, const std::string& key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    return get_field<T>(obj, key, path);
}

std::size_t positive_count(const nlohmann::json& obj, const std::string& key, const std::string& path,
                           std::optional<std::size_t> fallback = std::nullopt) {
    if (!obj.contains(key)) {
        if (fallback) return *fallback;
        throw ConfigError(path + "." + key, "missing required field");
    }
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
        throw ConfigError(path + "." + key, "expected a positive integer");
    }
    return v.get<std::size_t>();
}

}  // namespace

CampaignConfig parse_campaign_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("$", "expected a JSON object");
    CampaignConfig config;

    if (!j.contains("datasets") || !j["datasets"].is_array()) {
        throw ConfigError("$.datasets", "expected an array");
    }
    for (std::size_t d = 0; d < j["datasets"].size(); ++d) {
        const std::string path = "$.datasets[" + std::to_string(d) + "]";
        const auto& e = j["datasets"][d];
        if (!e.is_object()) throw ConfigError(path, "expected an object");
        DatasetEntry entry;
        try {
            entry.family = parse_family(get_field<std::string>(e, "family", path));
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(path + ".family", ex.what());
        }
        entry.m = positive_count(e, "m", path);
        entry.n = positive_count(e, "n", path);
        entry.seed = get_optional<std::uint64_t>(e, "seed", path, 0);
        if (e.contains("row_sigma")) entry.fixed_row_sigma = get_field<double>(e, "row_sigma", path);
        if (entry.m < entry.n) throw ConfigError(path, "systems are overdetermined, need m >= n");
        if (entry.family == DatasetFamily::DS2 && entry.n < 5) throw ConfigError(path + ".n", "DS2 requires n >= 5");
        config.datasets.push_back(entry);
    }

    if (!j.contains("methods") || !j["methods"].is_array()) {
        throw ConfigError("$.methods", "expected an array");
    }
    for (std::size_t k = 0; k < j["methods"].size(); ++k) {
        const std::string path = "$.methods[" + std::to_string(k) + "]";
        const auto& v = j["methods"][k];
        if (!v.is_string()) throw ConfigError(path, "expected a method id string");
        try {
            config.methods.push_back(parse_method(v.get<std::string>()));
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(path, ex.what());
        }
    }

    auto& o = config.options;
    o.epsilon = get_optional<double>(j, "epsilon", "$", kDefaultEpsilon);
    if (!(o.epsilon > 0.0)) throw ConfigError("$.epsilon", "must be positive");
    o.seeds = positive_count(j, "seeds", "$", kDefaultSeedCount);
    o.iteration_cap = positive_count(j, "iteration_cap", "$", kDefaultIterationCap);
    o.master_seed = get_optional<std::uint64_t>(j, "master_seed", "$", 0);
    o.alpha = get_optional<double>(j, "alpha", "$", 1.0);
    o.rka_threads = positive_count(j, "rka_threads", "$", 1);
    return config;
}

CampaignConfig load_campaign_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config: " + path.string());
    return parse_campaign_config(nlohmann::json::parse(in));
}

std::size_t campaign_workers(std::size_t cells) {
    std::size_t workers = std::max(1U, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("KZM_THREADS")) {
        char* end = nullptr;
        const long cap = std::strtol(env, &end, 10);
        if (end != env && cap >= 1) workers = std::min<std::size_t>(workers, static_cast<std::size_t>(cap));
    }
    return std::max<std::size_t>(1, std::min(workers, cells));
}

std::vector<BenchRecord> run_campaign(const CampaignConfig& config, std::size_t workers) {
    // Generate each (family, seed, sigma) source once at its largest size.
    using Key = std::tuple<DatasetFamily, std::uint64_t, double>;
    auto key_of = [](const DatasetEntry& e) {
        return Key{e.family, e.seed, e.fixed_row_sigma.value_or(-1.0)};
    };
    std::map<Key, std::pair<std::size_t, std::size_t>> extents;
    for (const auto& e : config.datasets) {
        auto& [m, n] = extents[key_of(e)];
        m = std::max(m, e.m);
        n = std::max(n, e.n);
    }
    std::map<Key, GeneratedSystem> sources;
    for (const auto& [key, ext] : extents) {
        DatasetSpec spec;
        spec.family = std::get<0>(key);
        spec.seed = std::get<1>(key);
        if (std::get<2>(key) > 0.0) spec.fixed_row_sigma = std::get<2>(key);
        spec.m_max = ext.first;
        spec.n_max = ext.second;
        sources.emplace(key, generate(spec));
    }
    std::vector<GeneratedSystem> systems;
    systems.reserve(config.datasets.size());
    for (const auto& e : config.datasets) {
        const auto& src = sources.at(key_of(e));
        systems.push_back(e.m == src.rows() && e.n == src.cols() ? src : crop(src, e.m, e.n));
    }

    const std::size_t cells = config.datasets.size() * config.methods.size();
    std::vector<BenchRecord> records(cells);
    std::atomic<std::size_t> next{0};

    auto run_cell = [&](std::size_t c) {
        const std::size_t d = c / config.methods.size();
        const Method method = config.methods[c % config.methods.size()];
        const auto& g = systems[d];
        BenchRecord rec;
        try {
            const CalibrationResult cal = calibrate(method, g.system, config.options);
            if (cal.converged) {
                rec = timed_run(method, g.system, cal.k, config.options);
            } else {
                rec.method = method;
                rec.m = g.rows();
                rec.n = g.cols();
                rec.epsilon = config.options.epsilon;
                rec.calibrated_k = cal.k;
                rec.seed_count = config.options.seeds;
                rec.mean_final_sq_error = std::nan("");
                rec.averaged_x_sq_error = std::nan("");
                rec.status = cal.diverged ? "diverged" : "nonconvergent";
            }
        } catch (const std::exception& ex) {
            rec = BenchRecord{};
            rec.method = method;
            rec.m = g.rows();
            rec.n = g.cols();
            rec.epsilon = config.options.epsilon;
            rec.seed_count = config.options.seeds;
            rec.mean_final_sq_error = std::nan("");
            rec.status = dynamic_cast<const DivergenceError*>(&ex) ? "diverged" : "error";
            rec.detail = ex.what();
        }
        rec.family = std::string(to_string(g.spec.family));
        records[c] = std::move(rec);
    };

    workers = std::max<std::size_t>(1, std::min(workers, cells));
    if (workers == 1) {
        for (std::size_t c = 0; c < cells; ++c) run_cell(c);
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t c = next++; c < cells; c = next++) run_cell(c);
            });
        }
    }
    return records;
}

// ---------------------------------------------------------------------------

void write_csv(std::ostream& out, const std::vector<BenchRecord>& records) {
    out << kCsvHeader << '\n';
    for (const auto& r : records) {
        out << fmt::format("{},{},{},{},{},{},{},{},{},{},{}\n", r.family, to_string(r.method), r.m, r.n,
                           r.epsilon, r.calibrated_k, r.seed_count, r.mean_time_ns, r.std_time_ns,
                           r.mean_final_sq_error, r.status);
    }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    if (s == "nan" || s == "-nan") return std::nan("");
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("bad number '" + s + "'");
    return v;
}

}  // namespace

std::vector<BenchRecord> read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("benchmark CSV: empty input");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kCsvHeader) throw std::runtime_error("benchmark CSV: unexpected header");
    std::vector<BenchRecord> records;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto f = split_csv(line);
        if (f.size() != 11) {
            throw std::runtime_error("benchmark CSV line " + std::to_string(lineno) + ": expected 11 fields");
        }
        try {
            BenchRecord r;
            r.family = f[0];
            r.method = parse_method(f[1]);
            r.m = std::stoull(f[2]);
            r.n = std::stoull(f[3]);
            r.epsilon = parse_double(f[4]);
            r.calibrated_k = std::stoull(f[5]);
            r.seed_count = std::stoull(f[6]);
            r.mean_time_ns = parse_double(f[7]);
            r.std_time_ns = parse_double(f[8]);
            r.mean_final_sq_error = parse_double(f[9]);
            r.status = f[10];
            records.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::runtime_error("benchmark CSV line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return records;
}

nlohmann::json campaign_metadata(const CampaignConfig& config) {
    nlohmann::json j;
    j["prng"] = kPrngName;
    j["normal_algorithm"] = kNormalAlgorithm;
    j["seed_derivation"] = "master_seed XOR run_index";
    j["calibration_aggregate"] = "lower median over seeds (failed seeds count as infinite)";
    j["convergence_check"] = "every iteration, ||x_k - ref||^2 < epsilon";
    j["warmup_runs"] = config.options.warmup ? 1 : 0;
    j["clock"] = "steady_clock wall time, iteration loop only";
    j["master_seed"] = config.options.master_seed;
    j["seeds"] = config.options.seeds;
    j["epsilon"] = config.options.epsilon;
    j["iteration_cap"] = config.options.iteration_cap;
    return j;
}

std::string format_summary(const std::vector<BenchRecord>& records) {
    using Key = std::tuple<std::string, std::size_t, std::size_t>;
    std::map<Key, std::vector<const BenchRecord*>> groups;
    for (const auto& r : records) groups[{r.family, r.m, r.n}].push_back(&r);

    std::string out;
    for (auto& [key, rows] : groups) {
        std::stable_sort(rows.begin(), rows.end(), [](const BenchRecord* a, const BenchRecord* b) {
            const bool ao = a->status == "ok", bo = b->status == "ok";
            if (ao != bo) return ao;
            return a->mean_time_ns < b->mean_time_ns;
        });
        out += fmt::format("{} {}x{}\n", std::get<0>(key), std::get<1>(key), std::get<2>(key));
        out += fmt::format("  {:<12} {:>12} {:>16} {:>8} {:>14}  {}\n", "method", "k", "mean time [ms]",
                           "std %", "final err", "status");
        for (const BenchRecord* r : rows) {
            out += fmt::format("  {:<12} {:>12} {:>16.3f} {:>8.2f} {:>14.3e}  {}\n", to_string(r->method),
                               r->calibrated_k, r->mean_time_ns / 1e6, r->percent_std(),
                               r->mean_final_sq_error, r->status);
        }
    }
    return out;
}

}  // namespace kz::bench
