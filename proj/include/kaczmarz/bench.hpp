#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kaczmarz/datasets.hpp"
#include "kaczmarz/linalg.hpp"
#include "kaczmarz/solvers.hpp"

namespace kz::bench {

inline constexpr double kDefaultEpsilon = 1e-8;
inline constexpr std::uint64_t kDefaultIterationCap = 10'000'000;
inline constexpr std::size_t kDefaultSeedCount = 10;

struct BenchOptions {
    double epsilon = kDefaultEpsilon;
    std::size_t seeds = kDefaultSeedCount;
    std::uint64_t iteration_cap = kDefaultIterationCap;
    std::uint64_t master_seed = 0;
    double alpha = 1.0;
    std::size_t rka_threads = 1;
    bool warmup = true;

    /// Seed of run r: master_seed XOR r.
    std::uint64_t seed(std::size_t r) const noexcept { return run_seed(master_seed, r); }
};

struct CalibrationResult {
    Method method;
    std::uint64_t k = 0;  // median over seeds; the cap when not converged
    bool converged = false;
    std::vector<std::optional<std::uint64_t>> per_seed;  // nullopt: cap reached or diverged
    bool diverged = false;
};

/// For each seed, run with a convergence check every iteration and take the
/// first k with ||x_k - ref||^2 < epsilon. Returns the lower median across
/// seeds, counting failed seeds as infinite. Deterministic methods run once.
CalibrationResult calibrate(Method method, const DenseSystem& system, const BenchOptions& options,
                            const DenseVector* reference = nullptr);

struct BenchRecord {
    std::string family;
    Method method = Method::RK;
    std::size_t m = 0;
    std::size_t n = 0;
    double epsilon = kDefaultEpsilon;
    std::uint64_t calibrated_k = 0;
    std::size_t seed_count = 0;
    std::vector<std::int64_t> times_ns;
    std::vector<std::uint64_t> seeds;
    double mean_time_ns = 0.0;
    double std_time_ns = 0.0;
    double mean_final_sq_error = 0.0;     // mean over seeds of ||x_final - ref||^2
    double averaged_x_sq_error = 0.0;     // ||mean_seed(x_final) - ref||^2
    std::string status = "ok";            // ok | nonconvergent | diverged | error
    std::string detail;

    double percent_std() const noexcept {
        return mean_time_ns > 0.0 ? 100.0 * std_time_ns / mean_time_ns : 0.0;
    }
};

/// Runs `seed_count` runs of exactly k iterations with no convergence checks,
/// each timed with a monotonic clock, after one untimed warm-up run.
BenchRecord timed_run(Method method, const DenseSystem& system, std::uint64_t k,
                      const BenchOptions& options, const DenseVector* reference = nullptr);

// ---------------------------------------------------------------------------
// Campaigns.

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string field_path, const std::string& message)
        : std::runtime_error(field_path + ": " + message), path_(std::move(field_path)) {}
    const std::string& field_path() const noexcept { return path_; }

private:
    std::string path_;
};

struct DatasetEntry {
    DatasetFamily family = DatasetFamily::DS1;
    std::size_t m = 0;
    std::size_t n = 0;
    std::uint64_t seed = 0;
    std::optional<double> fixed_row_sigma;
};

struct CampaignConfig {
    std::vector<DatasetEntry> datasets;
    std::vector<Method> methods;
    BenchOptions options;
};

/// {datasets:[{family,m,n,seed[,row_sigma]}], methods:[id], epsilon, seeds,
///  iteration_cap, master_seed[, alpha, rka_threads]}
CampaignConfig parse_campaign_config(const nlohmann::json& j);
CampaignConfig load_campaign_config(const std::filesystem::path& path);

/// One record per (dataset, method) cell, dataset-major. Datasets sharing
/// (family, seed, row sigma) are generated once at the largest requested size
/// and cropped. Cells run on up to `workers` threads; a failing cell yields a
/// record with a non-ok status and the campaign continues.
std::vector<BenchRecord> run_campaign(const CampaignConfig& config, std::size_t workers = 1);

/// Worker count: hardware concurrency, capped by KZM_THREADS when set.
std::size_t campaign_workers(std::size_t cells);

inline constexpr const char* kCsvHeader =
    "family,method,m,n,epsilon,calibrated_k,seed_count,mean_time_ns,std_time_ns,"
    "mean_final_sq_error,status";

void write_csv(std::ostream& out, const std::vector<BenchRecord>& records);
std::vector<BenchRecord> read_csv(std::istream& in);

/// Run metadata (generator, calibration aggregate, clock) as JSON.
nlohmann::json campaign_metadata(const CampaignConfig& config);

/// Human-readable table ordering methods by mean time within each
/// (family, m, n).
std::string format_summary(const std::vector<BenchRecord>& records);

}  // namespace kz::bench
