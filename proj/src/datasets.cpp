#include "kaczmarz/datasets.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "kaczmarz/io.hpp"
#include "kaczmarz/random.hpp"
#include "kaczmarz/solvers.hpp"

namespace kz {

namespace {

constexpr std::size_t kCoherentChanges = 5;

/// DS1 row procedure: mu ~ U(-5,5), sigma ~ U(1,20) (or fixed), entries
/// ~ N(mu, sigma). Redrawn if the row comes out all zero.
void fill_ds1_row(std::span<double> row, Xoshiro256& rng, NormalSampler& normal,
                  const std::optional<double>& fixed_sigma) {
    do {
        const double mu = rng.uniform(-5.0, 5.0);
        const double sigma = fixed_sigma ? *fixed_sigma : rng.uniform(1.0, 20.0);
        for (double& v : row) v = normal(rng, mu, sigma);
    } while (squared_norm(row) == 0.0);
}

DenseVector consistent_rhs(const DenseMatrix& A, const DenseVector& x) { return matvec(A, x); }

}  // namespace

DatasetFamily parse_family(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "ds1") return DatasetFamily::DS1;
    if (lower == "ds2") return DatasetFamily::DS2;
    if (lower == "ds3") return DatasetFamily::DS3;
    throw std::invalid_argument("unknown dataset family '" + std::string(text) + "'");
}

std::string_view to_string(DatasetFamily f) noexcept {
    switch (f) {
        case DatasetFamily::DS1: return "DS1";
        case DatasetFamily::DS2: return "DS2";
        case DatasetFamily::DS3: return "DS3";
    }
    return "?";
}

void DatasetSpec::validate() const {
    if (n_max < 1) throw std::invalid_argument("dataset: n must be at least 1");
    if (m_max < n_max) throw std::invalid_argument("dataset: systems are overdetermined, need m >= n");
    if (family == DatasetFamily::DS2 && n_max < kCoherentChanges) {
        throw std::invalid_argument("dataset: DS2 requires n >= 5 (n < 5)");
    }
    if (fixed_row_sigma && !(*fixed_row_sigma > 0.0)) {
        throw std::invalid_argument("dataset: fixed row sigma must be positive");
    }
}

std::uint64_t noise_seed_for(std::uint64_t seed) noexcept {
    std::uint64_t state = seed ^ 0x6E6F6973655F6473ULL;
    return splitmix64(state);
}

GeneratedSystem gen_ds1(const DatasetSpec& spec) {
    spec.validate();
    const std::size_t m = spec.m_max, n = spec.n_max;
    Xoshiro256 rng(spec.seed);
    NormalSampler normal;

    std::vector<double> data(m * n);
    for (std::size_t i = 0; i < m; ++i) {
        fill_ds1_row(std::span<double>(data.data() + i * n, n), rng, normal, spec.fixed_row_sigma);
    }
    DenseVector x(n);
    fill_ds1_row(x.span(), rng, normal, std::nullopt);

    DenseMatrix A(m, n, std::move(data));
    DenseVector b = consistent_rhs(A, x);
    GeneratedSystem g{DenseSystem{std::move(A), std::move(b), x, std::nullopt}, spec, x,
                      std::nullopt, std::nullopt};
    g.spec.family = DatasetFamily::DS1;
    return g;
}

GeneratedSystem gen_ds2(const DatasetSpec& spec) {
    spec.validate();
    const std::size_t m = spec.m_max, n = spec.n_max;
    Xoshiro256 rng(spec.seed);
    NormalSampler normal;

    std::vector<double> data(m * n);
    for (std::size_t j = 0; j < n; ++j) data[j] = normal(rng, 2.0, 20.0);
    std::array<std::size_t, kCoherentChanges> picked{};
    for (std::size_t i = 1; i < m; ++i) {
        double* row = data.data() + i * n;
        std::copy_n(row - n, n, row);
        // Five distinct columns, by rejection.
        std::size_t count = 0;
        while (count < kCoherentChanges) {
            const std::size_t c = rng.index(n);
            if (std::find(picked.begin(), picked.begin() + static_cast<std::ptrdiff_t>(count), c) ==
                picked.begin() + static_cast<std::ptrdiff_t>(count)) {
                picked[count++] = c;
            }
        }
        for (std::size_t c : picked) row[c] = normal(rng, 2.0, 20.0);
    }
    DenseVector x(n);
    fill_ds1_row(x.span(), rng, normal, std::nullopt);

    DenseMatrix A(m, n, std::move(data));
    DenseVector b = consistent_rhs(A, x);
    GeneratedSystem g{DenseSystem{std::move(A), std::move(b), x, std::nullopt}, spec, x,
                      std::nullopt, std::nullopt};
    g.spec.family = DatasetFamily::DS2;
    return g;
}

GeneratedSystem gen_ds3(const DatasetSpec& spec) {
    DatasetSpec base = spec;
    base.family = DatasetFamily::DS1;
    GeneratedSystem g = gen_ds1(base);
    g.spec = spec;
    g.spec.family = DatasetFamily::DS3;

    const std::uint64_t nseed = noise_seed_for(spec.seed);
    Xoshiro256 rng(nseed);
    NormalSampler normal;
    DenseVector noise(g.rows());
    for (double& e : noise) e = normal(rng, 0.0, spec.noise_sigma);
    for (std::size_t i = 0; i < noise.size(); ++i) g.system.b[i] += noise[i];

    g.noise = std::move(noise);
    g.noise_seed = nseed;
    g.system.x_star.reset();
    g.system.x_ls = least_squares_cgls(g.system.A, g.system.b, kLeastSquaresTolerance);
    return g;
}

GeneratedSystem generate(const DatasetSpec& spec) {
    switch (spec.family) {
        case DatasetFamily::DS1: return gen_ds1(spec);
        case DatasetFamily::DS2: return gen_ds2(spec);
        case DatasetFamily::DS3: return gen_ds3(spec);
    }
    throw std::logic_error("generate: unhandled family");
}

GeneratedSystem crop(const GeneratedSystem& g, std::size_t m, std::size_t n) {
    if (m == 0 || n == 0 || m > g.rows() || n > g.cols()) {
        throw DimensionError("crop: target dimensions out of range");
    }
    if (m < n) throw DimensionError("crop: systems are overdetermined, need m >= n");
    if (g.spec.family == DatasetFamily::DS2 && n < kCoherentChanges) {
        throw DimensionError("crop: DS2 requires n >= 5");
    }
    DenseMatrix A = g.system.A.crop(m, n);
    DenseVector x(std::vector<double>(g.x_star.begin(), g.x_star.begin() + static_cast<std::ptrdiff_t>(n)));
    DenseVector b = consistent_rhs(A, x);

    GeneratedSystem out{DenseSystem{std::move(A), std::move(b), std::nullopt, std::nullopt}, g.spec, x,
                        std::nullopt, g.noise_seed};
    if (g.noise) {
        DenseVector noise(std::vector<double>(g.noise->begin(),
                                              g.noise->begin() + static_cast<std::ptrdiff_t>(m)));
        for (std::size_t i = 0; i < m; ++i) out.system.b[i] += noise[i];
        out.noise = std::move(noise);
        out.system.x_ls = least_squares_cgls(out.system.A, out.system.b, kLeastSquaresTolerance);
    } else {
        out.system.x_star = x;
    }
    return out;
}

// ---------------------------------------------------------------------------

DatasetFiles dataset_files(const std::filesystem::path& matrix_path) {
    auto base = matrix_path;
    base.replace_extension();
    const auto stem = base.string();
    return {matrix_path, stem + ".rhs.kzm", stem + ".ref.kzm", stem + ".json"};
}

namespace {

void write_sidecar(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace

DatasetFiles write_dataset(const std::filesystem::path& matrix_path, const GeneratedSystem& g) {
    const auto files = dataset_files(matrix_path);
    io::write_matrix(files.matrix, g.system.A);
    io::write_vector(files.rhs, g.system.b);
    const DenseVector* ref = g.system.reference();
    io::write_vector(files.reference, ref ? *ref : g.x_star);

    nlohmann::json j;
    j["family"] = to_string(g.spec.family);
    j["m"] = g.rows();
    j["n"] = g.cols();
    j["m_max"] = g.spec.m_max;
    j["n_max"] = g.spec.n_max;
    j["seed"] = g.spec.seed;
    j["prng"] = kPrngName;
    j["normal_algorithm"] = kNormalAlgorithm;
    j["matrix_file"] = files.matrix.filename().string();
    j["rhs_file"] = files.rhs.filename().string();
    j["reference_solution_file"] = files.reference.filename().string();
    j["reference_kind"] = g.system.x_ls ? "x_ls" : "x_star";
    if (g.spec.fixed_row_sigma) j["fixed_row_sigma"] = *g.spec.fixed_row_sigma;
    if (g.noise_seed) {
        j["noise_seed"] = *g.noise_seed;
        j["noise_sigma"] = g.spec.noise_sigma;
    }
    write_sidecar(files.sidecar, j);
    return files;
}

DatasetFiles write_system(const std::filesystem::path& matrix_path, const DenseSystem& system) {
    const auto files = dataset_files(matrix_path);
    io::write_matrix(files.matrix, system.A);
    io::write_vector(files.rhs, system.b);
    nlohmann::json j;
    j["family"] = "custom";
    j["m"] = system.A.rows();
    j["n"] = system.A.cols();
    j["matrix_file"] = files.matrix.filename().string();
    j["rhs_file"] = files.rhs.filename().string();
    if (const DenseVector* ref = system.reference()) {
        io::write_vector(files.reference, *ref);
        j["reference_solution_file"] = files.reference.filename().string();
        j["reference_kind"] = system.x_ls ? "x_ls" : "x_star";
    }
    write_sidecar(files.sidecar, j);
    return files;
}

DenseSystem load_dataset(const std::filesystem::path& path) {
    std::filesystem::path sidecar = path;
    if (sidecar.extension() != ".json") sidecar = dataset_files(path).sidecar;
    std::ifstream in(sidecar);
    if (!in) throw std::runtime_error("dataset sidecar not found: " + sidecar.string());
    const auto j = nlohmann::json::parse(in);
    const auto dir = sidecar.parent_path();

    DenseSystem system{io::read_matrix(dir / j.at("matrix_file").get<std::string>()),
                       io::read_vector(dir / j.at("rhs_file").get<std::string>()), std::nullopt,
                       std::nullopt};
    if (system.A.rows() != j.at("m").get<std::size_t>() || system.A.cols() != j.at("n").get<std::size_t>() ||
        system.b.size() != system.A.rows()) {
        throw io::FormatError("dataset: sidecar dimensions do not match the stored data");
    }
    if (j.contains("reference_solution_file")) {
        DenseVector ref = io::read_vector(dir / j["reference_solution_file"].get<std::string>());
        if (ref.size() != system.A.cols()) throw io::FormatError("dataset: reference length mismatch");
        if (j.value("reference_kind", std::string("x_star")) == "x_ls") {
            system.x_ls = std::move(ref);
        } else {
            system.x_star = std::move(ref);
        }
    }
    return system;
}

}  // namespace kz
