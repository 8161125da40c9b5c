#pragma once

#include "tailedts/bench.hpp"
#include "tailedts/series.hpp"
#include "tailedts/solvers.hpp"
#include "tailedts/sparsear.hpp"

#include <Eigen/Dense>

#include <unistd.h>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

/// Gaussian with probability 0.8, otherwise a symmetric Pareto(1.5) draw.
inline double mixed_noise(Rng& rng) {
    if (uniform(rng, 0.0, 1.0) < 0.8) return std::normal_distribution<double>(0.0, 1.0)(rng);
    const double u = 1.0 - uniform(rng, 0.0, 1.0);
    const double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    return sign * (std::pow(u, -1.0 / 1.5) - 1.0);
}

/// AR series x_t = sum_k w_k x_{t-k} + level + noise, first `weights.size()` values drawn from noise.
inline std::vector<double> ar_series(Rng& rng, const std::vector<double>& weights, std::size_t length,
                                     double level) {
    const std::size_t d = weights.size();
    const std::size_t burn = 10 * d;
    std::vector<double> x(length + burn, 0.0);
    for (std::size_t t = 0; t < x.size(); ++t) {
        double v = level + mixed_noise(rng);
        for (std::size_t k = 1; k <= d && k <= t; ++k) v += weights[k - 1] * x[t - k];
        x[t] = v;
    }
    return {x.begin() + static_cast<std::ptrdiff_t>(burn), x.end()};
}

/// The mixed-noise AR(d) instance with n design rows used by the solver agreement checks.
inline tailedts::solvers::DesignPair mixed_instance(std::uint64_t seed, std::size_t n, std::size_t d) {
    Rng rng(seed);
    std::vector<double> w(d);
    double total = 0.0;
    for (auto& v : w) total += (v = uniform(rng, 0.0, 1.0));
    for (auto& v : w) v *= 0.7 / total;
    return tailedts::solvers::build_design(ar_series(rng, w, n + d, 1.0), d);
}

/// Random dense design with a planted weight vector and mixed noise.
inline tailedts::solvers::DesignPair random_design(Rng& rng, std::size_t n, std::size_t d) {
    tailedts::solvers::DesignPair p;
    p.A.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    p.y.resize(static_cast<Eigen::Index>(n));
    Eigen::VectorXd w(static_cast<Eigen::Index>(d));
    for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = uniform(rng, -1.0, 1.0);
    for (Eigen::Index i = 0; i < p.A.rows(); ++i) {
        for (Eigen::Index k = 0; k < p.A.cols(); ++k) p.A(i, k) = uniform(rng, -2.0, 2.0);
        p.y[i] = p.A.row(i).dot(w) + mixed_noise(rng);
    }
    return p;
}

/// Small sparse-AR problem: G categories of short non-negative series.
inline tailedts::sparsear::SparseArProblem random_sparse_problem(Rng& rng, std::size_t order, std::size_t sparsity,
                                                                 std::size_t groups) {
    tailedts::sparsear::SparseArProblem problem;
    problem.order = order;
    problem.sparsity = sparsity;
    for (std::size_t g = 0; g < groups; ++g) {
        std::vector<double> w(order, 0.0);
        for (std::size_t j = 0; j < 2; ++j) w[pick(rng, 0, order - 1)] += uniform(rng, 0.05, 0.4);
        std::vector<std::vector<double>> pool;
        for (std::size_t s = 0; s < 3; ++s) pool.push_back(ar_series(rng, w, 60 + pick(rng, 0, 40), 2.0));
        problem.grams.push_back(tailedts::sparsear::accumulate_gram(pool, order, "g" + std::to_string(g)));
    }
    return problem;
}

inline tailedts::MonthTable table_from(const std::vector<std::vector<tailedts::Count>>& rows, int days = 2) {
    const tailedts::YearMonth ym{2024, 3};
    std::vector<tailedts::TimeSeries> series;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        tailedts::TimeSeries s;
        s.key = {"en", "P" + std::to_string(1000 + i)};
        s.start = ym.first_hour();
        s.values = rows[i];
        series.push_back(std::move(s));
    }
    return tailedts::MonthTable(ym, ym.first_hour(), static_cast<std::size_t>(days) * 24, std::move(series));
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::uint64_t counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("tailedts-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

}  // namespace testsupport
