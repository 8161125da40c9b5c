#pragma once

#include "tailedts/losses.hpp"
#include "tailedts/series.hpp"
#include "tailedts/solvers.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace tailedts::bench {

/// Day ranges (1-based, inclusive) of the monthly train/validation/test split.
struct SplitSpec {
    int train_first = 1;
    int train_last = 17;
    int validation_first = 18;
    int validation_last = 24;
    int test_first = 25;
    int test_last = 31;

    /// Contiguous, non-overlapping, and within `days`.
    void validate(int days) const;
    nlohmann::json to_json() const;
};

/// Candidate hyperparameters per tunable loss family.
struct HyperGrid {
    std::vector<double> huber_delta{0.5, 1.0, 2.0};
    std::vector<double> quantile_tau{0.3, 0.5, 0.7};
    std::vector<double> lp_p{1.0 / 3.0, 1.0 / 2.0, 2.0 / 3.0};

    void validate() const;
    /// Candidates in grid order for "huber", "quantile" or "lp"; a single spec for "l1"/"l2".
    std::vector<LossSpec> candidates(std::string_view family) const;
    nlohmann::json to_json() const;
};

struct Metrics {
    double mape = 0.0;
    double rmse = 0.0;
};

/// rmse = sqrt(mean((p - x)^2)), mape = mean(|p - x| / max(x, 1)).
Metrics compute_metrics(std::span<const double> predictions, std::span<const double> truth);

/// One loss requested for a benchmark: a bare family ("huber") is tuned over the grid, an
/// explicit spec ("huber:1") is used as given.
struct LossRequest {
    std::string family;
    std::optional<LossSpec> fixed;

    static LossRequest parse(std::string_view text);
    std::string to_string() const;
};

/// Series pooled for one benchmark, with named groups (categories) of row indices.
struct SeriesPool {
    std::vector<std::string> names;
    std::vector<std::vector<double>> values;
    std::vector<std::pair<std::string, std::vector<std::size_t>>> groups;
};

/// Target index ranges shared by every series of a pool: train targets [order, train_end),
/// validation [train_end, validation_end), test [validation_end, end).
struct IndexSplit {
    std::size_t train_end = 0;
    std::size_t validation_end = 0;
    std::size_t end = 0;
};

struct BenchOptions {
    std::size_t order = 168;
    HyperGrid grid;
    std::size_t workers = 1;
    /// Design rows up to which L1/Quantile are solved exactly by LP; IRLS beyond.
    std::size_t lp_row_limit = 20000;
    /// Pages per group written to the prediction dump.
    std::size_t dump_pages = 5;
};

struct TuneCandidate {
    LossSpec spec;
    std::optional<Metrics> validation;
    std::string error;
};

struct TuneOutcome {
    LossSpec chosen;
    solvers::FitResult fit;
    std::vector<TuneCandidate> candidates;
    std::vector<std::string> warnings;
};

/// Fits every candidate on `train`, scores one-step rolling MAPE on the validation targets of
/// `series`, and returns the minimizer (ties to the earlier candidate). Failing candidates are
/// skipped with a warning; throws when all fail.
TuneOutcome tune(const std::vector<LossSpec>& candidates, const solvers::DesignPair& train,
                 const std::vector<std::span<const double>>& series, std::size_t validation_begin,
                 std::size_t validation_end, std::size_t lp_row_limit = 20000);

struct PredictionDumpRow {
    std::string group;
    std::string loss;
    std::string page;
    std::size_t index = 0;
    double truth = 0.0;
    double prediction = 0.0;
};

struct BenchCell {
    std::string loss;      // request text, e.g. "huber"
    std::string group;     // category label
    std::string chosen;    // fitted spec, e.g. "huber:1"
    std::optional<Metrics> test;
    std::vector<double> weights;
    std::string method;
    int iterations = 0;
    bool converged = false;
    std::vector<TuneCandidate> tuning;
    std::string error;
};

struct BenchReport {
    std::string kind;  // "predict" or "external"
    nlohmann::json protocol;
    std::vector<std::string> losses;
    std::vector<std::string> groups;
    std::vector<BenchCell> cells;  // loss-major
    std::vector<PredictionDumpRow> dumps;
    std::vector<std::string> warnings;

    nlohmann::json to_json() const;
    /// Loss-by-group grid of "MAPE/RMSE".
    std::string render_table() const;
    std::string dumps_csv() const;
};

/// Pooled per-group fit on the train targets, tuning on validation, rolling one-step evaluation
/// on test. Cells run in parallel; the report does not depend on the worker count.
BenchReport run_protocol(const SeriesPool& pool, const IndexSplit& split,
                         const std::vector<LossRequest>& losses, const BenchOptions& options);

struct PredictOptions : BenchOptions {
    SplitSpec split;
    std::vector<Category> categories{Category::O2, Category::O3, Category::O4};
    /// Series per category kept for fitting (seeded sample). 0 keeps all.
    std::size_t max_series = 10000;
    std::uint64_t seed = 1;
};

/// Keeps at most `max_series` members (0 keeps all) by a seeded partial shuffle, returned in
/// ascending order.
std::vector<std::size_t> sample_members(std::vector<std::size_t> members, std::size_t max_series,
                                        std::mt19937_64& rng);

BenchReport run_prediction_benchmark(const MonthTable& table, const CategoryPartition& partition,
                                     const std::vector<LossRequest>& losses,
                                     const PredictOptions& options);

/// External dataset: CSV with one named series per column and one row per time step.
SeriesPool read_series_csv(const std::filesystem::path& path);

/// Whole-dataset pooling with an 80/10/10 chronological split per series.
BenchReport run_external_benchmark(const SeriesPool& dataset, const std::vector<LossRequest>& losses,
                                   const BenchOptions& options);
IndexSplit chronological_split(std::size_t length);

struct HistogramBin {
    double lower = 0.0;
    double upper = 0.0;
    double center = 0.0;  // geometric mean of the edges
    std::uint64_t count = 0;
    double density = 0.0;  // count / (positives * width)
};

struct Histogram {
    std::uint64_t zeros = 0;
    std::uint64_t positives = 0;
    std::vector<HistogramBin> bins;

    std::string to_csv() const;
};

/// Logarithmically spaced bins over the positive values, `bins_per_decade` per power of ten.
/// Zeros are counted separately. Throws on negative or all-zero input.
Histogram loglog_histogram(std::span<const double> values, int bins_per_decade = 10);

/// Least-squares slope of log10(density) on log10(center) over bins with at least `min_count`
/// draws, excluding the first and last occupied bins.
double loglog_slope(const Histogram& histogram, std::uint64_t min_count = 10);

enum class NoiseFamily { Gaussian, StudentT, Pareto };

struct NoiseSpec {
    NoiseFamily family = NoiseFamily::Gaussian;
    double sigma = 1.0;  // Gaussian standard deviation, Student-t / Pareto scale
    double nu = 3.0;     // Student-t degrees of freedom
    double alpha = 1.5;  // Pareto tail index

    static NoiseSpec parse(std::string_view text);  // "gaussian:1", "student:3:1", "pareto:1.5:1"
    std::string to_string() const;
};

struct SynthSpec {
    /// Entry k-1 is the true coefficient of lag k; must be non-negative with sum <= 1.
    std::vector<double> weights;
    NoiseSpec noise;
    /// Constant added to every innovation.
    double level = 0.0;
    std::size_t length = 744;
    std::size_t count = 1;
    std::uint64_t seed = 1;
    /// Clip at 0 and round to integers.
    bool count_mode = false;
    /// Optional initial values, cycled over the first d steps; zeros otherwise.
    std::vector<double> initial;

    void validate() const;
};

/// One draw of the innovation distribution. Pareto innovations are symmetric:
/// sign * sigma * (U^(-1/alpha) - 1).
double draw_noise(const NoiseSpec& noise, std::mt19937_64& rng);

/// x_t = sum_k w_k x_{t-k} + level + noise_t, with 10 d burn-in steps discarded.
std::vector<std::vector<double>> generate_synthetic(const SynthSpec& spec);

/// Wraps count-mode synthetic series as a month table starting at `month`.
MonthTable synthetic_month(const std::vector<std::vector<double>>& series, YearMonth month,
                           std::string_view domain = "synth");

/// `n` raw Pareto draws scale * U^(-1/alpha) (support [scale, inf)).
std::vector<double> pareto_sample(std::size_t n, double alpha, double scale, std::uint64_t seed);

}  // namespace tailedts::bench
