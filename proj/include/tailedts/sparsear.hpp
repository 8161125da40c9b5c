#pragma once

#include "tailedts/series.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailedts::sparsear {

class SparseArError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Pooled AR sufficient statistics: phi = sum A'A, psi = sum A'y, y_sq = sum y'y.
/// Index k-1 of psi (and row/column k-1 of phi) belongs to lag k.
struct GramPair {
    std::string label;
    Eigen::MatrixXd phi;
    Eigen::VectorXd psi;
    double y_sq = 0.0;
    std::uint64_t n_rows = 0;

    static GramPair zero(std::size_t order, std::string label = {});
    std::size_t order() const { return static_cast<std::size_t>(psi.size()); }
    GramPair& operator+=(const GramPair& other);
};

/// Gram pair of one series via the lag recursion
/// phi(j+1,k+1) = phi(j,k) + x[d-1-j] x[d-1-k] - x[T-1-j] x[T-1-k], in O(T d + d^2).
/// Integer-valued input is accumulated exactly.
GramPair series_gram(std::span<const double> series, std::size_t order);

/// Sum of series_gram over a pool. Per-series pairs are reduced in fixed chunks with compensated
/// summation, so the result does not depend on `workers`.
GramPair accumulate_gram(const std::vector<std::vector<double>>& pool, std::size_t order,
                         std::string label = {}, std::size_t workers = 1);
GramPair accumulate_gram(const MonthTable& table, std::span<const std::size_t> rows,
                         std::size_t order, std::string label = {}, std::size_t workers = 1);

struct SparseArProblem {
    std::vector<GramPair> grams;
    std::size_t order = 0;
    std::size_t sparsity = 1;
    /// Only used for the exported MIQP and the post-hoc weight check.
    double big_m = 5.0;

    void validate() const;
};

enum class Optimality { Exact, Incumbent };

std::string_view optimality_name(Optimality o);

struct SparseArResult {
    /// Sorted lags (1-based), the union of the supports of all category weights.
    std::vector<std::size_t> support;
    /// One length-d vector per category, entry k-1 is the coefficient of lag k.
    std::vector<Eigen::VectorXd> weights;
    double objective = 0.0;
    Optimality optimality = Optimality::Exact;
    std::uint64_t nodes = 0;
    std::vector<std::string> warnings;
};

/// sum over categories of w'phi w - 2 w'psi. Throws when a weight is negative or lies outside
/// `support`.
double objective_value(const SparseArProblem& problem, std::span<const std::size_t> support,
                       const std::vector<Eigen::VectorXd>& weights);

/// The same objective plus sum y'y: the pooled sum of squared one-step errors.
double sum_squared_errors(const SparseArProblem& problem, const std::vector<Eigen::VectorXd>& weights);

/// min w'phi w - 2 w'psi over w >= 0 with supp(w) in `support` (Lawson-Hanson active set).
/// Returns a full length-d vector. Throws SparseArError after d^2 iterations.
Eigen::VectorXd nnls_on_support(const GramPair& gram, std::span<const std::size_t> support);

/// Forward selection to `sparsity` lags followed by best-improvement single swaps.
SparseArResult greedy_support(const SparseArProblem& problem);

struct BranchAndBoundOptions {
    std::uint64_t node_limit = 1'000'000;
    /// Wall-clock budget; 0 disables it. A time limit makes the outcome machine dependent.
    double time_limit_seconds = 0.0;
};

/// Best-first include/exclude branching over lags. Node bound: NNLS over every lag that is not
/// excluded (cardinality relaxed). Returns the greedy incumbent improved to optimality, or the
/// best incumbent flagged as such when a limit stops the search.
SparseArResult solve_branch_and_bound(const SparseArProblem& problem,
                                      const BranchAndBoundOptions& options = {});

/// Enumerates every support of size <= sparsity. Ties go to the lexicographically smallest
/// support. Throws when more than 10^6 supports would be visited.
SparseArResult exhaustive_oracle(const SparseArProblem& problem);

/// Number of supports of size 1..sparsity (saturating).
std::uint64_t support_count(std::size_t order, std::size_t sparsity);

struct SeasonalityRow {
    std::string category;
    std::size_t lag = 0;
    double coefficient = 0.0;
};

inline constexpr std::size_t kCycleLags[] = {24, 48, 96, 168};

/// Coefficient of every category at each requested lag (0 outside the support), category-major.
/// Lags beyond the model order report 0.
std::vector<SeasonalityRow> seasonality_report(const SparseArProblem& problem,
                                               const SparseArResult& result,
                                               std::span<const std::size_t> lags = kCycleLags);

/// Text table: one row per category, one column per lag.
std::string render_seasonality(const std::vector<SeasonalityRow>& rows);

/// {support, weights: {category: {lag: value}}, objective, optimality, nodes, ...}.
nlohmann::json to_json(const SparseArProblem& problem, const SparseArResult& result);

/// Writes the big-M MIQP in CPLEX LP format for cross-checking with an external solver.
void export_miqp_lp(const SparseArProblem& problem, const std::filesystem::path& path);

}  // namespace tailedts::sparsear
