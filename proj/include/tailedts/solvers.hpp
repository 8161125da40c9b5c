#pragma once

#include "tailedts/losses.hpp"
#include "tailedts/series.hpp"

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tailedts::solvers {

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Lagged design: row r of `A` holds [x_{t-1}, ..., x_{t-d}] for the target y_r = x_t.
struct DesignPair {
    Eigen::MatrixXd A;
    Eigen::VectorXd y;

    std::size_t rows() const { return static_cast<std::size_t>(A.rows()); }
    std::size_t order() const { return static_cast<std::size_t>(A.cols()); }
};

/// All targets t in [order, T).
DesignPair build_design(std::span<const double> series, std::size_t order);
DesignPair build_design(const TimeSeries& series, std::size_t order);
/// Vertically stacked per-series blocks.
DesignPair build_design(const std::vector<std::vector<double>>& pool, std::size_t order);

/// Targets t in [first_target, end_target) only; lags may reach back before first_target but not
/// before index 0.
DesignPair build_design_range(std::span<const double> series, std::size_t order,
                              std::size_t first_target, std::size_t end_target);

/// Appends the rows of `block` to `into` (orders must match).
void append_design(DesignPair& into, const DesignPair& block);

Eigen::VectorXd residuals(const DesignPair& pair, const Eigen::VectorXd& weights);

/// Min, median and max of |residual|.
struct ResidualSummary {
    double min = 0.0;
    double median = 0.0;
    double max = 0.0;
};

ResidualSummary summarize_residuals(const Eigen::VectorXd& residuals);

struct FitResult {
    Eigen::VectorXd weights;
    LossSpec loss;
    int iterations = 0;
    bool converged = false;
    double objective = 0.0;
    ResidualSummary residual_summary;
    std::vector<double> objective_trace;
    std::string method;
    /// LP fits: relative duality gap of the certified solution. NaN otherwise.
    double certificate_gap = 0.0;
};

/// Weighted least squares through the normal equations (A' diag(w) A) x = A' diag(w) y.
/// Empty `row_weights` means uniform (ordinary least squares). A relative ridge is added only when
/// the Gram matrix is numerically singular; throws SolverError if that does not rescue it.
Eigen::VectorXd fit_wls(const DesignPair& pair, std::span<const double> row_weights = {},
                        double ridge = 1e-10);

FitResult fit_ols(const DesignPair& pair);

struct IrlsOptions {
    int max_iter = 20;
    /// Initial smoothing. Squared-residual units for Lp/L1, residual units for Quantile/Huber.
    double smoothing0 = 0.0;
    /// Multiplicative smoothing decay per iteration, in (0, 1).
    double decay = 0.95;
    /// Relative coefficient-change stopping tolerance.
    double tol = 1e-8;
    double ridge = 1e-10;

    /// Huber: 20 iterations, no smoothing. Lp: 50 iterations, smoothing 100, decay 0.95.
    /// L1 and Quantile: 400 iterations, smoothing 100 (L1) / 10 (Quantile), decay 0.93.
    static IrlsOptions defaults_for(const LossSpec& spec);
    void validate() const;
};

/// Iteratively reweighted least squares from the OLS start. Supports Huber, Lp, L1 and Quantile.
FitResult fit_irls(const DesignPair& pair, const LossSpec& spec, const IrlsOptions& options);
FitResult fit_irls(const DesignPair& pair, const LossSpec& spec);

/// Exact quantile regression by linear programming. The pinball program is solved through its
/// dual (max y'l s.t. A'l = 0, tau-1 <= l <= tau) with the bounded simplex; coefficients are the
/// dual multipliers. The duality gap is checked against 1e-7.
FitResult fit_quantile_lp(const DesignPair& pair, double tau);

/// Exact least absolute deviations: min sum(alpha) s.t. -alpha <= y - Aw <= alpha, solved through
/// the dual with bounds [-1, 1].
FitResult fit_l1_lp(const DesignPair& pair);

struct HuberOracleOptions {
    int max_iter = 100000;
    /// Stop when ||grad|| <= grad_tol * max(1, ||2 A'y||).
    double grad_tol = 1e-9;
};

/// Minimizes the Huber objective directly by variable-metric descent with Armijo backtracking.
/// Each step is the gradient scaled by the inverse generalized Hessian of the current iterate,
/// which makes the method finite on this piecewise quadratic in practice.
FitResult fit_huber_oracle(const DesignPair& pair, double delta,
                           const HuberOracleOptions& options = {});

/// Default solver per loss: OLS, LP for L1/Quantile, IRLS for Huber/Lp. `lp_row_limit` caps the
/// problem size routed to the simplex; larger problems use IRLS.
FitResult fit(const DesignPair& pair, const LossSpec& spec, std::size_t lp_row_limit = 20000);

/// Recomputes total_objective(loss, y - A w) for a result.
double objective_of(const DesignPair& pair, const LossSpec& spec, const Eigen::VectorXd& weights);

/// sum_k weights[k] * history[k], history ordered most recent first.
double predict_one_step(std::span<const double> weights, std::span<const double> history);

/// Teacher-forced one-step predictions for targets t in [begin, end), each using the observed
/// values x_{t-1}, ..., x_{t-d}.
std::vector<double> rolling_forecast(std::span<const double> weights,
                                     std::span<const double> series, std::size_t begin,
                                     std::size_t end);

}  // namespace tailedts::solvers
