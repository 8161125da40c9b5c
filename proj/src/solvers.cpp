#include "tailedts/solvers.hpp"

#include "tailedts/simplex.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace tailedts::solvers {

namespace {

double smoothing_scale_floor(const Eigen::VectorXd& y) {
    return 1e-12 * (1.0 + (y.size() ? y.squaredNorm() / static_cast<double>(y.size()) : 0.0));
}

}  // namespace

DesignPair build_design_range(std::span<const double> series, std::size_t order,
                              std::size_t first_target, std::size_t end_target) {
    if (order == 0) throw std::invalid_argument("AR order must be at least 1");
    if (series.size() <= order) {
        throw std::invalid_argument(fmt::format(
            "series of length {} is too short for AR order {}", series.size(), order));
    }
    if (first_target < order || end_target > series.size() || first_target > end_target) {
        throw std::invalid_argument(fmt::format("target range [{}, {}) invalid for order {} and "
                                                "length {}",
                                                first_target, end_target, order, series.size()));
    }
    const auto rows = static_cast<Eigen::Index>(end_target - first_target);
    DesignPair pair{Eigen::MatrixXd(rows, static_cast<Eigen::Index>(order)), Eigen::VectorXd(rows)};
    for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t t = first_target + static_cast<std::size_t>(r);
        pair.y[r] = series[t];
        for (std::size_t k = 1; k <= order; ++k) {
            pair.A(r, static_cast<Eigen::Index>(k - 1)) = series[t - k];
        }
    }
    return pair;
}

DesignPair build_design(std::span<const double> series, std::size_t order) {
    return build_design_range(series, order, std::min(order, series.size()), series.size());
}

DesignPair build_design(const TimeSeries& series, std::size_t order) {
    const std::vector<double> values = series.as_doubles();
    return build_design(values, order);
}

DesignPair build_design(const std::vector<std::vector<double>>& pool, std::size_t order) {
    if (order == 0) throw std::invalid_argument("AR order must be at least 1");
    std::size_t rows = 0;
    for (const auto& s : pool) {
        if (s.size() <= order) {
            throw std::invalid_argument(fmt::format(
                "series of length {} is too short for AR order {}", s.size(), order));
        }
        rows += s.size() - order;
    }
    DesignPair pair{Eigen::MatrixXd(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(order)),
                    Eigen::VectorXd(static_cast<Eigen::Index>(rows))};
    Eigen::Index offset = 0;
    for (const auto& s : pool) {
        const DesignPair block = build_design(s, order);
        pair.A.middleRows(offset, block.A.rows()) = block.A;
        pair.y.segment(offset, block.y.size()) = block.y;
        offset += block.A.rows();
    }
    return pair;
}

void append_design(DesignPair& into, const DesignPair& block) {
    if (into.A.size() == 0 && into.y.size() == 0) {
        into = block;
        return;
    }
    if (into.A.cols() != block.A.cols()) throw std::invalid_argument("design orders differ");
    const Eigen::Index old_rows = into.A.rows();
    into.A.conservativeResize(old_rows + block.A.rows(), Eigen::NoChange);
    into.y.conservativeResize(old_rows + block.y.size());
    into.A.bottomRows(block.A.rows()) = block.A;
    into.y.tail(block.y.size()) = block.y;
}

Eigen::VectorXd residuals(const DesignPair& pair, const Eigen::VectorXd& weights) {
    if (weights.size() != pair.A.cols()) throw std::invalid_argument("weight length != AR order");
    return pair.y - pair.A * weights;
}

ResidualSummary summarize_residuals(const Eigen::VectorXd& r) {
    if (r.size() == 0) return {};
    std::vector<double> a(static_cast<std::size_t>(r.size()));
    for (Eigen::Index i = 0; i < r.size(); ++i) a[static_cast<std::size_t>(i)] = std::abs(r[i]);
    std::sort(a.begin(), a.end());
    const std::size_t n = a.size();
    const double median = n % 2 ? a[n / 2] : 0.5 * (a[n / 2 - 1] + a[n / 2]);
    return {a.front(), median, a.back()};
}

double objective_of(const DesignPair& pair, const LossSpec& spec, const Eigen::VectorXd& weights) {
    const Eigen::VectorXd r = residuals(pair, weights);
    return total_objective(spec, std::span<const double>(r.data(), static_cast<std::size_t>(r.size())));
}

Eigen::VectorXd fit_wls(const DesignPair& pair, std::span<const double> row_weights, double ridge) {
    const Eigen::Index d = pair.A.cols();
    if (d == 0) throw std::invalid_argument("empty design");
    Eigen::MatrixXd gram;
    Eigen::VectorXd rhs;
    if (row_weights.empty()) {
        gram = pair.A.transpose() * pair.A;
        rhs = pair.A.transpose() * pair.y;
    } else {
        if (row_weights.size() != pair.rows()) {
            throw std::invalid_argument(fmt::format("{} row weights for {} design rows",
                                                    row_weights.size(), pair.rows()));
        }
        const Eigen::Map<const Eigen::VectorXd> w(row_weights.data(),
                                                  static_cast<Eigen::Index>(row_weights.size()));
        if ((w.array() < 0.0).any() || !w.allFinite()) {
            throw std::invalid_argument("row weights must be finite and non-negative");
        }
        const Eigen::MatrixXd weighted = pair.A.array().colwise() * w.array();
        gram = weighted.transpose() * pair.A;
        rhs = weighted.transpose() * pair.y;
    }

    const double scale = gram.diagonal().cwiseAbs().maxCoeff();
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw SolverError("weighted least squares: Gram matrix is zero or non-finite");
    }
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-13) return llt.solve(rhs);

    for (double jitter = std::max(ridge, 1e-14); jitter <= 1e-4; jitter *= 100.0) {
        Eigen::MatrixXd regularized = gram;
        regularized.diagonal().array() += jitter * scale;
        Eigen::LLT<Eigen::MatrixXd> reg(regularized);
        if (reg.info() == Eigen::Success && reg.rcond() > 1e-13) return reg.solve(rhs);
    }
    throw SolverError("weighted least squares: Gram matrix is singular beyond ridge rescue");
}

FitResult fit_ols(const DesignPair& pair) {
    FitResult result;
    result.loss = LossSpec::l2();
    result.method = "ols";
    result.weights = fit_wls(pair);
    const Eigen::VectorXd r = residuals(pair, result.weights);
    result.objective = r.squaredNorm();
    result.objective_trace = {result.objective};
    result.residual_summary = summarize_residuals(r);
    result.iterations = 1;
    result.converged = true;
    result.certificate_gap = std::numeric_limits<double>::quiet_NaN();
    return result;
}

IrlsOptions IrlsOptions::defaults_for(const LossSpec& spec) {
    IrlsOptions o;
    if (spec.is<loss::Huber>()) {
        o.max_iter = 20;
        o.smoothing0 = 0.0;
    } else if (spec.is<loss::Lp>()) {
        o.max_iter = 50;
        o.smoothing0 = 100.0;
        o.decay = 0.95;
    } else if (spec.is<loss::L1>()) {
        o.max_iter = 400;
        o.smoothing0 = 100.0;
        o.decay = 0.93;
    } else if (spec.is<loss::Quantile>()) {
        o.max_iter = 400;
        o.smoothing0 = 10.0;
        o.decay = 0.93;
    } else {
        o.max_iter = 1;
    }
    return o;
}

void IrlsOptions::validate() const {
    if (max_iter < 1) throw std::invalid_argument("IRLS max_iter must be >= 1");
    if (!(decay > 0.0 && decay < 1.0)) throw std::invalid_argument("IRLS decay must lie in (0, 1)");
    if (!(tol > 0.0)) throw std::invalid_argument("IRLS tol must be positive");
    if (smoothing0 < 0.0) throw std::invalid_argument("IRLS smoothing must be non-negative");
    if (ridge < 0.0) throw std::invalid_argument("IRLS ridge must be non-negative");
}

FitResult fit_irls(const DesignPair& pair, const LossSpec& spec) {
    return fit_irls(pair, spec, IrlsOptions::defaults_for(spec));
}

FitResult fit_irls(const DesignPair& pair, const LossSpec& spec, const IrlsOptions& options) {
    options.validate();
    if (spec.is<loss::L2>()) {
        FitResult r = fit_ols(pair);
        r.method = "irls";
        return r;
    }
    const bool squared_smoothing = spec.is<loss::Lp>() || spec.is<loss::L1>();
    const bool decaying = !spec.is<loss::Huber>();
    constexpr double kGuard = 1e-12;

    FitResult result;
    result.loss = spec;
    result.method = "irls";
    result.certificate_gap = std::numeric_limits<double>::quiet_NaN();
    result.weights = fit_wls(pair, {}, options.ridge);
    Eigen::VectorXd r = residuals(pair, result.weights);

    const double floor = smoothing_scale_floor(pair.y);
    double smoothing = options.smoothing0;
    std::vector<double> theta(pair.rows());
    for (int it = 1; it <= options.max_iter; ++it) {
        for (std::size_t t = 0; t < theta.size(); ++t) {
            const double eps = r[static_cast<Eigen::Index>(t)];
            if (squared_smoothing) {
                // Guard |eps| >= 1e-12 once the smoothing has decayed away.
                const double guarded = std::max(std::abs(eps), kGuard);
                theta[t] = irls_weight(spec, guarded, smoothing);
            } else {
                theta[t] = irls_weight(spec, eps, std::max(smoothing, kGuard));
            }
        }
        Eigen::VectorXd next;
        try {
            next = fit_wls(pair, theta, options.ridge);
        } catch (const SolverError& e) {
            throw SolverError(fmt::format("IRLS iteration {}: {}", it, e.what()));
        }
        const double change =
            (next - result.weights).norm() / std::max(result.weights.norm(), 1e-12);
        result.weights = std::move(next);
        r = residuals(pair, result.weights);
        result.objective_trace.push_back(
            total_objective(spec, std::span<const double>(r.data(), static_cast<std::size_t>(r.size()))));
        result.iterations = it;

        bool smoothing_negligible = true;
        if (decaying) {
            const double mean_sq = r.size() ? r.squaredNorm() / static_cast<double>(r.size()) : 0.0;
            const double effective = squared_smoothing ? smoothing : smoothing * smoothing;
            smoothing_negligible = effective <= options.tol * mean_sq || effective <= floor;
            smoothing *= options.decay;
        }
        if (change <= options.tol && smoothing_negligible) {
            result.converged = true;
            break;
        }
    }
    result.objective = result.objective_trace.back();
    result.residual_summary = summarize_residuals(r);
    return result;
}

namespace {

FitResult fit_dual_lp(const DesignPair& pair, const LossSpec& spec, double lower, double upper) {
    const auto n = static_cast<Eigen::Index>(pair.rows());
    const auto d = static_cast<Eigen::Index>(pair.order());
    const Eigen::MatrixXd M = pair.A.transpose();
    const Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    const Eigen::VectorXd lo = Eigen::VectorXd::Constant(n, lower);
    const Eigen::VectorXd up = Eigen::VectorXd::Constant(n, upper);

    const lp::BoundedLpResult lp = lp::maximize_bounded(M, b, pair.y, lo, up);
    if (lp.status != lp::Status::Optimal) {
        throw SolverError(fmt::format("{} LP did not reach optimality after {} pivots",
                                      spec.family(), lp.iterations));
    }
    FitResult result;
    result.loss = spec;
    result.method = "lp-simplex";
    result.weights = lp.duals;
    result.iterations = static_cast<int>(lp.iterations);
    const Eigen::VectorXd r = residuals(pair, result.weights);
    const double primal =
        total_objective(spec, std::span<const double>(r.data(), static_cast<std::size_t>(n)));
    const double dual = lp.objective;
    result.objective = primal;
    result.objective_trace = {primal};
    result.residual_summary = summarize_residuals(r);
    result.certificate_gap = std::abs(primal - dual) / std::max(1.0, std::abs(primal));
    if (result.certificate_gap > 1e-7) {
        throw SolverError(fmt::format("{} LP certificate failed: primal {} vs dual {}",
                                      spec.family(), primal, dual));
    }
    result.converged = true;
    return result;
}

double huber_value(const Eigen::VectorXd& r, double delta) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
        const double a = std::abs(r[i]);
        f += a <= delta ? r[i] * r[i] : delta * (2.0 * a - delta);
    }
    return f;
}

}  // namespace

FitResult fit_quantile_lp(const DesignPair& pair, double tau) {
    const LossSpec spec = LossSpec::quantile(tau);
    return fit_dual_lp(pair, spec, tau - 1.0, tau);
}

FitResult fit_l1_lp(const DesignPair& pair) { return fit_dual_lp(pair, LossSpec::l1(), -1.0, 1.0); }

FitResult fit_huber_oracle(const DesignPair& pair, double delta, const HuberOracleOptions& options) {
    const LossSpec spec = LossSpec::huber(delta);
    const Eigen::MatrixXd full_hessian = 2.0 * pair.A.transpose() * pair.A;
    const double diag_scale = std::max(full_hessian.diagonal().cwiseAbs().maxCoeff(), 1e-300);
    const double grad_scale = std::max(1.0, (2.0 * pair.A.transpose() * pair.y).norm());

    FitResult result;
    result.loss = spec;
    result.method = "huber-descent";
    result.certificate_gap = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd w = fit_wls(pair);
    Eigen::VectorXd r = pair.y - pair.A * w;
    double f = huber_value(r, delta);
    Eigen::VectorXd psi(r.size());
    for (int it = 1;; ++it) {
        Eigen::MatrixXd metric = Eigen::MatrixXd::Zero(pair.A.cols(), pair.A.cols());
        for (Eigen::Index i = 0; i < r.size(); ++i) {
            if (std::abs(r[i]) <= delta) {
                psi[i] = 2.0 * r[i];
                metric.selfadjointView<Eigen::Lower>().rankUpdate(pair.A.row(i).transpose(), 2.0);
            } else {
                psi[i] = 2.0 * delta * (r[i] > 0 ? 1.0 : -1.0);
            }
        }
        const Eigen::VectorXd grad = -pair.A.transpose() * psi;
        result.iterations = it;
        if (grad.norm() <= options.grad_tol * grad_scale) {
            result.converged = true;
            break;
        }
        if (it > options.max_iter) {
            throw SolverError(
                fmt::format("Huber oracle did not converge in {} iterations", options.max_iter));
        }
        // Metric: generalized Hessian of the current quadratic set, falling back to the
        // all-quadratic Hessian when too few residuals lie inside delta.
        metric = metric.selfadjointView<Eigen::Lower>();
        metric.diagonal().array() += 1e-12 * diag_scale;
        Eigen::LDLT<Eigen::MatrixXd> solver(metric);
        if (solver.info() != Eigen::Success || solver.rcond() < 1e-12) solver.compute(full_hessian);
        const Eigen::VectorXd step = -solver.solve(grad);
        const double slope = grad.dot(step);
        if (!(slope < 0.0)) break;
        double t = 1.0;
        bool accepted = false;
        while (t > 1e-30) {
            const Eigen::VectorXd trial = w + t * step;
            const Eigen::VectorXd trial_r = pair.y - pair.A * trial;
            const double trial_f = huber_value(trial_r, delta);
            if (trial_f <= f + 1e-4 * t * slope) {
                w = trial;
                r = trial_r;
                f = trial_f;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        result.objective_trace.push_back(f);
        if (!accepted) break;  // no representable decrease left
    }
    result.weights = w;
    result.objective = f;
    result.residual_summary = summarize_residuals(r);
    return result;
}

FitResult fit(const DesignPair& pair, const LossSpec& spec, std::size_t lp_row_limit) {
    if (spec.is<loss::L2>()) return fit_ols(pair);
    if (pair.rows() <= lp_row_limit) {
        if (spec.is<loss::L1>()) return fit_l1_lp(pair);
        if (spec.is<loss::Quantile>()) return fit_quantile_lp(pair, spec.as<loss::Quantile>().tau);
    }
    return fit_irls(pair, spec);
}

double predict_one_step(std::span<const double> weights, std::span<const double> history) {
    if (weights.size() != history.size()) {
        throw std::invalid_argument(fmt::format("history length {} does not match AR order {}",
                                                history.size(), weights.size()));
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) sum += weights[k] * history[k];
    return sum;
}

std::vector<double> rolling_forecast(std::span<const double> weights, std::span<const double> series,
                                     std::size_t begin, std::size_t end) {
    const std::size_t d = weights.size();
    if (begin < d) {
        throw std::invalid_argument(
            fmt::format("forecast range starts at {} but AR order {} needs index >= {}", begin, d, d));
    }
    if (end > series.size() || begin > end) {
        throw std::invalid_argument(fmt::format("forecast range [{}, {}) outside series of length {}",
                                                begin, end, series.size()));
    }
    std::vector<double> predictions;
    predictions.reserve(end - begin);
    for (std::size_t t = begin; t < end; ++t) {
        double sum = 0.0;
        for (std::size_t k = 1; k <= d; ++k) sum += weights[k - 1] * series[t - k];
        predictions.push_back(sum);
    }
    return predictions;
}

}  // namespace tailedts::solvers
