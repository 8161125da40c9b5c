#include "tailedts/simplex.hpp"

#include <fmt/format.h>

#include <cmath>
#include <limits>
#include <vector>

namespace tailedts::lp {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

enum class VarState : unsigned char { Basic, AtLower, AtUpper };

class BoundedSimplex {
public:
    BoundedSimplex(const Eigen::MatrixXd& M, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                   const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                   const SimplexOptions& options)
        : M_(M), b_(b), c_(c), options_(options), m_(M.rows()), n_(M.cols()) {
        const Eigen::Index total = n_ + m_;
        lo_.resize(total);
        up_.resize(total);
        x_.resize(total);
        state_.assign(static_cast<std::size_t>(total), VarState::AtLower);
        sign_.assign(static_cast<std::size_t>(m_), 1.0);
        head_.assign(static_cast<std::size_t>(m_), 0);

        for (Eigen::Index j = 0; j < n_; ++j) {
            lo_[j] = lower[j];
            up_[j] = upper[j];
            // Start every structural column at the bound its cost prefers.
            const bool at_upper = c_[j] > 0.0;
            state_[static_cast<std::size_t>(j)] = at_upper ? VarState::AtUpper : VarState::AtLower;
            x_[j] = at_upper ? up_[j] : lo_[j];
        }
        const Eigen::VectorXd residual = b_ - M_ * x_.head(n_);
        for (Eigen::Index i = 0; i < m_; ++i) {
            const Eigen::Index a = n_ + i;
            sign_[static_cast<std::size_t>(i)] = residual[i] >= 0.0 ? 1.0 : -1.0;
            lo_[a] = 0.0;
            up_[a] = kInf;
            x_[a] = std::abs(residual[i]);
            state_[static_cast<std::size_t>(a)] = VarState::Basic;
            head_[static_cast<std::size_t>(i)] = a;
        }
        binv_ = Eigen::MatrixXd::Zero(m_, m_);
        for (Eigen::Index i = 0; i < m_; ++i) binv_(i, i) = sign_[static_cast<std::size_t>(i)];
    }

    BoundedLpResult solve() {
        BoundedLpResult result;

        Eigen::VectorXd phase1 = Eigen::VectorXd::Zero(n_ + m_);
        phase1.tail(m_).setConstant(-1.0);
        if (!run_phase(phase1, result)) return result;

        double infeasibility = 0.0;
        for (Eigen::Index i = 0; i < m_; ++i) infeasibility += x_[n_ + i];
        const double feas_tol = 1e-9 * std::max(1.0, b_.size() ? b_.cwiseAbs().maxCoeff() : 0.0) *
                                static_cast<double>(std::max<Eigen::Index>(1, m_));
        if (infeasibility > feas_tol) {
            result.status = Status::Infeasible;
            return result;
        }
        for (Eigen::Index i = 0; i < m_; ++i) {
            up_[n_ + i] = 0.0;
            if (state_[static_cast<std::size_t>(n_ + i)] != VarState::Basic) x_[n_ + i] = 0.0;
        }
        drive_out_artificials();

        Eigen::VectorXd phase2 = Eigen::VectorXd::Zero(n_ + m_);
        phase2.head(n_) = c_;
        if (!run_phase(phase2, result)) return result;

        refactor();
        result.status = Status::Optimal;
        result.x = x_.head(n_);
        Eigen::VectorXd cb(m_);
        for (Eigen::Index i = 0; i < m_; ++i) cb[i] = phase2[head_[static_cast<std::size_t>(i)]];
        result.duals = binv_.transpose() * cb;
        result.objective = c_.dot(result.x);
        return result;
    }

private:
    Eigen::VectorXd column(Eigen::Index j) const {
        if (j < n_) return M_.col(j);
        Eigen::VectorXd e = Eigen::VectorXd::Zero(m_);
        e[j - n_] = sign_[static_cast<std::size_t>(j - n_)];
        return e;
    }

    void refactor() {
        Eigen::MatrixXd basis(m_, m_);
        for (Eigen::Index i = 0; i < m_; ++i) basis.col(i) = column(head_[static_cast<std::size_t>(i)]);
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(basis);
        binv_ = lu.inverse();
        if (!binv_.allFinite()) throw LpError("simplex basis became singular");
        Eigen::VectorXd rhs = b_;
        for (Eigen::Index j = 0; j < n_ + m_; ++j) {
            if (state_[static_cast<std::size_t>(j)] != VarState::Basic && x_[j] != 0.0) {
                rhs -= column(j) * x_[j];
            }
        }
        const Eigen::VectorXd xb = binv_ * rhs;
        for (Eigen::Index i = 0; i < m_; ++i) x_[head_[static_cast<std::size_t>(i)]] = xb[i];
    }

    void pivot(Eigen::Index row, Eigen::Index entering, const Eigen::VectorXd& alpha) {
        const double p = alpha[row];
        binv_.row(row) /= p;
        for (Eigen::Index k = 0; k < m_; ++k) {
            if (k != row && alpha[k] != 0.0) binv_.row(k) -= alpha[k] * binv_.row(row);
        }
        head_[static_cast<std::size_t>(row)] = entering;
        state_[static_cast<std::size_t>(entering)] = VarState::Basic;
        ++pivots_since_refactor_;
        if (pivots_since_refactor_ >= options_.refactor_every) {
            refactor();
            pivots_since_refactor_ = 0;
        }
    }

    bool run_phase(const Eigen::VectorXd& cost, BoundedLpResult& result) {
        const double opt_tol = 1e-10 * std::max(1.0, cost.cwiseAbs().maxCoeff());
        std::size_t degenerate_run = 0;
        while (true) {
            if (result.iterations >= options_.max_iterations) {
                result.status = Status::IterationLimit;
                return false;
            }
            Eigen::VectorXd cb(m_);
            for (Eigen::Index i = 0; i < m_; ++i) cb[i] = cost[head_[static_cast<std::size_t>(i)]];
            const Eigen::VectorXd pi = binv_.transpose() * cb;

            const bool bland = degenerate_run >= options_.bland_after_degenerate;
            Eigen::Index entering = -1;
            double direction = 0.0;
            double best = 0.0;
            const Eigen::VectorXd structural_reduced =
                cost.head(n_) - M_.transpose() * pi;  // dense pricing
            for (Eigen::Index j = 0; j < n_ + m_; ++j) {
                const VarState s = state_[static_cast<std::size_t>(j)];
                if (s == VarState::Basic || lo_[j] == up_[j]) continue;
                const double d = j < n_ ? structural_reduced[j]
                                        : cost[j] - pi[j - n_] * sign_[static_cast<std::size_t>(j - n_)];
                double violation = 0.0;
                double dir = 0.0;
                if (s == VarState::AtLower && d > opt_tol) {
                    violation = d;
                    dir = 1.0;
                } else if (s == VarState::AtUpper && d < -opt_tol) {
                    violation = -d;
                    dir = -1.0;
                } else {
                    continue;
                }
                if (bland) {
                    entering = j;
                    direction = dir;
                    break;
                }
                if (violation > best) {
                    best = violation;
                    entering = j;
                    direction = dir;
                }
            }
            if (entering < 0) return true;

            const Eigen::VectorXd alpha = binv_ * column(entering);
            const double piv_tol = 1e-11 * std::max(1.0, alpha.cwiseAbs().maxCoeff());
            double theta = up_[entering] - lo_[entering];
            Eigen::Index leave_row = -1;
            for (Eigen::Index i = 0; i < m_; ++i) {
                const double a = direction * alpha[i];
                const Eigen::Index var = head_[static_cast<std::size_t>(i)];
                double limit = kInf;
                if (a > piv_tol) {
                    limit = (x_[var] - lo_[var]) / a;
                } else if (a < -piv_tol) {
                    if (up_[var] == kInf) continue;
                    limit = (up_[var] - x_[var]) / -a;
                } else {
                    continue;
                }
                limit = std::max(limit, 0.0);
                if (limit < theta ||
                    (leave_row >= 0 && limit == theta &&
                     var < head_[static_cast<std::size_t>(leave_row)])) {
                    theta = limit;
                    leave_row = i;
                }
            }
            if (theta == kInf) throw LpError("linear program is unbounded");

            ++result.iterations;
            if (theta <= 1e-14) {
                ++degenerate_run;
                ++result.degenerate_pivots;
            } else {
                degenerate_run = 0;
            }

            x_[entering] += direction * theta;
            for (Eigen::Index i = 0; i < m_; ++i) {
                x_[head_[static_cast<std::size_t>(i)]] -= direction * theta * alpha[i];
            }
            if (leave_row < 0) {
                // Bound flip: the entering variable crosses to its opposite bound.
                state_[static_cast<std::size_t>(entering)] =
                    direction > 0 ? VarState::AtUpper : VarState::AtLower;
                x_[entering] = direction > 0 ? up_[entering] : lo_[entering];
                continue;
            }
            const Eigen::Index leaving = head_[static_cast<std::size_t>(leave_row)];
            const bool to_lower = direction * alpha[leave_row] > 0.0;
            state_[static_cast<std::size_t>(leaving)] = to_lower ? VarState::AtLower : VarState::AtUpper;
            x_[leaving] = to_lower ? lo_[leaving] : up_[leaving];
            pivot(leave_row, entering, alpha);
        }
    }

    void drive_out_artificials() {
        for (Eigen::Index i = 0; i < m_; ++i) {
            if (head_[static_cast<std::size_t>(i)] < n_) continue;
            const Eigen::RowVectorXd row = binv_.row(i) * M_;
            Eigen::Index best = -1;
            double best_abs = 1e-9;
            for (Eigen::Index j = 0; j < n_; ++j) {
                if (state_[static_cast<std::size_t>(j)] == VarState::Basic) continue;
                if (std::abs(row[j]) > best_abs) {
                    best_abs = std::abs(row[j]);
                    best = j;
                }
            }
            if (best < 0) continue;  // redundant row; the artificial stays basic, fixed at zero
            const Eigen::Index art = head_[static_cast<std::size_t>(i)];
            state_[static_cast<std::size_t>(art)] = VarState::AtLower;
            x_[art] = 0.0;
            pivot(i, best, binv_ * column(best));
        }
        refactor();
        pivots_since_refactor_ = 0;
    }

    const Eigen::MatrixXd& M_;
    const Eigen::VectorXd& b_;
    const Eigen::VectorXd& c_;
    SimplexOptions options_;
    Eigen::Index m_;
    Eigen::Index n_;
    Eigen::VectorXd lo_, up_, x_;
    std::vector<VarState> state_;
    std::vector<double> sign_;
    std::vector<Eigen::Index> head_;
    Eigen::MatrixXd binv_;
    std::size_t pivots_since_refactor_ = 0;
};

}  // namespace

BoundedLpResult maximize_bounded(const Eigen::MatrixXd& M, const Eigen::VectorXd& b,
                                 const Eigen::VectorXd& c, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper, const SimplexOptions& options) {
    if (b.size() != M.rows() || c.size() != M.cols() || lower.size() != M.cols() ||
        upper.size() != M.cols()) {
        throw std::invalid_argument("bounded LP: dimension mismatch");
    }
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
        if (!std::isfinite(lower[j]) || !std::isfinite(upper[j]) || lower[j] > upper[j]) {
            throw std::invalid_argument(fmt::format("bounded LP: invalid bounds on column {}", j));
        }
    }
    BoundedSimplex simplex(M, b, c, lower, upper, options);
    return simplex.solve();
}

}  // namespace tailedts::lp
