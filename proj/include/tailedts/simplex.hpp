#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <stdexcept>

namespace tailedts::lp {

class LpError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Status { Optimal, Infeasible, IterationLimit };

struct BoundedLpResult {
    Status status = Status::IterationLimit;
    Eigen::VectorXd x;      // primal solution, one entry per column
    Eigen::VectorXd duals;  // simplex multipliers of the equality rows
    double objective = 0.0;
    std::size_t iterations = 0;
    std::size_t degenerate_pivots = 0;
};

struct SimplexOptions {
    std::size_t max_iterations = 1'000'000;
    /// Refactor the basis inverse from scratch after this many pivots.
    std::size_t refactor_every = 64;
    /// After this many consecutive degenerate pivots pricing switches from largest-violation to
    /// pure Bland (smallest index), which cannot cycle.
    std::size_t bland_after_degenerate = 50;
};

/// Maximizes c'x subject to M x = b and lower <= x <= upper (all bounds finite) with a dense
/// bounded-variable revised simplex (two phases, artificial start). Ties in pricing and in the
/// ratio test go to the smallest index.
BoundedLpResult maximize_bounded(const Eigen::MatrixXd& M, const Eigen::VectorXd& b,
                                 const Eigen::VectorXd& c, const Eigen::VectorXd& lower,
                                 const Eigen::VectorXd& upper, const SimplexOptions& options = {});

}  // namespace tailedts::lp
