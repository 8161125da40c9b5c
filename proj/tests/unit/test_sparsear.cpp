#include "tailedts/io.hpp"
#include "tailedts/solvers.hpp"
#include "tailedts/sparsear.hpp"

#include "../support.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>

using namespace tailedts;
using testsupport::pick;
using testsupport::uniform;

namespace {

/// Brute-force NNLS on a small support: best non-negative unconstrained LS over all sub-supports.
double nnls_oracle(const sparsear::GramPair& g, const std::vector<std::size_t>& support) {
    double best = 0.0;
    const std::size_t m = support.size();
    for (std::size_t mask = 1; mask < (std::size_t{1} << m); ++mask) {
        std::vector<Eigen::Index> idx;
        for (std::size_t k = 0; k < m; ++k) {
            if ((mask >> k) & 1) idx.push_back(static_cast<Eigen::Index>(support[k] - 1));
        }
        const auto s = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd P(s, s);
        Eigen::VectorXd q(s);
        for (Eigen::Index a = 0; a < s; ++a) {
            q[a] = g.psi[idx[static_cast<std::size_t>(a)]];
            for (Eigen::Index b = 0; b < s; ++b) P(a, b) = g.phi(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)]);
        }
        const Eigen::VectorXd w = P.ldlt().solve(q);
        if ((w.array() < 0.0).any()) continue;
        best = std::min(best, w.dot(P * w) - 2.0 * w.dot(q));
    }
    return best;
}

void check_result_discipline(const sparsear::SparseArProblem& p, const sparsear::SparseArResult& r) {
    CHECK(r.support.size() <= p.sparsity);
    CHECK(std::is_sorted(r.support.begin(), r.support.end()));
    REQUIRE(r.weights.size() == p.grams.size());
    for (const auto& w : r.weights) {
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            CHECK(w[k] >= 0.0);
            const bool in = std::binary_search(r.support.begin(), r.support.end(), static_cast<std::size_t>(k + 1));
            if (!in) CHECK(w[k] == 0.0);
        }
    }
}

}  // namespace

TEST_CASE("property: the lag recursion reproduces the dense Gram matrix") {
    testsupport::Rng rng(51);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t d = 1 + pick(rng, 0, 12);
        std::vector<double> x(d + 1 + pick(rng, 0, 80));
        const bool integer = trial % 2 == 0;
        for (auto& v : x) v = integer ? std::floor(uniform(rng, 0, 1e6)) : uniform(rng, -5, 5);
        const auto dense = solvers::build_design(x, d);
        const auto g = sparsear::series_gram(x, d);
        const Eigen::MatrixXd phi = dense.A.transpose() * dense.A;
        const Eigen::VectorXd psi = dense.A.transpose() * dense.y;
        CHECK((g.phi - phi).norm() <= 1e-12 * (1 + phi.norm()));
        CHECK((g.psi - psi).norm() <= 1e-12 * (1 + psi.norm()));
        CHECK(g.y_sq == doctest::Approx(dense.y.squaredNorm()).epsilon(1e-12));
        CHECK(g.n_rows == dense.rows());
    }
    CHECK_THROWS(sparsear::series_gram(std::vector<double>{1, 2}, 2));
}

TEST_CASE("property: pooled Gram is bitwise independent of the worker count") {
    testsupport::Rng rng(52);
    std::vector<std::vector<double>> pool;
    for (int s = 0; s < 300; ++s) pool.push_back(testsupport::ar_series(rng, {0.3, 0.0, 0.2}, 50 + pick(rng, 0, 30), 1.0));
    const auto one = sparsear::accumulate_gram(pool, 6, "x", 1);
    for (std::size_t workers : {2, 3, 7}) {
        const auto many = sparsear::accumulate_gram(pool, 6, "x", workers);
        CHECK(many.phi == one.phi);
        CHECK(many.psi == one.psi);
        CHECK(many.y_sq == one.y_sq);
    }
}

TEST_CASE("property: Gram objective equals the dense sum of squared errors") {
    testsupport::Rng rng(53);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t d = 2 + pick(rng, 0, 8);
        std::vector<std::vector<double>> pool;
        for (int s = 0; s < 4; ++s) pool.push_back(testsupport::ar_series(rng, {0.4, 0.1}, d + 40, 2.0));
        sparsear::SparseArProblem p;
        p.order = d;
        p.sparsity = d;
        p.grams.push_back(sparsear::accumulate_gram(pool, d));
        Eigen::VectorXd w(static_cast<Eigen::Index>(d));
        for (Eigen::Index k = 0; k < w.size(); ++k) w[k] = uniform(rng, 0.0, 0.3);
        std::vector<std::size_t> all(d);
        std::iota(all.begin(), all.end(), 1);
        const auto dense = solvers::build_design(pool, d);
        const double sse = (dense.y - dense.A * w).squaredNorm();
        CHECK(sparsear::objective_value(p, all, {w}) + p.grams[0].y_sq == doctest::Approx(sse).epsilon(1e-6));
        CHECK(sparsear::sum_squared_errors(p, {w}) == doctest::Approx(sse).epsilon(1e-6));
    }
}

TEST_CASE("objective rejects negative or off-support weights") {
    testsupport::Rng rng(54);
    const auto p = testsupport::random_sparse_problem(rng, 4, 2, 1);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(4);
    w[0] = -0.1;
    const std::vector<std::size_t> s{1, 2};
    CHECK_THROWS(sparsear::objective_value(p, s, {w}));
    w[0] = 0.1;
    w[3] = 0.2;
    CHECK_THROWS(sparsear::objective_value(p, s, {w}));
}

TEST_CASE("property: active-set NNLS matches subset enumeration") {
    testsupport::Rng rng(55);
    for (int trial = 0; trial < 60; ++trial) {
        const auto p = testsupport::random_sparse_problem(rng, 8, 4, 1);
        std::vector<std::size_t> support;
        for (std::size_t k = 1; k <= 8; ++k) {
            if (uniform(rng, 0, 1) < 0.6) support.push_back(k);
        }
        if (support.empty()) support.push_back(1);
        const auto& g = p.grams[0];
        const Eigen::VectorXd w = sparsear::nnls_on_support(g, support);
        const double value = w.dot(g.phi * w) - 2.0 * w.dot(g.psi);
        CHECK(value == doctest::Approx(nnls_oracle(g, support)).epsilon(1e-9));
        const Eigen::VectorXd grad = 2.0 * (g.phi * w - g.psi);
        for (std::size_t k : support) {
            const auto i = static_cast<Eigen::Index>(k - 1);
            CHECK(w[i] >= 0.0);
            if (w[i] > 0) CHECK(std::abs(grad[i]) <= 1e-7 * (1 + g.psi.cwiseAbs().maxCoeff()));
            else CHECK(grad[i] >= -1e-7 * (1 + g.psi.cwiseAbs().maxCoeff()));
        }
    }
}

TEST_CASE("property: branch and bound matches exhaustive search") {
    testsupport::Rng rng(56);
    for (int trial = 0; trial < 30; ++trial) {
        const auto p = testsupport::random_sparse_problem(rng, 3 + pick(rng, 0, 7), 1 + pick(rng, 0, 2),
                                                          1 + pick(rng, 0, 2));
        const auto exact = sparsear::exhaustive_oracle(p);
        const auto bb = sparsear::solve_branch_and_bound(p);
        CHECK(bb.optimality == sparsear::Optimality::Exact);
        CHECK(std::abs(bb.objective - exact.objective) <= 1e-7 * std::max(1.0, std::abs(exact.objective)));
        check_result_discipline(p, bb);
        check_result_discipline(p, exact);
    }
}

TEST_CASE("property: optimal objective is non-increasing in the sparsity") {
    testsupport::Rng rng(57);
    for (int trial = 0; trial < 10; ++trial) {
        auto p = testsupport::random_sparse_problem(rng, 8, 1, 2);
        double prev = std::numeric_limits<double>::infinity();
        for (std::size_t tau = 1; tau <= 8; ++tau) {
            p.sparsity = tau;
            const double obj = sparsear::solve_branch_and_bound(p).objective;
            CHECK(obj <= prev + 1e-9 * std::max(1.0, std::abs(prev)));
            prev = obj;
        }
    }
}

TEST_CASE("greedy is feasible and never beats the exact optimum") {
    testsupport::Rng rng(58);
    for (int trial = 0; trial < 20; ++trial) {
        const auto p = testsupport::random_sparse_problem(rng, 10, 3, 2);
        const auto g = sparsear::greedy_support(p);
        check_result_discipline(p, g);
        CHECK(g.objective >= sparsear::exhaustive_oracle(p).objective - 1e-9);
    }
}

TEST_CASE("a node limit yields a flagged incumbent") {
    testsupport::Rng rng(59);
    auto p = testsupport::random_sparse_problem(rng, 12, 3, 3);
    sparsear::BranchAndBoundOptions o;
    o.node_limit = 1;
    const auto r = sparsear::solve_branch_and_bound(p, o);
    check_result_discipline(p, r);
    CHECK(r.objective >= sparsear::exhaustive_oracle(p).objective - 1e-9);
    CHECK(r.nodes <= 1);
    if (r.optimality == sparsear::Optimality::Incumbent) CHECK(sparsear::to_json(p, r)["optimality"] == "incumbent");
}

TEST_CASE("cleaner cycles get larger cycle-lag coefficients") {
    testsupport::Rng rng(60);
    std::vector<double> pattern(24);
    for (auto& v : pattern) v = uniform(rng, 0.0, 40.0);
    auto pool = [&](double sigma) {
        std::vector<std::vector<double>> out;
        for (int s = 0; s < 5; ++s) {
            std::vector<double> x(24 * 20);
            for (std::size_t t = 0; t < x.size(); ++t) {
                x[t] = pattern[t % 24] + std::normal_distribution<double>(0.0, sigma)(rng);
            }
            out.push_back(x);
        }
        return out;
    };
    sparsear::SparseArProblem p;
    p.order = 48;
    p.sparsity = 2;
    p.grams.push_back(sparsear::accumulate_gram(pool(1.0), 48, "clean"));
    p.grams.push_back(sparsear::accumulate_gram(pool(15.0), 48, "noisy"));
    const auto r = sparsear::solve_branch_and_bound(p);
    const std::size_t lags[] = {24};
    const auto rows = sparsear::seasonality_report(p, r, lags);
    REQUIRE(rows.size() == 2);
    CHECK(std::binary_search(r.support.begin(), r.support.end(), std::size_t{24}));
    CHECK(rows[0].category == "clean");
    CHECK(rows[0].coefficient > rows[1].coefficient);
}

TEST_CASE("support counting and validation") {
    CHECK(sparsear::support_count(12, 3) == 12 + 66 + 220);
    CHECK(sparsear::support_count(168, 8) > 1'000'000);
    testsupport::Rng rng(61);
    auto p = testsupport::random_sparse_problem(rng, 4, 2, 1);
    p.sparsity = 5;
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.sparsity = 2;
    p.grams.push_back(sparsear::GramPair::zero(3));
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    p.grams.clear();
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
    auto big = testsupport::random_sparse_problem(rng, 60, 8, 1);
    CHECK_THROWS(sparsear::exhaustive_oracle(big));
}

TEST_CASE("reports: seasonality rows, JSON and LP export") {
    testsupport::Rng rng(62);
    const auto p = testsupport::random_sparse_problem(rng, 30, 3, 2);
    const auto r = sparsear::solve_branch_and_bound(p);
    const auto rows = sparsear::seasonality_report(p, r);
    CHECK(rows.size() == 2 * 4);
    for (const auto& row : rows) {
        if (row.lag > 30) CHECK(row.coefficient == 0.0);
    }
    CHECK(sparsear::render_seasonality(rows).find("lag 24") != std::string::npos);

    const auto j = sparsear::to_json(p, r);
    CHECK(j["support"].size() == r.support.size());
    CHECK(j["weights"].contains("g0"));
    CHECK(j["optimality"] == "exact");

    testsupport::TempDir dir("lp");
    sparsear::export_miqp_lp(p, dir / "m.lp");
    const std::string text = io::read_file(dir / "m.lp");
    CHECK(text.find("Minimize") != std::string::npos);
    CHECK(text.find(" <= 3\n") != std::string::npos);
    CHECK(text.find(" m_1_30: w_1_30 - 5 b_30 <= 0") != std::string::npos);
    CHECK(text.find("Binaries\n b_1\n") != std::string::npos);
    CHECK(text.substr(text.size() - 4) == "End\n");
}
