#include "tailedts/sparsear.hpp"

#include "tailedts/io.hpp"
#include "tailedts/parallel.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <queue>

namespace tailedts::sparsear {

namespace {

constexpr double kMaxExactMagnitude = 2147483648.0;  // 2^31

template <typename Acc>
GramPair gram_with(std::span<const double> x, std::size_t d) {
    const std::size_t T = x.size();
    auto v = [&](std::size_t i) { return static_cast<Acc>(x[i]); };
    std::vector<Acc> phi(d * d, Acc{0});
    std::vector<Acc> psi(d, Acc{0});
    Acc y_sq{0};
    for (std::size_t t = d; t < T; ++t) {
        const Acc xt = v(t);
        const Acc x1 = v(t - 1);
        y_sq += xt * xt;
        for (std::size_t k = 1; k <= d; ++k) {
            const Acc xk = v(t - k);
            psi[k - 1] += xt * xk;
            phi[k - 1] += x1 * xk;  // row for lag 1
        }
    }
    for (std::size_t j = 1; j < d; ++j) {
        for (std::size_t k = j; k < d; ++k) {
            phi[j * d + k] = phi[(j - 1) * d + (k - 1)] + v(d - 1 - j) * v(d - 1 - k) -
                             v(T - 1 - j) * v(T - 1 - k);
        }
    }
    GramPair g = GramPair::zero(d);
    for (std::size_t j = 0; j < d; ++j) {
        g.psi[static_cast<Eigen::Index>(j)] = static_cast<double>(psi[j]);
        for (std::size_t k = j; k < d; ++k) {
            const double value = static_cast<double>(phi[j * d + k]);
            g.phi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = value;
            g.phi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = value;
        }
    }
    g.y_sq = static_cast<double>(y_sq);
    g.n_rows = T - d;
    return g;
}

/// Neumaier-compensated running sum of Gram pairs.
struct CompensatedGram {
    GramPair sum;
    Eigen::MatrixXd phi_c;
    Eigen::VectorXd psi_c;
    double y_sq_c = 0.0;

    explicit CompensatedGram(std::size_t d)
        : sum(GramPair::zero(d)),
          phi_c(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))),
          psi_c(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d))) {}

    static void add(double& s, double& c, double x) {
        const double t = s + x;
        c += std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
        s = t;
    }

    void add(const GramPair& g) {
        for (Eigen::Index k = 0; k < sum.phi.cols(); ++k) {
            for (Eigen::Index j = 0; j < sum.phi.rows(); ++j) add(sum.phi(j, k), phi_c(j, k), g.phi(j, k));
            add(sum.psi[k], psi_c[k], g.psi[k]);
        }
        add(sum.y_sq, y_sq_c, g.y_sq);
        sum.n_rows += g.n_rows;
    }

    GramPair result() const {
        GramPair g = sum;
        g.phi += phi_c;
        g.psi += psi_c;
        g.y_sq += y_sq_c;
        return g;
    }
};

template <typename SeriesAt>
GramPair reduce_grams(std::size_t n, std::size_t order, std::string label, std::size_t workers,
                      SeriesAt&& series_at) {
    if (order == 0) throw std::invalid_argument("AR order must be at least 1");
    // Chunking depends only on n, so the reduction tree is the same for any worker count.
    const std::size_t chunk = std::max<std::size_t>(64, (n + 255) / 256);
    const std::size_t chunks = (n + chunk - 1) / chunk;
    std::vector<GramPair> partial(chunks);
    parallel_for(chunks, workers, [&](std::size_t c) {
        CompensatedGram acc(order);
        const std::size_t end = std::min(n, (c + 1) * chunk);
        for (std::size_t i = c * chunk; i < end; ++i) {
            const std::vector<double> values = series_at(i);
            acc.add(series_gram(values, order));
        }
        partial[c] = acc.result();
    });
    CompensatedGram total(order);
    for (const GramPair& g : partial) total.add(g);
    GramPair out = total.result();
    out.label = std::move(label);
    return out;
}

std::vector<std::size_t> normalized_support(std::span<const std::size_t> support, std::size_t d) {
    std::vector<std::size_t> s(support.begin(), support.end());
    std::sort(s.begin(), s.end());
    s.erase(std::unique(s.begin(), s.end()), s.end());
    for (std::size_t lag : s) {
        if (lag < 1 || lag > d) {
            throw std::invalid_argument(fmt::format("lag {} outside 1..{}", lag, d));
        }
    }
    return s;
}

double category_objective(const GramPair& g, const Eigen::VectorXd& w) {
    return w.dot(g.phi * w) - 2.0 * w.dot(g.psi);
}

double problem_scale(const SparseArProblem& p) {
    double s = 1.0;
    for (const auto& g : p.grams) {
        if (g.order() == 0) continue;
        s = std::max({s, g.psi.cwiseAbs().maxCoeff(), g.phi.diagonal().cwiseAbs().maxCoeff()});
    }
    return s;
}

struct Evaluation {
    std::vector<Eigen::VectorXd> weights;
    double objective = 0.0;
    std::vector<std::size_t> support;  // canonical: union of positive entries
};

Evaluation evaluate(const SparseArProblem& p, std::span<const std::size_t> allowed) {
    Evaluation e;
    e.weights.reserve(p.grams.size());
    std::vector<char> used(p.order + 1, 0);
    for (const auto& g : p.grams) {
        Eigen::VectorXd w = nnls_on_support(g, allowed);
        e.objective += category_objective(g, w);
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            if (w[k] > 0.0) used[static_cast<std::size_t>(k) + 1] = 1;
        }
        e.weights.push_back(std::move(w));
    }
    for (std::size_t lag = 1; lag <= p.order; ++lag) {
        if (used[lag]) e.support.push_back(lag);
    }
    return e;
}

bool better(const Evaluation& candidate, const Evaluation& incumbent, double tie_tol) {
    if (candidate.objective < incumbent.objective - tie_tol) return true;
    if (candidate.objective > incumbent.objective + tie_tol) return false;
    return candidate.support < incumbent.support;
}

SparseArResult to_result(const SparseArProblem& p, Evaluation e, Optimality optimality,
                         std::uint64_t nodes) {
    SparseArResult r;
    r.support = std::move(e.support);
    r.weights = std::move(e.weights);
    r.objective = e.objective;
    r.optimality = optimality;
    r.nodes = nodes;
    for (std::size_t g = 0; g < r.weights.size(); ++g) {
        const double max_w = r.weights[g].size() ? r.weights[g].maxCoeff() : 0.0;
        if (max_w > p.big_m / 2.0) {
            r.warnings.push_back(fmt::format(
                "category {} has weight {:.6g} above M/2 = {:.6g}; the exported big-M model may "
                "need a larger M",
                p.grams[g].label.empty() ? std::to_string(g) : p.grams[g].label, max_w, p.big_m / 2.0));
        }
    }
    return r;
}

std::string category_name_of(const SparseArProblem& p, std::size_t g) {
    return p.grams[g].label.empty() ? fmt::format("category{}", g) : p.grams[g].label;
}

}  // namespace

GramPair GramPair::zero(std::size_t order, std::string label) {
    const auto d = static_cast<Eigen::Index>(order);
    return GramPair{std::move(label), Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d), 0.0, 0};
}

GramPair& GramPair::operator+=(const GramPair& other) {
    if (other.order() != order()) throw std::invalid_argument("Gram pair orders differ");
    phi += other.phi;
    psi += other.psi;
    y_sq += other.y_sq;
    n_rows += other.n_rows;
    return *this;
}

GramPair series_gram(std::span<const double> series, std::size_t order) {
    if (order == 0) throw std::invalid_argument("AR order must be at least 1");
    if (series.size() <= order) {
        throw std::invalid_argument(fmt::format("series of length {} is too short for AR order {}",
                                                series.size(), order));
    }
    const bool integral = std::all_of(series.begin(), series.end(), [](double v) {
        return std::isfinite(v) && std::trunc(v) == v && std::abs(v) < kMaxExactMagnitude;
    });
    if (integral) return gram_with<__int128>(series, order);
    return gram_with<long double>(series, order);
}

GramPair accumulate_gram(const std::vector<std::vector<double>>& pool, std::size_t order,
                         std::string label, std::size_t workers) {
    return reduce_grams(pool.size(), order, std::move(label), workers,
                        [&](std::size_t i) { return pool[i]; });
}

GramPair accumulate_gram(const MonthTable& table, std::span<const std::size_t> rows,
                         std::size_t order, std::string label, std::size_t workers) {
    for (std::size_t r : rows) {
        if (r >= table.rows()) throw std::out_of_range(fmt::format("row {} outside table", r));
    }
    return reduce_grams(rows.size(), order, std::move(label), workers,
                        [&](std::size_t i) { return table[rows[i]].as_doubles(); });
}

void SparseArProblem::validate() const {
    if (order == 0) throw std::invalid_argument("AR order must be at least 1");
    if (sparsity < 1) throw std::invalid_argument("sparsity must be at least 1");
    if (sparsity > order) {
        throw std::invalid_argument(fmt::format("sparsity {} exceeds order {}", sparsity, order));
    }
    if (!(big_m > 0.0)) throw std::invalid_argument("big-M must be positive");
    if (grams.empty()) throw std::invalid_argument("sparse AR problem has no categories");
    for (const auto& g : grams) {
        if (g.order() != order || static_cast<std::size_t>(g.phi.rows()) != order ||
            static_cast<std::size_t>(g.phi.cols()) != order) {
            throw std::invalid_argument("Gram pair order does not match the problem order");
        }
    }
}

std::string_view optimality_name(Optimality o) {
    return o == Optimality::Exact ? "exact" : "incumbent";
}

double objective_value(const SparseArProblem& problem, std::span<const std::size_t> support,
                       const std::vector<Eigen::VectorXd>& weights) {
    if (weights.size() != problem.grams.size()) {
        throw std::invalid_argument("one weight vector per category is required");
    }
    const std::vector<std::size_t> s = normalized_support(support, problem.order);
    std::vector<char> allowed(problem.order, 0);
    for (std::size_t lag : s) allowed[lag - 1] = 1;
    double total = 0.0;
    for (std::size_t g = 0; g < weights.size(); ++g) {
        const Eigen::VectorXd& w = weights[g];
        if (static_cast<std::size_t>(w.size()) != problem.order) {
            throw std::invalid_argument("weight vector length differs from the order");
        }
        for (Eigen::Index k = 0; k < w.size(); ++k) {
            if (w[k] < 0.0) throw std::invalid_argument(fmt::format("negative weight at lag {}", k + 1));
            if (w[k] != 0.0 && !allowed[static_cast<std::size_t>(k)]) {
                throw std::invalid_argument(fmt::format("weight at lag {} lies outside the support", k + 1));
            }
        }
        total += category_objective(problem.grams[g], w);
    }
    return total;
}

double sum_squared_errors(const SparseArProblem& problem, const std::vector<Eigen::VectorXd>& weights) {
    double total = 0.0;
    for (std::size_t g = 0; g < weights.size(); ++g) {
        total += category_objective(problem.grams[g], weights[g]) + problem.grams[g].y_sq;
    }
    return total;
}

Eigen::VectorXd nnls_on_support(const GramPair& gram, std::span<const std::size_t> support) {
    const std::size_t d = gram.order();
    const std::vector<std::size_t> lags = normalized_support(support, d);
    const auto m = static_cast<Eigen::Index>(lags.size());
    Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
    if (m == 0) return full;

    Eigen::MatrixXd Q(m, m);
    Eigen::VectorXd b(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        b[i] = gram.psi[static_cast<Eigen::Index>(lags[static_cast<std::size_t>(i)] - 1)];
        for (Eigen::Index j = 0; j < m; ++j) {
            Q(i, j) = gram.phi(static_cast<Eigen::Index>(lags[static_cast<std::size_t>(i)] - 1),
                               static_cast<Eigen::Index>(lags[static_cast<std::size_t>(j)] - 1));
        }
    }
    const double scale = std::max({1.0, b.cwiseAbs().maxCoeff(), Q.diagonal().cwiseAbs().maxCoeff()});
    const double kkt_tol = 1e-10 * scale;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
    std::vector<char> passive(static_cast<std::size_t>(m), 0);
    std::vector<char> blocked(static_cast<std::size_t>(m), 0);
    const std::size_t limit = std::max<std::size_t>(d * d, 16);
    std::size_t iterations = 0;

    auto solve_passive = [&](Eigen::VectorXd& z) {
        std::vector<Eigen::Index> idx;
        for (Eigen::Index i = 0; i < m; ++i) {
            if (passive[static_cast<std::size_t>(i)]) idx.push_back(i);
        }
        const auto k = static_cast<Eigen::Index>(idx.size());
        Eigen::MatrixXd sub(k, k);
        Eigen::VectorXd rhs(k);
        for (Eigen::Index a = 0; a < k; ++a) {
            rhs[a] = b[idx[static_cast<std::size_t>(a)]];
            for (Eigen::Index c = 0; c < k; ++c) sub(a, c) = Q(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(sub);
        if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-14) {
            sub.diagonal().array() += 1e-12 * scale;
            ldlt.compute(sub);
        }
        const Eigen::VectorXd sol = ldlt.solve(rhs);
        z = Eigen::VectorXd::Zero(m);
        for (Eigen::Index a = 0; a < k; ++a) z[idx[static_cast<std::size_t>(a)]] = sol[a];
    };

    while (true) {
        const Eigen::VectorXd g = b - Q * w;  // negative half-gradient
        Eigen::Index enter = -1;
        double best = kkt_tol;
        for (Eigen::Index i = 0; i < m; ++i) {
            const auto ui = static_cast<std::size_t>(i);
            if (passive[ui] || blocked[ui]) continue;
            if (g[i] > best) {
                best = g[i];
                enter = i;
            }
        }
        if (enter < 0) break;
        passive[static_cast<std::size_t>(enter)] = 1;
        bool first = true;
        while (true) {
            if (++iterations > limit) {
                throw SparseArError(fmt::format("NNLS did not converge in {} iterations", limit));
            }
            Eigen::VectorXd z;
            solve_passive(z);
            bool feasible = true;
            for (Eigen::Index i = 0; i < m; ++i) {
                if (passive[static_cast<std::size_t>(i)] && z[i] <= 0.0) feasible = false;
            }
            if (feasible) {
                w = z;
                std::fill(blocked.begin(), blocked.end(), 0);
                break;
            }
            if (first && z[enter] <= 0.0) {
                // Numerically the entering lag cannot move; freeze it until the passive set changes.
                passive[static_cast<std::size_t>(enter)] = 0;
                blocked[static_cast<std::size_t>(enter)] = 1;
                break;
            }
            first = false;
            double alpha = 1.0;
            for (Eigen::Index i = 0; i < m; ++i) {
                if (passive[static_cast<std::size_t>(i)] && z[i] <= 0.0) {
                    alpha = std::min(alpha, w[i] / (w[i] - z[i]));
                }
            }
            w += alpha * (z - w);
            for (Eigen::Index i = 0; i < m; ++i) {
                if (passive[static_cast<std::size_t>(i)] && w[i] <= 1e-15 * scale) {
                    passive[static_cast<std::size_t>(i)] = 0;
                    w[i] = 0.0;
                }
            }
        }
    }
    for (Eigen::Index i = 0; i < m; ++i) {
        full[static_cast<Eigen::Index>(lags[static_cast<std::size_t>(i)] - 1)] = std::max(0.0, w[i]);
    }
    return full;
}

SparseArResult greedy_support(const SparseArProblem& problem) {
    problem.validate();
    const double tol = 1e-12 * problem_scale(problem);
    std::vector<std::size_t> chosen;
    Evaluation current = evaluate(problem, chosen);

    std::uint64_t evaluations = 0;
    while (chosen.size() < problem.sparsity) {
        std::optional<Evaluation> best;
        std::size_t best_lag = 0;
        for (std::size_t lag = 1; lag <= problem.order; ++lag) {
            if (std::find(chosen.begin(), chosen.end(), lag) != chosen.end()) continue;
            std::vector<std::size_t> trial = chosen;
            trial.push_back(lag);
            Evaluation e = evaluate(problem, trial);
            ++evaluations;
            if (!best || e.objective < best->objective - tol) {
                best = std::move(e);
                best_lag = lag;
            }
        }
        if (!best || !(best->objective < current.objective - tol)) break;
        chosen.push_back(best_lag);
        current = std::move(*best);
    }

    // Best-improvement single swaps until no swap lowers the objective.
    for (std::size_t pass = 0; pass < 100 * problem.sparsity && !chosen.empty(); ++pass) {
        std::optional<Evaluation> best;
        std::vector<std::size_t> best_set;
        std::vector<std::size_t> sorted = chosen;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t out : sorted) {
            for (std::size_t in = 1; in <= problem.order; ++in) {
                if (std::find(chosen.begin(), chosen.end(), in) != chosen.end()) continue;
                std::vector<std::size_t> trial;
                for (std::size_t lag : chosen) trial.push_back(lag == out ? in : lag);
                Evaluation e = evaluate(problem, trial);
                ++evaluations;
                if (!best || e.objective < best->objective - tol) {
                    best = std::move(e);
                    best_set = trial;
                }
            }
        }
        if (!best || !(best->objective < current.objective - tol)) break;
        chosen = best_set;
        current = std::move(*best);
    }
    return to_result(problem, std::move(current), Optimality::Incumbent, evaluations);
}

SparseArResult solve_branch_and_bound(const SparseArProblem& problem,
                                      const BranchAndBoundOptions& options) {
    problem.validate();
    const auto started = std::chrono::steady_clock::now();
    const std::size_t d = problem.order;
    const double tie_tol = 1e-12 * problem_scale(problem);

    SparseArResult greedy = greedy_support(problem);
    Evaluation incumbent{greedy.weights, greedy.objective, greedy.support};
    auto prune_tol = [&] { return 1e-9 * std::max(1.0, std::abs(incumbent.objective)); };

    enum : char { Free = 0, In = 1, Out = 2 };
    struct Node {
        std::vector<char> state;
        std::size_t included = 0;
        std::size_t depth = 0;
        std::uint64_t seq = 0;
        Evaluation relaxation;
    };
    struct Order {
        bool operator()(const Node* a, const Node* b) const {
            if (a->relaxation.objective != b->relaxation.objective) {
                return a->relaxation.objective > b->relaxation.objective;
            }
            if (a->depth != b->depth) return a->depth < b->depth;
            return a->seq > b->seq;
        }
    };
    std::vector<std::unique_ptr<Node>> storage;
    std::priority_queue<Node*, std::vector<Node*>, Order> frontier;
    std::uint64_t seq = 0;
    std::uint64_t nodes = 0;

    auto allowed_lags = [&](const std::vector<char>& state, bool only_included) {
        std::vector<std::size_t> lags;
        for (std::size_t lag = 1; lag <= d; ++lag) {
            const char s = state[lag - 1];
            if (only_included ? s == In : s != Out) lags.push_back(lag);
        }
        return lags;
    };
    auto offer = [&](Evaluation e) {
        if (better(e, incumbent, tie_tol)) incumbent = std::move(e);
    };
    // Evaluates a node; feasible relaxations update the incumbent and are not queued.
    auto push = [&](std::vector<char> state, std::size_t included, std::size_t depth,
                    const Evaluation* parent_relaxation) {
        ++nodes;
        Evaluation relaxation;
        if (included == problem.sparsity) {
            offer(evaluate(problem, allowed_lags(state, true)));
            return;
        }
        relaxation = parent_relaxation ? *parent_relaxation : evaluate(problem, allowed_lags(state, false));
        if (relaxation.support.size() <= problem.sparsity) {
            offer(std::move(relaxation));
            return;
        }
        if (relaxation.objective >= incumbent.objective - prune_tol()) return;
        auto node = std::make_unique<Node>(Node{std::move(state), included, depth, seq++, std::move(relaxation)});
        frontier.push(node.get());
        storage.push_back(std::move(node));
    };

    push(std::vector<char>(d, Free), 0, 0, nullptr);
    bool limited = false;
    while (!frontier.empty()) {
        Node* node = frontier.top();
        frontier.pop();
        if (node->relaxation.objective >= incumbent.objective - prune_tol()) continue;
        if (nodes >= options.node_limit) {
            limited = true;
            break;
        }
        if (options.time_limit_seconds > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count() >
                options.time_limit_seconds) {
            limited = true;
            break;
        }
        // Branch on the undecided lag carrying the most relaxed weight.
        std::size_t branch = 0;
        double heaviest = -1.0;
        for (std::size_t lag : node->relaxation.support) {
            if (node->state[lag - 1] != Free) continue;
            double mass = 0.0;
            for (const auto& w : node->relaxation.weights) mass += w[static_cast<Eigen::Index>(lag - 1)];
            if (mass > heaviest) {
                heaviest = mass;
                branch = lag;
            }
        }
        if (branch == 0) continue;  // relaxation support entirely included: already exact
        std::vector<char> with = node->state;
        with[branch - 1] = In;
        std::vector<char> without = node->state;
        without[branch - 1] = Out;
        push(std::move(with), node->included + 1, node->depth + 1, &node->relaxation);
        push(std::move(without), node->included, node->depth + 1, nullptr);
    }
    return to_result(problem, std::move(incumbent), limited ? Optimality::Incumbent : Optimality::Exact,
                     nodes);
}

std::uint64_t support_count(std::size_t order, std::size_t sparsity) {
    constexpr std::uint64_t kCap = std::numeric_limits<std::uint64_t>::max() / 4;
    std::uint64_t total = 0;
    std::uint64_t binom = 1;  // C(order, k)
    for (std::size_t k = 1; k <= std::min(order, sparsity); ++k) {
        const long double next = static_cast<long double>(binom) * static_cast<long double>(order - k + 1) /
                                 static_cast<long double>(k);
        if (next > static_cast<long double>(kCap)) return kCap;
        binom = static_cast<std::uint64_t>(std::llround(next));
        total += binom;
        if (total > kCap) return kCap;
    }
    return total;
}

SparseArResult exhaustive_oracle(const SparseArProblem& problem) {
    problem.validate();
    const std::uint64_t count = support_count(problem.order, problem.sparsity);
    if (count > 1'000'000) {
        throw SparseArError(fmt::format("exhaustive search over {} supports exceeds the 10^6 budget", count));
    }
    const double tie_tol = 1e-12 * problem_scale(problem);
    Evaluation best = evaluate(problem, std::vector<std::size_t>{});
    std::uint64_t visited = 0;
    std::vector<std::size_t> combo;
    const std::size_t max_size = std::min(problem.order, problem.sparsity);
    // Depth-first enumeration in lexicographic order of the lag sets.
    auto recurse = [&](auto&& self, std::size_t next) -> void {
        if (!combo.empty()) {
            ++visited;
            Evaluation e = evaluate(problem, combo);
            if (better(e, best, tie_tol)) best = std::move(e);
        }
        if (combo.size() == max_size) return;
        for (std::size_t lag = next; lag <= problem.order; ++lag) {
            combo.push_back(lag);
            self(self, lag + 1);
            combo.pop_back();
        }
    };
    recurse(recurse, 1);
    return to_result(problem, std::move(best), Optimality::Exact, visited);
}

std::vector<SeasonalityRow> seasonality_report(const SparseArProblem& problem,
                                               const SparseArResult& result,
                                               std::span<const std::size_t> lags) {
    std::vector<SeasonalityRow> rows;
    for (std::size_t g = 0; g < result.weights.size(); ++g) {
        for (std::size_t lag : lags) {
            double value = 0.0;
            if (lag >= 1 && lag <= static_cast<std::size_t>(result.weights[g].size())) {
                value = result.weights[g][static_cast<Eigen::Index>(lag - 1)];
            }
            rows.push_back({category_name_of(problem, g), lag, value});
        }
    }
    return rows;
}

std::string render_seasonality(const std::vector<SeasonalityRow>& rows) {
    std::vector<std::size_t> lags;
    std::vector<std::string> categories;
    for (const auto& r : rows) {
        if (std::find(lags.begin(), lags.end(), r.lag) == lags.end()) lags.push_back(r.lag);
        if (std::find(categories.begin(), categories.end(), r.category) == categories.end()) {
            categories.push_back(r.category);
        }
    }
    std::string out = fmt::format("{:<12}", "category");
    for (std::size_t lag : lags) out += fmt::format(" {:>10}", fmt::format("lag {}", lag));
    out += '\n';
    for (const auto& c : categories) {
        out += fmt::format("{:<12}", c);
        for (std::size_t lag : lags) {
            for (const auto& r : rows) {
                if (r.category == c && r.lag == lag) out += fmt::format(" {:>10.4f}", r.coefficient);
            }
        }
        out += '\n';
    }
    return out;
}

nlohmann::json to_json(const SparseArProblem& problem, const SparseArResult& result) {
    nlohmann::json weights = nlohmann::json::object();
    nlohmann::json categories = nlohmann::json::array();
    for (std::size_t g = 0; g < result.weights.size(); ++g) {
        nlohmann::json per_lag = nlohmann::json::object();
        for (std::size_t lag : result.support) {
            per_lag[std::to_string(lag)] = result.weights[g][static_cast<Eigen::Index>(lag - 1)];
        }
        const std::string name = category_name_of(problem, g);
        weights[name] = per_lag;
        categories.push_back({{"label", name}, {"rows", problem.grams[g].n_rows}});
    }
    return {
        {"order", problem.order},
        {"sparsity", problem.sparsity},
        {"big_m", problem.big_m},
        {"support", result.support},
        {"weights", weights},
        {"objective", result.objective},
        {"sum_squared_errors", sum_squared_errors(problem, result.weights)},
        {"optimality", std::string(optimality_name(result.optimality))},
        {"nodes", result.nodes},
        {"categories", categories},
        {"warnings", result.warnings},
    };
}

void export_miqp_lp(const SparseArProblem& problem, const std::filesystem::path& path) {
    problem.validate();
    const std::size_t d = problem.order;
    std::string out;
    out += "\\ Sparse autoregression with a shared support, big-M form\n";
    out += fmt::format("\\ order {} sparsity {} M {}\n", d, problem.sparsity, problem.big_m);
    out += "Minimize\n obj:";
    std::size_t on_line = 0;
    auto term = [&](const std::string& t) {
        out += ' ';
        out += t;
        if (++on_line % 6 == 0) out += "\n ";
    };
    for (std::size_t g = 0; g < problem.grams.size(); ++g) {
        for (std::size_t k = 0; k < d; ++k) {
            term(fmt::format("{:+.17g} w_{}_{}", -2.0 * problem.grams[g].psi[static_cast<Eigen::Index>(k)], g, k + 1));
        }
    }
    out += " + [";
    for (std::size_t g = 0; g < problem.grams.size(); ++g) {
        const Eigen::MatrixXd& phi = problem.grams[g].phi;
        for (std::size_t j = 0; j < d; ++j) {
            for (std::size_t k = j; k < d; ++k) {
                const double v = phi(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
                if (v == 0.0) continue;
                if (j == k) {
                    term(fmt::format("{:+.17g} w_{}_{} ^ 2", 2.0 * v, g, j + 1));
                } else {
                    term(fmt::format("{:+.17g} w_{}_{} * w_{}_{}", 4.0 * v, g, j + 1, g, k + 1));
                }
            }
        }
    }
    out += " ] / 2\nSubject To\n card:";
    on_line = 0;
    for (std::size_t k = 0; k < d; ++k) term(fmt::format("+ b_{}", k + 1));
    out += fmt::format(" <= {}\n", problem.sparsity);
    for (std::size_t g = 0; g < problem.grams.size(); ++g) {
        for (std::size_t k = 0; k < d; ++k) {
            out += fmt::format(" m_{}_{}: w_{}_{} - {:.17g} b_{} <= 0\n", g, k + 1, g, k + 1, problem.big_m, k + 1);
        }
    }
    out += "Binaries\n";
    for (std::size_t k = 0; k < d; ++k) out += fmt::format(" b_{}\n", k + 1);
    out += "End\n";
    io::write_file(path, out);
}

}  // namespace tailedts::sparsear
