#pragma once

#include <span>
#include <string>
#include <string_view>
#include <variant>

namespace tailedts {

namespace loss {
struct L2 {};
struct L1 {};
struct Huber {
    double delta = 1.0;
};
struct Quantile {
    double tau = 0.5;
};
struct Lp {
    double p = 0.5;
};
}  // namespace loss

/// Residual loss choice with its hyperparameter.
class LossSpec {
public:
    using Variant = std::variant<loss::L2, loss::L1, loss::Huber, loss::Quantile, loss::Lp>;

    LossSpec() = default;
    /// Validates hyperparameters: delta > 0, tau in (0,1), p in (0,1).
    LossSpec(Variant v);  // NOLINT(google-explicit-constructor)

    static LossSpec l2() { return LossSpec(loss::L2{}); }
    static LossSpec l1() { return LossSpec(loss::L1{}); }
    static LossSpec huber(double delta) { return LossSpec(loss::Huber{delta}); }
    static LossSpec quantile(double tau) { return LossSpec(loss::Quantile{tau}); }
    static LossSpec lp(double p) { return LossSpec(loss::Lp{p}); }

    /// Accepts "l2", "l1", "huber:1", "quantile:0.3", "lp:0.5" (hyperparameter optional for the
    /// tunable losses, defaulting to delta=1, tau=0.3, p=0.5).
    static LossSpec parse(std::string_view text);

    const Variant& variant() const { return v_; }
    std::string family() const;  // "l2", "l1", "huber", "quantile", "lp"
    std::string to_string() const;
    /// Display name as used in result tables, e.g. "Huber loss".
    std::string display_name() const;
    bool is_convex() const;

    template <typename T>
    bool is() const {
        return std::holds_alternative<T>(v_);
    }
    template <typename T>
    const T& as() const {
        return std::get<T>(v_);
    }

    friend bool operator==(const LossSpec& a, const LossSpec& b);

private:
    Variant v_{loss::L2{}};
};

/// rho(eps): eps^2 | |eps| | Huber (eps^2 inside delta, delta(2|eps|-delta) outside) | pinball | |eps|^p.
double eval_loss(const LossSpec& spec, double eps);

/// Sum of rho over residuals.
double total_objective(const LossSpec& spec, std::span<const double> residuals);

/// IRLS weight for one residual. `smoothing` is the Lp/L1 additive term under the square
/// (eps^2 + smoothing) and the Quantile/Huber floor on |eps|. Throws std::domain_error when the
/// weight is singular (smoothing 0 with eps 0) for L1, Lp and Quantile.
double irls_weight(const LossSpec& spec, double eps, double smoothing);

}  // namespace tailedts
