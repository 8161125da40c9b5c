#include "tailedts/losses.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace tailedts {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double parse_double(std::string_view text, std::string_view context) {
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        // Allow simple fractions such as "1/2" for the Lp power.
        const auto slash = text.find('/');
        if (slash != std::string_view::npos) {
            return parse_double(text.substr(0, slash), context) /
                   parse_double(text.substr(slash + 1), context);
        }
        throw std::invalid_argument(fmt::format("invalid number '{}' in loss '{}'", text, context));
    }
    return value;
}

}  // namespace

LossSpec::LossSpec(Variant v) : v_(v) {
    std::visit(overloaded{
                   [](const loss::L2&) {},
                   [](const loss::L1&) {},
                   [](const loss::Huber& h) {
                       if (!(h.delta > 0.0) || !std::isfinite(h.delta)) {
                           throw std::invalid_argument("Huber delta must be positive and finite");
                       }
                   },
                   [](const loss::Quantile& q) {
                       if (!(q.tau > 0.0 && q.tau < 1.0)) {
                           throw std::invalid_argument("quantile tau must lie in (0, 1)");
                       }
                   },
                   [](const loss::Lp& l) {
                       if (!(l.p > 0.0 && l.p < 1.0)) {
                           throw std::invalid_argument("Lp power p must lie in (0, 1)");
                       }
                   },
               },
               v_);
}

LossSpec LossSpec::parse(std::string_view text) {
    const auto colon = text.find(':');
    const std::string_view name = text.substr(0, colon);
    const bool has_arg = colon != std::string_view::npos;
    const std::string_view arg = has_arg ? text.substr(colon + 1) : std::string_view{};
    if (name == "l2" || name == "ls") {
        if (has_arg) throw std::invalid_argument("l2 loss takes no hyperparameter");
        return l2();
    }
    if (name == "l1") {
        if (has_arg) throw std::invalid_argument("l1 loss takes no hyperparameter");
        return l1();
    }
    if (name == "huber") return huber(has_arg ? parse_double(arg, text) : 1.0);
    if (name == "quantile") return quantile(has_arg ? parse_double(arg, text) : 0.3);
    if (name == "lp") return lp(has_arg ? parse_double(arg, text) : 0.5);
    throw std::invalid_argument(
        fmt::format("unknown loss '{}' (expected l2, l1, huber, quantile or lp)", text));
}

std::string LossSpec::family() const {
    return std::visit(overloaded{
                          [](const loss::L2&) { return std::string("l2"); },
                          [](const loss::L1&) { return std::string("l1"); },
                          [](const loss::Huber&) { return std::string("huber"); },
                          [](const loss::Quantile&) { return std::string("quantile"); },
                          [](const loss::Lp&) { return std::string("lp"); },
                      },
                      v_);
}

std::string LossSpec::to_string() const {
    return std::visit(overloaded{
                          [](const loss::L2&) { return std::string("l2"); },
                          [](const loss::L1&) { return std::string("l1"); },
                          [](const loss::Huber& h) { return fmt::format("huber:{}", h.delta); },
                          [](const loss::Quantile& q) { return fmt::format("quantile:{}", q.tau); },
                          [](const loss::Lp& l) { return fmt::format("lp:{}", l.p); },
                      },
                      v_);
}

std::string LossSpec::display_name() const {
    return std::visit(overloaded{
                          [](const loss::L2&) { return std::string("l2-norm loss"); },
                          [](const loss::L1&) { return std::string("l1-norm loss"); },
                          [](const loss::Huber&) { return std::string("Huber loss"); },
                          [](const loss::Quantile&) { return std::string("Quantile loss"); },
                          [](const loss::Lp& l) { return fmt::format("lp-norm loss (p={:.3g})", l.p); },
                      },
                      v_);
}

bool LossSpec::is_convex() const { return !is<loss::Lp>(); }

bool operator==(const LossSpec& a, const LossSpec& b) { return a.to_string() == b.to_string(); }

double eval_loss(const LossSpec& spec, double eps) {
    return std::visit(overloaded{
                          [eps](const loss::L2&) { return eps * eps; },
                          [eps](const loss::L1&) { return std::abs(eps); },
                          [eps](const loss::Huber& h) {
                              const double a = std::abs(eps);
                              return a <= h.delta ? eps * eps : h.delta * (2.0 * a - h.delta);
                          },
                          [eps](const loss::Quantile& q) {
                              return eps >= 0.0 ? q.tau * eps : (q.tau - 1.0) * eps;
                          },
                          [eps](const loss::Lp& l) { return std::pow(std::abs(eps), l.p); },
                      },
                      spec.variant());
}

double total_objective(const LossSpec& spec, std::span<const double> residuals) {
    double sum = 0.0;
    for (double r : residuals) sum += eval_loss(spec, r);
    return sum;
}

double irls_weight(const LossSpec& spec, double eps, double smoothing) {
    if (smoothing < 0.0) throw std::invalid_argument("IRLS smoothing must be non-negative");
    return std::visit(
        overloaded{
            [](const loss::L2&) { return 1.0; },
            [&](const loss::Huber& h) {
                const double denom = std::max(std::abs(eps), smoothing);
                return denom <= h.delta ? 1.0 : h.delta / denom;
            },
            [&](const loss::L1&) {
                const double base = eps * eps + smoothing;
                if (base <= 0.0) throw std::domain_error("L1 IRLS weight singular at eps = 0");
                return 1.0 / std::sqrt(base);
            },
            [&](const loss::Lp& l) {
                const double base = eps * eps + smoothing;
                if (base <= 0.0) throw std::domain_error("Lp IRLS weight singular at eps = 0");
                return std::pow(base, (l.p - 2.0) / 2.0);
            },
            [&](const loss::Quantile& q) {
                const double denom = std::max(std::abs(eps), smoothing);
                if (denom <= 0.0) throw std::domain_error("quantile IRLS weight singular at eps = 0");
                return (eps < 0.0 ? 1.0 - q.tau : q.tau) / denom;
            },
        },
        spec.variant());
}

}  // namespace tailedts
