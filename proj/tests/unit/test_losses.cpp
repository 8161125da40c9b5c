#include "tailedts/losses.hpp"

#include "../support.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace tailedts;

TEST_CASE("closed-form loss values") {
    CHECK(eval_loss(LossSpec::l2(), -3.0) == doctest::Approx(9.0).epsilon(1e-12));
    CHECK(eval_loss(LossSpec::l1(), -2.5) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(eval_loss(LossSpec::huber(1.0), 0.5) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(eval_loss(LossSpec::huber(1.0), 3.0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(eval_loss(LossSpec::huber(2.0), -5.0) == doctest::Approx(16.0).epsilon(1e-12));
    CHECK(eval_loss(LossSpec::quantile(0.3), 2.0) == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(eval_loss(LossSpec::quantile(0.3), -2.0) == doctest::Approx(1.4).epsilon(1e-12));
    CHECK(eval_loss(LossSpec::lp(0.5), 4.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(eval_loss(LossSpec::lp(0.5), -9.0) == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(eval_loss(LossSpec::lp(0.5), 0.0) == 0.0);
}

TEST_CASE("total objective sums per-residual losses") {
    const std::vector<double> r{1.0, -2.0, 0.5, 4.0};
    CHECK(total_objective(LossSpec::l2(), r) == doctest::Approx(1 + 4 + 0.25 + 16));
    CHECK(total_objective(LossSpec::huber(1.0), r) == doctest::Approx(1 + 3 + 0.25 + 7));
}

TEST_CASE("hyperparameters are validated") {
    CHECK_THROWS_AS(LossSpec::huber(0.0), std::invalid_argument);
    CHECK_THROWS_AS(LossSpec::quantile(1.0), std::invalid_argument);
    CHECK_THROWS_AS(LossSpec::quantile(0.0), std::invalid_argument);
    CHECK_THROWS_AS(LossSpec::lp(1.0), std::invalid_argument);
    CHECK_THROWS_AS(LossSpec::lp(0.0), std::invalid_argument);
    CHECK_THROWS_AS(LossSpec::parse("huber:-1"), std::invalid_argument);
    CHECK_THROWS_AS(LossSpec::parse("cauchy"), std::invalid_argument);
}

TEST_CASE("parse and to_string round-trip") {
    for (const char* text : {"l2", "l1", "huber:1", "quantile:0.3", "lp:0.5", "huber:0.25"}) {
        const LossSpec s = LossSpec::parse(text);
        CHECK(LossSpec::parse(s.to_string()) == s);
    }
    CHECK(LossSpec::parse("huber") == LossSpec::huber(1.0));
    CHECK(LossSpec::parse("quantile") == LossSpec::quantile(0.3));
    CHECK(LossSpec::parse("lp") == LossSpec::lp(0.5));
    CHECK(LossSpec::huber(1.0).display_name() == "Huber loss");
}

TEST_CASE("convexity flags") {
    CHECK(LossSpec::l2().is_convex());
    CHECK(LossSpec::l1().is_convex());
    CHECK(LossSpec::huber(1.0).is_convex());
    CHECK(LossSpec::quantile(0.3).is_convex());
    CHECK_FALSE(LossSpec::lp(0.5).is_convex());
}

TEST_CASE("property: Huber is continuous at the threshold") {
    testsupport::Rng rng(11);
    for (int i = 0; i < 1000; ++i) {
        const double delta = testsupport::uniform(rng, 1e-3, 1e3);
        const LossSpec h = LossSpec::huber(delta);
        for (double sign : {-1.0, 1.0}) {
            const double at = eval_loss(h, sign * delta);
            const double outer = delta * (2.0 * delta - delta);
            CHECK(std::abs(at - delta * delta) <= 1e-12 * delta * delta);
            CHECK(std::abs(outer - delta * delta) <= 1e-12 * delta * delta);
            const double above = eval_loss(h, sign * std::nextafter(delta, 2 * delta));
            CHECK(std::abs(above - at) <= 1e-12 * delta * delta);
        }
    }
}

TEST_CASE("property: quantile at one half is half the absolute value") {
    testsupport::Rng rng(12);
    const LossSpec q = LossSpec::quantile(0.5);
    for (int i = 0; i < 1000; ++i) {
        const double e = testsupport::uniform(rng, -1e4, 1e4);
        CHECK(eval_loss(q, e) == doctest::Approx(std::abs(e) / 2).epsilon(1e-14));
    }
}

TEST_CASE("property: symmetry of the symmetric losses") {
    testsupport::Rng rng(13);
    const std::vector<LossSpec> symmetric{LossSpec::l2(), LossSpec::l1(), LossSpec::huber(0.7), LossSpec::lp(0.3)};
    const LossSpec skewed = LossSpec::quantile(0.2);
    int asymmetric_seen = 0;
    for (int i = 0; i < 500; ++i) {
        const double e = testsupport::uniform(rng, -50.0, 50.0);
        for (const auto& s : symmetric) CHECK(eval_loss(s, e) == eval_loss(s, -e));
        if (e != 0.0 && eval_loss(skewed, e) != eval_loss(skewed, -e)) ++asymmetric_seen;
    }
    CHECK(asymmetric_seen == 500);
}

TEST_CASE("property: random chords of the convex losses lie above the curve") {
    testsupport::Rng rng(14);
    const std::vector<LossSpec> convex{LossSpec::l2(), LossSpec::l1(), LossSpec::huber(1.3),
                                       LossSpec::quantile(0.3), LossSpec::quantile(0.8)};
    for (int i = 0; i < 2000; ++i) {
        const double a = testsupport::uniform(rng, -10.0, 10.0);
        const double b = testsupport::uniform(rng, -10.0, 10.0);
        const double t = testsupport::uniform(rng, 0.0, 1.0);
        for (const auto& s : convex) {
            const double chord = t * eval_loss(s, a) + (1 - t) * eval_loss(s, b);
            CHECK(eval_loss(s, t * a + (1 - t) * b) <= chord + 1e-12 * (1 + std::abs(chord)));
        }
    }
}

TEST_CASE("Lp below one violates convexity on a chord straddling zero") {
    for (double p : {0.2, 0.5, 0.9}) {
        const LossSpec s = LossSpec::lp(p);
        // rho(1) = 1 exceeds the chord value 2^p / 2 whenever p < 1.
        CHECK(eval_loss(s, 1.0) > 0.5 * eval_loss(s, 0.0) + 0.5 * eval_loss(s, 2.0));
    }
}

TEST_CASE("property: IRLS weights are non-increasing in the residual magnitude") {
    testsupport::Rng rng(15);
    const std::vector<LossSpec> robust{LossSpec::huber(1.0), LossSpec::l1(), LossSpec::lp(0.5),
                                       LossSpec::quantile(0.3)};
    for (int i = 0; i < 1000; ++i) {
        const double small = testsupport::uniform(rng, 0.0, 5.0);
        const double large = small + testsupport::uniform(rng, 0.0, 5.0);
        const double smoothing = testsupport::uniform(rng, 1e-6, 1.0);
        for (double sign : {-1.0, 1.0}) {
            for (const auto& s : robust) {
                CHECK(irls_weight(s, sign * large, smoothing) <= irls_weight(s, sign * small, smoothing));
            }
        }
    }
}

TEST_CASE("IRLS weights match the closed forms") {
    CHECK(irls_weight(LossSpec::huber(1.0), 0.5, 0.0) == 1.0);
    CHECK(irls_weight(LossSpec::huber(1.0), -4.0, 0.0) == doctest::Approx(0.25));
    CHECK(irls_weight(LossSpec::lp(0.5), 3.0, 7.0) == doctest::Approx(std::pow(16.0, -0.75)));
    CHECK(irls_weight(LossSpec::l1(), 3.0, 16.0) == doctest::Approx(0.2));
    CHECK(irls_weight(LossSpec::quantile(0.3), 2.0, 0.0) == doctest::Approx(0.15));
    CHECK(irls_weight(LossSpec::quantile(0.3), -2.0, 0.0) == doctest::Approx(0.35));
    CHECK_THROWS_AS(irls_weight(LossSpec::l1(), 0.0, 0.0), std::domain_error);
    CHECK_THROWS_AS(irls_weight(LossSpec::l1(), 1.0, -1.0), std::invalid_argument);
}
