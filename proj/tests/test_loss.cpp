#include "doctest.h"

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "ghmcw/loss.hpp"
#include "oracles.hpp"

namespace oracle = ghmcw::oracle;

TEST_CASE("log_sum_exp is max-shifted") {
    const std::vector<double> big{1000.0, 1000.0};
    CHECK(ghmcw::log_sum_exp(big) == doctest::Approx(1000.0 + std::log(2.0)));
    const std::vector<double> small{-1000.0, -1000.0};
    CHECK(ghmcw::log_sum_exp(small) == doctest::Approx(-1000.0 + std::log(2.0)));
}

TEST_CASE("margin softmax by hand") {
    const std::vector<double> z{0.0, 0.0};
    const std::vector<double> row{0.0, -std::log(2.0)};
    const auto p = ghmcw::margin_softmax(z, row);
    CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(ghmcw::margin_loss_forward(z, 0, 1.0, row) == doctest::Approx(std::log(1.5)).epsilon(1e-14));
}

TEST_CASE("extreme logits stay finite") {
    const std::vector<double> z{1000.0, 1000.0};
    const std::vector<double> row{0.0, 0.0};
    const double loss = ghmcw::margin_loss_forward(z, 0, 1.0, row);
    CHECK(loss == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    const auto grad = ghmcw::margin_loss_backward(z, 0, 1.0, row);
    CHECK(grad[0] == doctest::Approx(-0.5));
    CHECK(grad[1] == doctest::Approx(0.5));

    const std::vector<double> far{-800.0, 800.0};
    CHECK(ghmcw::margin_loss_forward(far, 0, 1.0, row) == doctest::Approx(1600.0));
    CHECK(ghmcw::gradient_norm(far, 0, row) == 1.0);
    CHECK(ghmcw::gradient_norm(far, 1, row) == 0.0);
}

TEST_CASE("gradient norm of a confidently wrong example") {
    const std::vector<double> z{0.0, 10.0};
    const std::vector<double> row{0.0, 0.0};
    CHECK(ghmcw::gradient_norm(z, 0, row) == doctest::Approx(0.9999546021312976).epsilon(1e-12));
}

TEST_CASE("gradient norm keeps precision near zero") {
    const std::vector<double> z{40.0, 0.0};
    const std::vector<double> row{0.0, 0.0};
    const double g = ghmcw::gradient_norm(z, 0, row);
    CHECK(g > 0.0);
    CHECK(g == doctest::Approx(std::exp(-40.0)).epsilon(1e-10));
}

TEST_CASE("analytic gradient matches central differences") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto c = oracle::random_case(rng);
        const auto f = [&](std::span<const double> z) {
            return ghmcw::margin_loss_forward(z, c.label, c.weight, c.margins);
        };
        const auto numeric = oracle::central_difference(f, c.logits, 1e-5);
        const auto analytic = ghmcw::margin_loss_backward(c.logits, c.label, c.weight, c.margins);
        CAPTURE(trial);
        CHECK(oracle::relative_error(analytic, numeric, 1e-3) < 1e-6);
    }
}

TEST_CASE("unit weight and zero margins reduce to cross-entropy") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        auto c = oracle::random_case(rng);
        const std::vector<double> zero(c.logits.size(), 0.0);
        const double loss = ghmcw::margin_loss_forward(c.logits, c.label, 1.0, zero);
        const double reference = oracle::softmax_ce(c.logits, c.label);
        CHECK(std::abs(loss - reference) <= 1e-12 * std::max(1.0, std::abs(reference)));
    }
}

TEST_CASE("shift invariance") {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> shift(-50.0, 50.0);
    for (int trial = 0; trial < 200; ++trial) {
        const auto c = oracle::random_case(rng);
        auto moved = c.logits;
        const double k = shift(rng);
        for (double& v : moved) v += k;
        const double a = ghmcw::margin_loss_forward(c.logits, c.label, c.weight, c.margins);
        const double b = ghmcw::margin_loss_forward(moved, c.label, c.weight, c.margins);
        CHECK(std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(a)));
        const auto ga = ghmcw::margin_loss_backward(c.logits, c.label, c.weight, c.margins);
        const auto gb = ghmcw::margin_loss_backward(moved, c.label, c.weight, c.margins);
        for (std::size_t n = 0; n < ga.size(); ++n) CHECK(std::abs(ga[n] - gb[n]) <= 1e-10 * c.weight);
    }
}

TEST_CASE("per-example gradient sums to zero") {
    std::mt19937_64 rng(29);
    for (int trial = 0; trial < 200; ++trial) {
        const auto c = oracle::random_case(rng);
        const auto g = ghmcw::margin_loss_backward(c.logits, c.label, c.weight, c.margins);
        const double sum = std::accumulate(g.begin(), g.end(), 0.0);
        CHECK(std::abs(sum) <= 1e-10 * c.weight);
        const double norm = ghmcw::gradient_norm(c.logits, c.label, c.margins);
        CHECK(norm >= 0.0);
        CHECK(norm <= 1.0);
        CHECK(-g[c.label] == doctest::Approx(c.weight * norm).epsilon(1e-9));
    }
}

TEST_CASE("more negative margins lower the loss") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 200; ++trial) {
        auto c = oracle::random_case(rng);
        std::size_t other = (c.label + 1) % c.logits.size();
        const double before = ghmcw::margin_loss_forward(c.logits, c.label, c.weight, c.margins);
        c.margins[other] -= 0.5;
        const double after = ghmcw::margin_loss_forward(c.logits, c.label, c.weight, c.margins);
        CHECK(after < before);
    }
}

TEST_CASE("invalid inputs") {
    const std::vector<double> z{0.0, 1.0};
    const std::vector<double> row{0.0, 0.0};
    const std::vector<double> bad{0.0, std::numeric_limits<double>::quiet_NaN()};
    const std::vector<double> inf{0.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(ghmcw::margin_loss_forward(bad, 0, 1.0, row), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::margin_loss_forward(inf, 0, 1.0, row), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::margin_loss_forward(z, 2, 1.0, row), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::margin_loss_forward(z, 0, 0.0, row), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::margin_loss_forward(z, 0, -1.0, row), std::invalid_argument);
    const std::vector<double> short_row{0.0};
    CHECK_THROWS_AS(ghmcw::margin_loss_backward(z, 0, 1.0, short_row), std::invalid_argument);
    CHECK_THROWS_AS(ghmcw::gradient_norm(bad, 0, row), std::invalid_argument);
}

TEST_CASE("LossConfig validation") {
    ghmcw::LossConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.alpha == 0.9);
    CHECK(cfg.gamma == 0.8);
    CHECK(cfg.region_count == 30);
    cfg.alpha = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.alpha = 1.01;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.gamma = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.region_count = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = {};
    cfg.width_shift = 1.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("batch_loss") {
    const std::size_t classes = 3;
    const std::vector<double> logits{2.0, 0.5, -1.0, 0.0, 0.0, 0.0, -3.0, 1.0, 4.0, 0.3, 0.2, 0.1};
    const std::vector<std::size_t> labels{0, 1, 2, 1};
    ghmcw::LossConfig cfg;

    SUBCASE("cold start is mean cross-entropy") {
        const auto r = ghmcw::batch_loss(logits, classes, labels, nullptr, nullptr, cfg);
        double expected = 0.0;
        for (std::size_t b = 0; b < labels.size(); ++b) {
            expected += oracle::softmax_ce(std::span<const double>(logits).subspan(b * classes, classes), labels[b]);
        }
        expected /= 4.0;
        CHECK(r.loss == doctest::Approx(expected).epsilon(1e-12));
        for (double w : r.weights) CHECK(w == 1.0);
        REQUIRE(r.gradients.size() == logits.size());
        REQUIRE(r.gradient_norms.size() == 4);
    }

    SUBCASE("gradients are those of the mean loss") {
        std::vector<ghmcw::AdaptiveHistogram> snaps;
        for (std::size_t c = 0; c < classes; ++c) {
            ghmcw::AdaptiveHistogram h(5);
            for (std::size_t k = 0; k <= 3 * c; ++k) h.accumulate(0.1 + 0.2 * static_cast<double>(k % 5));
            snaps.push_back(h);
        }
        const ghmcw::CategoryStats stats(snaps, 0.9);
        const auto margins = ghmcw::margin_matrix(stats, 0.8);
        const auto r = ghmcw::batch_loss(logits, classes, labels, &stats, &margins, cfg);
        const auto f = [&](std::span<const double> z) {
            // weights depend on z through g; freeze them at the evaluated values
            double total = 0.0;
            for (std::size_t b = 0; b < labels.size(); ++b) {
                total += ghmcw::margin_loss_forward(z.subspan(b * classes, classes), labels[b], r.weights[b],
                                                    margins.row(labels[b]));
            }
            return total / static_cast<double>(labels.size());
        };
        const auto numeric = oracle::central_difference(f, logits, 1e-5);
        CHECK(oracle::relative_error(r.gradients, numeric, 1e-3) < 1e-6);
        CHECK(r.loss == doctest::Approx(f(logits)).epsilon(1e-14));
        for (std::size_t b = 0; b < labels.size(); ++b) {
            const double g = ghmcw::gradient_norm(std::span<const double>(logits).subspan(b * classes, classes),
                                                  labels[b], margins.row(labels[b]));
            CHECK(r.gradient_norms[b] == g);
            CHECK(r.weights[b] == stats.example_weight(labels[b], g));
        }
    }

    SUBCASE("flags switch weights and margins independently") {
        ghmcw::AdaptiveHistogram big(4), small(4);
        for (int k = 0; k < 40; ++k) big.accumulate(0.01);
        big.accumulate(0.9);
        small.accumulate(0.5);
        const ghmcw::CategoryStats stats({big, small, small}, 0.9);
        const auto margins = ghmcw::margin_matrix(stats, 0.8);

        cfg.intra_balance = false;
        cfg.inter_balance = false;
        const auto plain = ghmcw::batch_loss(logits, classes, labels, &stats, &margins, cfg);
        const auto cold = ghmcw::batch_loss(logits, classes, labels, nullptr, nullptr, cfg);
        CHECK(plain.loss == cold.loss);

        cfg.inter_balance = true;
        const auto margin_only = ghmcw::batch_loss(logits, classes, labels, &stats, &margins, cfg);
        for (double w : margin_only.weights) CHECK(w == 1.0);
        CHECK(margin_only.loss < plain.loss);

        cfg.inter_balance = false;
        cfg.intra_balance = true;
        const auto weight_only = ghmcw::batch_loss(logits, classes, labels, &stats, &margins, cfg);
        CHECK(weight_only.weights[0] != 1.0);
        for (std::size_t b = 0; b < labels.size(); ++b) CHECK(weight_only.gradient_norms[b] == plain.gradient_norms[b]);

        cfg.normalize_batch_weights = true;
        const auto normalized = ghmcw::batch_loss(logits, classes, labels, &stats, &margins, cfg);
        const double mean = std::accumulate(normalized.weights.begin(), normalized.weights.end(), 0.0) / 4.0;
        CHECK(mean == doctest::Approx(1.0).epsilon(1e-14));
    }

    SUBCASE("bad shapes") {
        CHECK_THROWS_AS(ghmcw::batch_loss({}, classes, {}, nullptr, nullptr, cfg), std::invalid_argument);
        CHECK_THROWS_AS(ghmcw::batch_loss(std::span<const double>(logits).first(11), classes, labels, nullptr,
                                          nullptr, cfg),
                        std::invalid_argument);
        const ghmcw::MarginMatrix wrong(2);
        CHECK_THROWS_AS(ghmcw::batch_loss(logits, classes, labels, nullptr, &wrong, cfg), std::invalid_argument);
    }
}
