#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "entropic/errors.hpp"
#include "entropic/io.hpp"
#include "entropic/levy.hpp"

using namespace entropic;
using Catch::Approx;

namespace {

LevyTriple gaussian_1d(double mu, double variance) {
    LevyTriple triple;
    triple.drift = Eigen::VectorXd::Constant(1, mu);
    triple.covariance = Eigen::MatrixXd::Constant(1, 1, variance);
    return triple;
}

ConvexityModel basic_model(int assets = 1) {
    ConvexityModel model;
    model.funding_ratio = 1.0;
    model.mu_s = Eigen::VectorXd::Constant(assets, 0.04);
    model.mu_c = 0.02;
    model.nu_s = 0.05 * Eigen::MatrixXd::Identity(assets, assets);
    model.nu_sc = Eigen::VectorXd::Constant(assets, 0.01);
    model.nu_c = 0.06;
    model.nu_fs = Eigen::VectorXd::Zero(assets);
    return model;
}

} // namespace

TEST_CASE("characteristic exponent closed forms", "[levy]") {
    SECTION("pure gaussian") {
        const LevyTriple triple = gaussian_1d(0.0, 0.09);
        const double k = 1.7;
        CHECK(characteristic_exponent(triple, Eigen::VectorXd::Constant(1, k)) ==
              Approx(0.5 * k * k * 0.09).epsilon(1e-14));
    }
    SECTION("pure poisson") {
        LevyTriple triple = gaussian_1d(0.0, 0.0);
        triple.jumps.push_back({Eigen::VectorXd::Constant(1, 1.0), 2.5});
        const double k = 0.8;
        CHECK(characteristic_exponent(triple, Eigen::VectorXd::Constant(1, k)) ==
              Approx(2.5 * (std::exp(k) - 1.0)).epsilon(1e-14));
    }
    SECTION("k = 0 normalizes to zero for random triples") {
        std::mt19937_64 rng(17);
        std::uniform_real_distribution<double> uniform(0.0, 1.0);
        for (int trial = 0; trial < 100; ++trial) {
            const int d = 1 + static_cast<int>(rng() % 3);
            LevyTriple triple;
            triple.drift = Eigen::VectorXd::NullaryExpr(d, [&](Eigen::Index) {
                return uniform(rng) - 0.5;
            });
            Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(
                d, d, [&](Eigen::Index, Eigen::Index) { return uniform(rng) - 0.5; });
            triple.covariance = a * a.transpose();
            for (int j = 0; j < 2; ++j) {
                triple.jumps.push_back({Eigen::VectorXd::NullaryExpr(
                                            d, [&](Eigen::Index) { return uniform(rng) - 0.5; }),
                                        uniform(rng)});
            }
            REQUIRE(characteristic_exponent(triple, Eigen::VectorXd::Zero(d)) == 0.0);
        }
    }
    SECTION("overflow guard") {
        LevyTriple triple = gaussian_1d(0.0, 0.0);
        triple.jumps.push_back({Eigen::VectorXd::Constant(1, 100.0), 1.0});
        CHECK_THROWS_AS(characteristic_exponent(triple, Eigen::VectorXd::Constant(1, 10.0)),
                        Error);
    }
}

TEST_CASE("ito exponent", "[levy]") {
    LevyTriple triple = gaussian_1d(0.03, 0.04);
    triple.jumps.push_back({Eigen::VectorXd::Constant(1, 0.2), 1.5});
    const double state = 1.3;

    SECTION("identity function reduces to the characteristic exponent") {
        FunctionJet jet;
        jet.time_derivative = 0.0;
        jet.gradient = Eigen::VectorXd::Constant(1, 1.0);
        jet.hessian = Eigen::MatrixXd::Zero(1, 1);
        jet.jump_difference = [](const Eigen::VectorXd& j) { return j[0]; };
        for (double k : {-1.0, 0.0, 0.7, 2.0}) {
            REQUIRE(ito_exponent(triple, jet, k) ==
                    Approx(characteristic_exponent(triple, Eigen::VectorXd::Constant(1, k)))
                        .margin(1e-14));
        }
    }

    SECTION("linear map pushes the triple forward") {
        const double a = 2.5, b = -0.4;
        FunctionJet jet;
        jet.time_derivative = 0.0;
        jet.gradient = Eigen::VectorXd::Constant(1, a);
        jet.hessian = Eigen::MatrixXd::Zero(1, 1);
        jet.jump_difference = [a](const Eigen::VectorXd& j) { return a * j[0]; };
        LevyTriple pushed = gaussian_1d(a * 0.03, a * a * 0.04);
        pushed.jumps.push_back({Eigen::VectorXd::Constant(1, a * 0.2), 1.5});
        for (double k : {-0.6, 0.9}) {
            REQUIRE(ito_exponent(triple, jet, k) ==
                    Approx(characteristic_exponent(pushed, Eigen::VectorXd::Constant(1, k)))
                        .margin(1e-13));
        }
        (void)b;
    }

    SECTION("f = s^2: first moment from the k-derivative at zero") {
        FunctionJet jet;
        jet.time_derivative = 0.0;
        jet.gradient = Eigen::VectorXd::Constant(1, 2.0 * state);
        jet.hessian = Eigen::MatrixXd::Constant(1, 1, 2.0);
        jet.jump_difference = [state](const Eigen::VectorXd& j) {
            return (state + j[0]) * (state + j[0]) - state * state;
        };
        // d/dk at 0 by central difference.
        const double h = 1e-6;
        const double derivative =
            (ito_exponent(triple, jet, h) - ito_exponent(triple, jet, -h)) / (2.0 * h);
        double expected = 2.0 * state * 0.03 + 0.04; // f' mu + (1/2) tr(f'' nu)
        expected += 1.5 * ((state + 0.2) * (state + 0.2) - state * state);
        CHECK(derivative == Approx(expected).margin(1e-7));
    }
}

TEST_CASE("tilt parameters", "[levy]") {
    ConvexityModel model = basic_model();
    model.jumps.push_back({0.0, Eigen::VectorXd::Constant(1, 1.0), 0.0, 2.0});

    SECTION("alpha zero leaves parameters unchanged") {
        const TiltedParameters t = tilt_parameters(model, Eigen::VectorXd::Zero(1));
        CHECK(t.mu_s[0] == model.mu_s[0]);
        CHECK(t.mu_c == model.mu_c);
        CHECK(t.jumps[0].rate == 2.0);
    }

    SECTION("girsanov drift shift without jumps") {
        ConvexityModel continuous = basic_model();
        const Eigen::VectorXd alpha = Eigen::VectorXd::Constant(1, 0.8);
        const TiltedParameters t = tilt_parameters(continuous, alpha);
        CHECK(t.mu_s[0] == Approx(continuous.mu_s[0] - 0.8 * 0.05).epsilon(1e-14));
        CHECK(t.mu_c == Approx(continuous.mu_c - 0.8 * 0.01).epsilon(1e-14));
    }

    SECTION("unit jump tilts its rate exponentially") {
        const Eigen::VectorXd alpha = Eigen::VectorXd::Constant(1, 0.6);
        const TiltedParameters t = tilt_parameters(model, alpha);
        CHECK(t.jumps[0].rate == Approx(2.0 * std::exp(-0.6)).epsilon(1e-14));
    }
}

TEST_CASE("moment rates", "[levy]") {
    SECTION("no jumps, no funding covariance") {
        const MomentRates r = moment_rates(basic_model(), Eigen::VectorXd::Zero(1));
        CHECK(r.mean_s[0] == Approx(0.04));
        CHECK(r.var_s(0, 0) == Approx(0.05));
    }

    SECTION("funding-convexity drift") {
        ConvexityModel model = basic_model();
        model.nu_f = 0.02;
        model.nu_fs = Eigen::VectorXd::Constant(1, 0.012);
        const MomentRates r = moment_rates(model, Eigen::VectorXd::Zero(1));
        CHECK(r.mean_s[0] == Approx(0.04 + 0.012).epsilon(1e-14));
    }

    SECTION("jump contributions with funding lever") {
        ConvexityModel model = basic_model();
        model.nu_f = 0.05;
        ConvexityModel::Jump jump;
        jump.jf = 0.1;
        jump.js = Eigen::VectorXd::Constant(1, 0.2);
        jump.jc = 0.3;
        jump.rate = 2.0;
        model.jumps.push_back(jump);
        const MomentRates r = moment_rates(model, Eigen::VectorXd::Zero(1));
        CHECK(r.mean_s[0] == Approx(0.04 + 1.1 * 0.2 * 2.0).epsilon(1e-14));
        CHECK(r.cov_sc[0] == Approx(0.01 + 1.1 * 1.1 * 0.2 * 0.3 * 2.0).epsilon(1e-14));
        CHECK(r.var_s(0, 0) == Approx(0.05 + 1.1 * 1.1 * 0.04 * 2.0).epsilon(1e-14));
    }
}

TEST_CASE("optimal hedge rate", "[levy]") {
    SECTION("no jumps reduces to the delta hedge") {
        const HedgeRate hedge = optimal_hedge_rate(basic_model(), Eigen::VectorXd::Zero(1));
        CHECK(hedge.beta[0] == Approx(0.01 / 0.05).epsilon(1e-14));
        CHECK(hedge.residual_variance_rate == Approx(0.06 - 0.01 * 0.01 / 0.05).epsilon(1e-12));
    }

    SECTION("tangent-aligned jumps leave the delta hedge intact") {
        ConvexityModel model = basic_model();
        const double delta = 0.01 / 0.05;
        ConvexityModel::Jump jump;
        jump.jf = 0.0;
        jump.js = Eigen::VectorXd::Constant(1, 0.25);
        jump.jc = delta * 0.25; // j_c = delta . j_s
        jump.rate = 3.0;
        model.jumps.push_back(jump);
        const DeltaGamma dg = hedge_expansion(model, Eigen::VectorXd::Zero(1));
        CHECK(dg.gamma.cwiseAbs().maxCoeff() == Approx(0.0).margin(1e-15));
        // The full optimum also stays at delta: V^-1 C with aligned jumps.
        const HedgeRate hedge = optimal_hedge_rate(model, Eigen::VectorXd::Zero(1));
        CHECK(hedge.beta[0] == Approx(delta).epsilon(1e-12));
    }

    SECTION("small-jump expansion error falls off at fourth order in J") {
        // beta - (delta + gamma) = O((J^2 Phi)^2): shrink J and watch the
        // gap drop by ~16x per halving.
        double previous = 0.0;
        for (int level = 0; level < 4; ++level) {
            const double jump_size = 0.4 / (1 << level);
            ConvexityModel model = basic_model();
            ConvexityModel::Jump jump;
            jump.jf = 0.0;
            jump.js = Eigen::VectorXd::Constant(1, jump_size);
            jump.jc = 0.7 * jump_size + 2.0 * jump_size * jump_size; // convex response
            jump.rate = 1.0;
            model.jumps.push_back(jump);

            const HedgeRate hedge = optimal_hedge_rate(model, Eigen::VectorXd::Zero(1));
            const DeltaGamma dg = hedge_expansion(model, Eigen::VectorXd::Zero(1));
            const double gap = std::abs(hedge.beta[0] - dg.delta[0] - dg.gamma[0]);
            if (level > 0) {
                REQUIRE(gap <= previous / 8.0); // comfortably super-quadratic
            }
            previous = gap;
        }
    }

    SECTION("hedge optimality against perturbations") {
        std::mt19937_64 rng(23);
        std::normal_distribution<double> gauss(0.0, 1.0);
        ConvexityModel model = basic_model(2);
        model.nu_s << 0.05, 0.01, 0.01, 0.08;
        model.nu_sc << 0.012, -0.02;
        ConvexityModel::Jump jump;
        jump.jf = 0.05;
        jump.js = Eigen::VectorXd::Zero(2);
        jump.js << 0.1, -0.15;
        jump.jc = 0.12;
        jump.rate = 0.7;
        model.jumps.push_back(jump);

        const Eigen::VectorXd alpha = Eigen::VectorXd::Zero(2);
        const HedgeRate hedge = optimal_hedge_rate(model, alpha);
        const MomentRates rates = moment_rates(model, alpha);
        auto variance_of = [&](const Eigen::VectorXd& beta) {
            return model.funding_ratio * model.funding_ratio *
                   (rates.var_c - 2.0 * beta.dot(rates.cov_sc) + beta.dot(rates.var_s * beta));
        };
        for (int trial = 0; trial < 500; ++trial) {
            Eigen::VectorXd d(2);
            d << gauss(rng), gauss(rng);
            REQUIRE(variance_of(hedge.beta + 0.01 * d) >=
                    hedge.residual_variance_rate - 1e-12);
        }
    }

    SECTION("delta hedge ignores alpha and funding volatility without jumps") {
        std::mt19937_64 rng(29);
        std::uniform_real_distribution<double> uniform(-1.0, 1.0);
        const HedgeRate reference = optimal_hedge_rate(basic_model(), Eigen::VectorXd::Zero(1));
        for (int trial = 0; trial < 50; ++trial) {
            ConvexityModel model = basic_model();
            model.nu_f = std::abs(uniform(rng));
            const Eigen::VectorXd alpha = Eigen::VectorXd::Constant(1, uniform(rng));
            const HedgeRate hedge = optimal_hedge_rate(model, alpha);
            REQUIRE(hedge.beta[0] == Approx(reference.beta[0]).margin(1e-14));
        }
    }
}

TEST_CASE("drift conditions", "[levy]") {
    SECTION("continuous diffusion solves alpha = mu_s / nu_s") {
        const DriftSolution sol = solve_drift_conditions(basic_model());
        CHECK(sol.alpha[0] == Approx(0.04 / 0.05).margin(1e-12));
        // Pricing condition residual: mu_c - alpha nu_sc.
        CHECK(sol.pricing_residual == Approx(0.02 - (0.04 / 0.05) * 0.01).margin(1e-12));
    }

    SECTION("pricing identity for continuous diffusion with funding blocks") {
        ConvexityModel model = basic_model();
        model.funding_ratio = 1.3;
        model.nu_f = 0.03;
        model.nu_fs = Eigen::VectorXd::Constant(1, 0.007);
        model.nu_fc = 0.004;
        const DriftSolution sol = solve_drift_conditions(model);
        // mu_c + nu_fc - nu_s^{-1} nu_sc (mu_s + nu_fs) must equal the
        // reported residual (the derivative drift condition).
        const double expected = 0.02 + 0.004 - (0.01 / 0.05) * (0.04 + 0.007);
        CHECK(sol.pricing_residual == Approx(expected).margin(1e-10));
    }

    SECTION("symmetric jumps with zero drift calibrate at alpha = 0") {
        ConvexityModel model = basic_model();
        model.mu_s = Eigen::VectorXd::Zero(1);
        for (double sign : {1.0, -1.0}) {
            ConvexityModel::Jump jump;
            jump.jf = 0.0;
            jump.js = Eigen::VectorXd::Constant(1, sign * 0.2);
            jump.jc = 0.0;
            jump.rate = 1.5;
            model.jumps.push_back(jump);
        }
        const DriftSolution sol = solve_drift_conditions(model);
        CHECK(sol.alpha[0] == Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("monte carlo increments match the triple", "[levy][montecarlo]") {
    LevyTriple triple;
    triple.drift = Eigen::Vector2d(0.1, -0.05);
    Eigen::Matrix2d cov;
    cov << 0.04, 0.01, 0.01, 0.09;
    triple.covariance = cov;
    triple.jumps.push_back({Eigen::Vector2d(0.3, -0.1), 1.2});
    triple.jumps.push_back({Eigen::Vector2d(-0.2, 0.25), 0.8});

    CHECK(triple.total_frequency() == Approx(2.0));
    CHECK(triple.max_jump_magnitude() == Approx(0.3));

    const double dt = 0.01;
    const IncrementStats stats = simulate_increments(triple, dt, 1000000, 424242, 1);

    // Mean and covariance rates of the increment follow from the
    // characteristic exponent derivatives at zero.
    const Eigen::VectorXd expected_mean = triple.mean_rate() * dt;
    const Eigen::MatrixXd expected_cov = triple.covariance_rate() * dt;
    for (int d = 0; d < 2; ++d) {
        REQUIRE(std::abs(stats.mean[d] - expected_mean[d]) <= 3.0 * stats.mean_std_error[d]);
    }
    // Covariance entries: compare at a loose multiple of the sampling
    // error scale sqrt(2/N) * var.
    const double n = static_cast<double>(stats.paths);
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
            const double scale =
                std::sqrt((expected_cov(r, r) * expected_cov(c, c) +
                           expected_cov(r, c) * expected_cov(r, c)) / n);
            REQUIRE(std::abs(stats.covariance(r, c) - expected_cov(r, c)) <= 4.0 * scale);
        }
    }
}

TEST_CASE("tilt consistency via monte carlo", "[levy][montecarlo]") {
    // moment_rates after tilt_parameters must agree with simulating the
    // tilted triple directly.
    ConvexityModel model = basic_model();
    model.jumps.push_back({0.0, Eigen::VectorXd::Constant(1, 0.15), 0.1, 1.0});
    const Eigen::VectorXd alpha = Eigen::VectorXd::Constant(1, 0.5);
    const MomentRates rates = moment_rates(model, alpha);
    const TiltedParameters tilted = tilt_parameters(model, alpha);

    // Build the tilted (s, c) triple with the funding row folded in
    // (f = 1, nu_f = nu_fs = nu_fc = 0 here).
    LevyTriple sc;
    sc.drift = Eigen::Vector2d(tilted.mu_s[0], tilted.mu_c);
    Eigen::Matrix2d cov;
    cov << model.nu_s(0, 0), model.nu_sc[0], model.nu_sc[0], model.nu_c;
    sc.covariance = cov;
    for (const auto& jump : tilted.jumps) {
        sc.jumps.push_back({Eigen::Vector2d(jump.js[0], jump.jc), jump.rate});
    }

    const double dt = 0.02;
    const IncrementStats stats = simulate_increments(sc, dt, 300000, 777, 1);
    REQUIRE(std::abs(stats.mean[0] - rates.mean_s[0] * dt) <= 3.0 * stats.mean_std_error[0]);
    REQUIRE(std::abs(stats.mean[1] - rates.mean_c * dt) <= 3.0 * stats.mean_std_error[1]);
    // Variance rates include the jump second moment.
    const double n = static_cast<double>(stats.paths);
    const double var_scale = rates.var_s(0, 0) * dt * std::sqrt(2.0 / n);
    REQUIRE(std::abs(stats.covariance(0, 0) - rates.var_s(0, 0) * dt) <= 5.0 * var_scale);
    const double cov_scale = std::sqrt((rates.var_s(0, 0) * rates.var_c +
                                        rates.cov_sc[0] * rates.cov_sc[0]) *
                                       dt * dt / n);
    REQUIRE(std::abs(stats.covariance(0, 1) - rates.cov_sc[0] * dt) <= 5.0 * cov_scale);
}

TEST_CASE("levy json round trip", "[levy][io]") {
    LevyTriple triple;
    triple.drift = Eigen::Vector2d(0.1, 0.2);
    triple.covariance = Eigen::Matrix2d::Identity() * 0.3;
    triple.jumps.push_back({Eigen::Vector2d(0.5, -0.5), 2.0});
    const LevyTriple back = io::levy_triple_from_json(io::levy_triple_to_json(triple));
    CHECK((back.drift - triple.drift).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.jumps.size() == 1);

    ConvexityModel model = basic_model(2);
    model.nu_s << 0.05, 0.01, 0.01, 0.08;
    model.nu_sc << 0.012, -0.02;
    const ConvexityModel back_model =
        io::convexity_model_from_json(io::convexity_model_to_json(model));
    CHECK((back_model.nu_s - model.nu_s).cwiseAbs().maxCoeff() == 0.0);
}
