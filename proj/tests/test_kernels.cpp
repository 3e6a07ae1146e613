#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "entropic/errors.hpp"
#include "entropic/funding.hpp"
#include "entropic/kernels.hpp"
#include "entropic/moments.hpp"
#include "support/oracles.hpp"

using namespace entropic;
using Catch::Approx;

namespace {

/// weights (0.6, 0.4), R_p in {+1, -1} under unit funding.
struct TwoScenarioFixture {
    ScenarioMeasure measure{{"up", "down"}, Eigen::Vector2d(0.6, 0.4)};
    MarketSlice slice;
    TwoScenarioFixture() {
        Eigen::MatrixXd p1(2, 1);
        p1 << 101.0, 99.0;
        slice = MarketSlice::unit_funding(Eigen::VectorXd::Constant(1, 100.0), p1);
    }
};

const double kClosedFormAlpha = 0.5 * std::log(1.5);

} // namespace

TEST_CASE("settlement increments for the four funding kinds", "[funding]") {
    FundingArrangement futures{FundingKind::futures, {}};
    CHECK(settlement_increment(futures, 100.0, 103.0, 1.0, 1.0, 1.0, 1.0, 0.5) == Approx(3.0));

    FundingArrangement cleared{FundingKind::cleared, 0.02};
    CHECK(settlement_increment(cleared, 100.0, 103.0, 1.0, 1.0, 1.0, 1.0, 0.5) ==
          Approx(3.0 - 100.0 * 0.02 * 0.5));

    FundingArrangement collateralised{FundingKind::collateralised, {}};
    CHECK(settlement_increment(collateralised, 100.0, 103.0, 1.0, 1.01, 1.0, 1.0, 0.5) ==
          Approx(3.0 - 100.0 * 0.01));

    FundingArrangement uncollateralised{FundingKind::uncollateralised, {}};
    CHECK(settlement_increment(uncollateralised, 100.0, 103.0, 1.0, 1.0, 1.0, 1.02, 0.5) ==
          Approx(3.0 - 100.0 * 0.02));

    FundingArrangement missing_rate{FundingKind::cleared, {}};
    CHECK_THROWS_AS(settlement_increment(missing_rate, 100.0, 103.0, 1.0, 1.0, 1.0, 1.0, 0.5),
                    Error);
}

TEST_CASE("all four kinds agree with the generic form under the implied b", "[funding][property]") {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> price(50.0, 150.0);
    std::uniform_real_distribution<double> fund(0.8, 1.25);
    for (int trial = 0; trial < 1000; ++trial) {
        const double a0 = price(rng), a1 = price(rng);
        const double b0 = fund(rng), b1 = fund(rng);
        const double u0 = fund(rng), u1 = fund(rng);
        const double dt = 0.25;
        const double rate = 0.03;
        for (FundingKind kind : {FundingKind::futures, FundingKind::cleared,
                                 FundingKind::collateralised, FundingKind::uncollateralised}) {
            FundingArrangement arr{kind, kind == FundingKind::cleared
                                             ? std::optional<double>(rate)
                                             : std::nullopt};
            const auto [f0, f1] = implied_funding(arr, b0, b1, u0, u1, 0.0, dt);
            const double generic = (a1 - a0) - (a0 / f0) * (f1 - f0);
            REQUIRE(settlement_increment(arr, a0, a1, b0, b1, u0, u1, dt) ==
                    Approx(generic).margin(1e-12));
        }
    }
}

TEST_CASE("cleared cash account compounds per period", "[funding]") {
    FundingArrangement cleared{FundingKind::cleared, 0.04};
    const auto [f0, f1] = implied_funding(cleared, 1.0, 1.0, 1.0, 1.0, /*t0=*/2.0, /*dt=*/0.5);
    CHECK(f0 == Approx(std::pow(1.0 + 0.04 * 0.5, 4.0)));
    CHECK(f1 == Approx(f0 * (1.0 + 0.04 * 0.5)));
}

TEST_CASE("linear kernel", "[kernels]") {
    TwoScenarioFixture fx;
    ScenarioMeasure equal({"up", "down"}, Eigen::Vector2d(0.5, 0.5));

    SECTION("alpha zero is the identity kernel") {
        const TiltKernel k = linear_kernel(fx.measure, fx.slice, Eigen::VectorXd::Zero(1));
        CHECK((k.values.array() - 1.0).abs().maxCoeff() == 0.0);
        CHECK_FALSE(k.has_negative);
    }

    SECTION("moderate alpha tilts without negativity") {
        const TiltKernel k = linear_kernel(equal, fx.slice, Eigen::VectorXd::Constant(1, 0.25));
        CHECK(k.values[0] == Approx(0.75));
        CHECK(k.values[1] == Approx(1.25));
        CHECK_FALSE(k.has_negative);
        CHECK(equal.expect(k.values) == Approx(1.0).margin(1e-15));
    }

    SECTION("large alpha drives the kernel negative") {
        const TiltKernel k = linear_kernel(equal, fx.slice, Eigen::VectorXd::Constant(1, 2.0));
        CHECK(k.values[0] == Approx(-1.0));
        CHECK(k.values[1] == Approx(3.0));
        CHECK(k.has_negative);
        // Normalization survives even with negative values.
        CHECK(equal.expect(k.values) == Approx(1.0).margin(1e-15));
    }
}

TEST_CASE("exponential kernel", "[kernels]") {
    TwoScenarioFixture fx;

    SECTION("alpha zero is the identity kernel") {
        const TiltKernel k = exponential_kernel(fx.measure, fx.slice, Eigen::VectorXd::Zero(1));
        CHECK((k.values.array() - 1.0).abs().maxCoeff() < 1e-15);
    }

    SECTION("closed-form tilt equalizes the skewed measure") {
        const TiltKernel k =
            exponential_kernel(fx.measure, fx.slice, Eigen::VectorXd::Constant(1, kClosedFormAlpha));
        const Eigen::VectorXd tilted = k.tilted_weights(fx.measure);
        CHECK(tilted[0] == Approx(0.5).epsilon(1e-12));
        CHECK(tilted[1] == Approx(0.5).epsilon(1e-12));
        CHECK(k.values.minCoeff() > 0.0);
        CHECK(fx.measure.expect(k.values) == Approx(1.0).margin(1e-12));
    }

    SECTION("overflow guard") {
        CHECK_THROWS_AS(
            exponential_kernel(fx.measure, fx.slice, Eigen::VectorXd::Constant(1, 800.0)), Error);
    }
}

TEST_CASE("exponential kernel agrees with linear to second order", "[kernels][property]") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 4 + static_cast<int>(rng() % 4);
        const auto measure = oracles::random_measure(rng, n);
        const auto slice = oracles::random_unit_slice(rng, n, 2, 0.5);
        const Eigen::MatrixXd rp = normalized_return(slice);
        // Shrinking alpha: the gap must fall off quadratically.
        double previous_gap = 0.0;
        for (int level = 0; level < 3; ++level) {
            const double scale = 0.04 / (1 << level);
            const Eigen::VectorXd alpha = Eigen::VectorXd::Constant(2, scale);
            const TiltKernel lin = linear_kernel(measure, slice, alpha);
            const TiltKernel expk = exponential_kernel(measure, slice, alpha);
            const double gap = (lin.values - expk.values).cwiseAbs().maxCoeff();
            const double bound = (rp * alpha).cwiseAbs().maxCoeff();
            REQUIRE(gap <= 2.0 * bound * bound + 1e-12);
            if (level > 0) REQUIRE(gap <= previous_gap / 2.5);
            previous_gap = gap;
        }
    }
}

TEST_CASE("calibrate on the closed-form fixture", "[calibration]") {
    TwoScenarioFixture fx;
    const CalibrationResult result = calibrate(fx.measure, fx.slice);
    CHECK(result.kernel.alpha[0] == Approx(kClosedFormAlpha).margin(1e-10));
    const Eigen::VectorXd tilted = result.kernel.tilted_weights(fx.measure);
    CHECK(tilted[0] == Approx(0.5).margin(1e-10));
    CHECK(tilted[1] == Approx(0.5).margin(1e-10));
    CHECK(result.residual_norm <= 1e-10);
    CHECK(result.kl == Approx(0.020410997260127572).margin(1e-9));

    // Brute-force grid search oracle over alpha.
    double best_alpha = 0.0, best = 1e300;
    for (double a = 0.0; a <= 0.5; a += 1e-6) {
        const double drift = 0.6 * std::exp(-a) - 0.4 * std::exp(a);
        if (std::abs(drift) < best) {
            best = std::abs(drift);
            best_alpha = a;
        }
    }
    CHECK(result.kernel.alpha[0] == Approx(best_alpha).margin(2e-6));
}

TEST_CASE("already-driftless measure calibrates immediately", "[calibration]") {
    ScenarioMeasure equal({"up", "down"}, Eigen::Vector2d(0.5, 0.5));
    Eigen::MatrixXd p1(2, 1);
    p1 << 101.0, 99.0;
    MarketSlice slice = MarketSlice::unit_funding(Eigen::VectorXd::Constant(1, 100.0), p1);
    const CalibrationResult result = calibrate(equal, slice);
    CHECK(result.iterations == 0);
    CHECK(result.kernel.alpha.cwiseAbs().maxCoeff() == 0.0);
    CHECK(result.kl == Approx(0.0).margin(1e-15));
}

TEST_CASE("random instances calibrate to 1e-10 and minimize KL", "[calibration][property]") {
    std::mt19937_64 rng(314159);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> drift(-0.02, 0.02);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 3 + static_cast<int>(rng() % 4);
        const int assets = 1 + static_cast<int>(rng() % 2);
        const auto measure = oracles::random_measure(rng, n);
        MarketSlice slice = oracles::random_unit_slice(rng, n, assets, 0.3);
        // Center the return cloud so zero is interior to its hull (the
        // exponential tilt is feasible), then add a modest drift.
        const Eigen::VectorXd mean = slice.p1.transpose() * measure.weights();
        slice.p1.rowwise() -= (mean - slice.p0).transpose();
        for (int a = 0; a < assets; ++a) slice.p1.col(a).array() += drift(rng);

        const ReturnMoments base =
            moments_from_measure(measure, slice, Eigen::VectorXd::Zero(n), 0.0);
        if (!check_no_arbitrage(base).pass) continue;

        const CalibrationResult result = calibrate(measure, slice);
        const Eigen::MatrixXd rp = normalized_return(slice);
        const Eigen::VectorXd tilted = result.kernel.tilted_weights(measure);
        REQUIRE((rp.transpose() * tilted).norm() <= 1e-10);

        // KL-minimality against random feasible perturbations: project a
        // random direction onto the constraint tangent space and step.
        Eigen::MatrixXd constraints(assets + 1, n);
        constraints.row(0) = measure.weights().transpose();
        for (int a = 0; a < assets; ++a) {
            constraints.row(a + 1) = measure.weights().cwiseProduct(rp.col(a)).transpose();
        }
        Eigen::LDLT<Eigen::MatrixXd> gram(constraints * constraints.transpose());
        const double kl0 = result.kl;
        for (int probe = 0; probe < 300; ++probe) {
            Eigen::VectorXd d(n);
            for (int i = 0; i < n; ++i) d[i] = gauss(rng);
            d -= constraints.transpose() * gram.solve(constraints * d);
            if (d.norm() < 1e-12) continue;
            d /= d.norm();
            const Eigen::VectorXd w = result.kernel.values + 1e-3 * d;
            if (w.minCoeff() <= 0.0) continue;
            REQUIRE(kl_divergence(measure.weights().cwiseProduct(w), measure.weights()) >=
                    kl0 - 1e-12);
        }
    }
}

TEST_CASE("newton locality: small drift converges fast and quadratically", "[calibration]") {
    std::mt19937_64 rng(271828);
    int tested = 0;
    for (int trial = 0; trial < 60 && tested < 20; ++trial) {
        const int n = 6;
        const auto measure = oracles::random_measure(rng, n);
        MarketSlice slice = oracles::random_unit_slice(rng, n, 2, 0.3);
        // Center the returns under the measure, then add a small drift so
        // the instance sits inside the Newton basin.
        const Eigen::VectorXd mean = slice.p1.transpose() * measure.weights();
        slice.p1.rowwise() -= (mean - slice.p0).transpose();
        slice.p1.array() += 5e-4;
        const ReturnMoments base =
            moments_from_measure(measure, slice, Eigen::VectorXd::Zero(n), 0.0);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(base.cov_p);
        if (eig.eigenvalues().minCoeff() <= 0.0) continue;
        if (base.mean_p.norm() / eig.eigenvalues().minCoeff() > 0.1) continue;
        ++tested;
        const CalibrationResult result = calibrate(measure, slice);
        REQUIRE(result.iterations <= 10);
        // Quadratic tail: once the residual is small, each step at least
        // squares it (up to a modest constant).
        const auto& h = result.residual_history;
        for (std::size_t k = 0; k + 1 < h.size(); ++k) {
            if (h[k] < 1e-4 && h[k] > 0.0) {
                REQUIRE(h[k + 1] <= 100.0 * h[k] * h[k] + 1e-15);
            }
        }
    }
    REQUIRE(tested >= 10);
}

TEST_CASE("arbitrage in the economic measure blocks calibration", "[calibration]") {
    // One asset that only goes up: no equivalent martingale measure.
    ScenarioMeasure measure({"a", "b"}, Eigen::Vector2d(0.5, 0.5));
    Eigen::MatrixXd p1(2, 1);
    p1 << 105.0, 105.0;
    MarketSlice slice = MarketSlice::unit_funding(Eigen::VectorXd::Constant(1, 100.0), p1);
    CHECK_THROWS_AS(calibrate(measure, slice), Error);
}

TEST_CASE("fair price one period", "[calibration]") {
    TwoScenarioFixture fx;
    const CalibrationResult cal = calibrate(fx.measure, fx.slice);

    SECTION("constant payoff prices to its ratio value") {
        const double price =
            fair_price_one_period(fx.measure, fx.slice, Eigen::Vector2d(7.0, 7.0), cal.kernel);
        CHECK(price == Approx(7.0).margin(1e-12));
    }

    SECTION("underlying reprices to market") {
        const double price = fair_price_one_period(fx.measure, fx.slice,
                                                   fx.slice.p1.col(0), cal.kernel);
        CHECK(price == Approx(100.0).margin(1e-10));
    }

    SECTION("call payoff under the calibrated measure") {
        Eigen::Vector2d payoff(1.0, 0.0); // max(p1 - 100, 0)
        const double price = fair_price_one_period(fx.measure, fx.slice, payoff, cal.kernel);
        CHECK(price == Approx(0.5).margin(1e-10));
    }

    SECTION("uncalibrated kernel is rejected") {
        const TiltKernel identity =
            exponential_kernel(fx.measure, fx.slice, Eigen::VectorXd::Zero(1));
        CHECK_THROWS_AS(
            fair_price_one_period(fx.measure, fx.slice, Eigen::Vector2d(1.0, 0.0), identity),
            Error);
    }
}

TEST_CASE("underlyings reprice under richer funding", "[calibration][property]") {
    std::mt19937_64 rng(60902);
    std::uniform_real_distribution<double> fund(0.95, 1.05);
    std::uniform_real_distribution<double> magnitude(0.05, 0.2);
    for (int trial = 0; trial < 40; ++trial) {
        const int n = 4;
        const auto measure = oracles::random_measure(rng, n);
        MarketSlice slice = oracles::random_unit_slice(rng, n, 2, 0.2);
        for (int i = 0; i < n; ++i) {
            slice.u1[i] = fund(rng);
            slice.b1[i] = slice.q1(i, 0) = slice.q1(i, 1) = fund(rng);
        }
        slice.b0 = slice.q0[0] = slice.q0[1] = 1.0;
        // Build the prices from measure-centered target returns so a
        // positive tilted measure exists: p1 = q1 p0/q0 + R u1.
        Eigen::MatrixXd target(n, 2);
        for (int i = 0; i < n; ++i) {
            // Orthogonal sign patterns (+,-,+,-) and (+,+,-,-) keep the two
            // assets well-conditioned while each column straddles zero.
            target(i, 0) = ((i % 2 == 0) ? 1.0 : -1.0) * magnitude(rng);
            target(i, 1) = ((i / 2 == 0) ? 1.0 : -1.0) * magnitude(rng);
        }
        target.rowwise() -= (target.transpose() * measure.weights()).transpose();
        target.array() += 1e-3;
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < 2; ++a) {
                slice.p1(i, a) =
                    slice.q1(i, a) * slice.p0[a] / slice.q0[a] + target(i, a) * slice.u1[i];
            }
        }

        const ReturnMoments base =
            moments_from_measure(measure, slice, Eigen::VectorXd::Zero(n), 0.0);
        if (!check_no_arbitrage(base).pass) continue;
        const CalibrationResult cal = calibrate(measure, slice);
        // Each underlying priced as a derivative (with b = q) returns its
        // market price.
        for (int a = 0; a < 2; ++a) {
            const double price =
                fair_price_one_period(measure, slice, slice.p1.col(a), cal.kernel);
            REQUIRE(price == Approx(slice.p0[a]).margin(1e-10));
        }
    }
}

TEST_CASE("numeraire drops out once u/w is a martingale", "[calibration]") {
    // The optional numeraire w never enters a pricing formula; this
    // demonstrates why. When u/w is driftless under the economic measure,
    // pricing against the numeraire (a/w a martingale) and pricing against
    // unsecured funding (the (u+du)/(w+dw) weighted condition) coincide.
    ScenarioMeasure measure({"a", "b", "c"}, Eigen::Vector3d(0.3, 0.45, 0.25));
    Eigen::VectorXd u1(3);
    u1 << 1.01, 1.03, 0.98;
    // Choose w1 = u1 / m with E[m] = 1 so that E[u1/w1] = u0/w0 = 1.
    Eigen::VectorXd m(3);
    m << 1.1, 0.9, 1.06;
    m /= measure.expect(m);
    const Eigen::VectorXd w1 = u1.cwiseQuotient(m);
    REQUIRE(measure.expect(u1.cwiseQuotient(w1)) == Approx(1.0).margin(1e-14));

    Eigen::Vector3d a1(5.0, 2.0, 7.0);
    // Numeraire route: a0 = w0 E[a1 / w1].
    const double via_numeraire = measure.expect(a1.cwiseQuotient(w1));
    // Funding route: 0 = E[(u1/w1)(a1/u1 - a0/u0)].
    const Eigen::VectorXd kernel = u1.cwiseQuotient(w1);
    const double via_funding =
        measure.expect(kernel.cwiseProduct(a1.cwiseQuotient(u1))) / measure.expect(kernel);
    CHECK(via_numeraire == Approx(via_funding).margin(1e-12));
}

TEST_CASE("maximum entropy certificate", "[calibration]") {
    TwoScenarioFixture fx;
    const CalibrationResult cal = calibrate(fx.measure, fx.slice);

    SECTION("calibrated two-scenario kernel passes with the known KL") {
        const EntropyCertificate cert =
            max_entropy_certificate(fx.measure, fx.slice, cal.kernel, 2000, 42);
        CHECK(cert.pass);
        CHECK(cert.kernel_kl == Approx(0.020410997260127572).margin(1e-9));
        CHECK(cert.worst_improvement <= 1e-12);
        CHECK(cert.stationarity_residual <= 1e-9);
    }

    SECTION("identity kernel on a driftless measure is the global minimum") {
        ScenarioMeasure equal({"up", "down"}, Eigen::Vector2d(0.5, 0.5));
        const CalibrationResult flat = calibrate(equal, fx.slice);
        const EntropyCertificate cert =
            max_entropy_certificate(equal, fx.slice, flat.kernel, 500, 7);
        CHECK(cert.pass);
        CHECK(cert.kernel_kl == Approx(0.0).margin(1e-14));
    }

    SECTION("random 6-scenario 2-asset instance passes 1e4 trials") {
        std::mt19937_64 rng(5150);
        const auto measure = oracles::random_measure(rng, 6);
        const auto slice = oracles::random_unit_slice(rng, 6, 2, 0.25);
        const CalibrationResult result = calibrate(measure, slice);
        const EntropyCertificate cert =
            max_entropy_certificate(measure, slice, result.kernel, 10000, 99);
        CHECK(cert.pass);
    }
}
