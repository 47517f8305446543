#include <catch_amalgamated.hpp>

#include "qdet/errors.hpp"
#include "qdet/lzsm.hpp"
#include "qdet/ode.hpp"
#include "qdet/units.hpp"

#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

using namespace qdet;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

CrossingChain reference_chain(double gamma) {
    CrossingChain c;
    const double deltas[6] = {3.37e-8, 4.48e-7, 4.07e-6, 2.90e-5, 1.71e-4, 8.52e-4};
    const double slopes[6] = {475.1, 462.1, 448.0, 432.5, 415.3, 395.7};
    const double xs[6] = {0.5, 0.49828, 0.49656, 0.49484, 0.49312, 0.49141};
    for (int n = 0; n < 6; ++n)
        c.crossings.push_back({deltas[n], slopes[n], xs[n]});
    c.gamma_per_ns = gamma;
    return c;
}

/// Same chain with gaps large enough that every passage is partial.
CrossingChain leaky_chain(double gamma) {
    CrossingChain c = reference_chain(gamma);
    for (int n = 0; n < 6; ++n)
        c.crossings[static_cast<std::size_t>(n)].delta_K = 0.01 + 0.004 * n;
    return c;
}

/// Generator of the nearest-neighbour cascade dp_k/dt = g p_{k+1} - g p_k (k > 0).
Eigen::MatrixXd cascade_generator(int n, double g) {
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
    for (int k = 1; k < n; ++k) {
        q(k, k) -= g;
        q(k - 1, k) += g;
    }
    return q;
}

/// Independent rate-equation solution: matrix exponentials between crossings,
/// explicit swap matrices at them.
Eigen::VectorXd expm_chain(const CrossingChain& c) {
    const int n = c.levels();
    const Eigen::MatrixXd q = cascade_generator(n, c.gamma_per_ns);
    Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
    p(0) = 1.0;
    double x = c.x_e0;
    for (int k = 0; k < n - 1; ++k) {
        const double xs = c.crossings[static_cast<std::size_t>(k)].x_star;
        p = (q * ((x - xs) / c.v_e)).exp() * p;
        const double P = c.passage(k);
        Eigen::MatrixXd s = Eigen::MatrixXd::Identity(n, n);
        s(k, k) = s(k + 1, k + 1) = 1.0 - P;
        s(k, k + 1) = s(k + 1, k) = P;
        p = s * p;
        x = xs;
    }
    return (q * ((x - c.x_e_end) / c.v_e)).exp() * p;
}

} // namespace

TEST_CASE("LZSM probability formula and its inverse", "[lzsm]") {
    const double hbar = kUnits.hbar_over_kB;
    CHECK(lzsm_probability(0.0, 1.0) == 1.0);
    CHECK(lzsm_probability(0.01, 0.1) == Approx(std::exp(-kPi * 1e-4 / (2 * hbar * 0.1))));
    CHECK(lzsm_probability(0.01, 0.1) < lzsm_probability(0.01, 0.2));
    CHECK(lzsm_probability(0.02, 0.1) < lzsm_probability(0.01, 0.1));
    const double v = min_speed_for_target(3e-3, 0.99);
    CHECK(lzsm_probability(3e-3, v) == Approx(0.99).epsilon(1e-12));
    CHECK(lzsm_probability(1e-3, v) > 0.99);
    CHECK_THROWS_AS(lzsm_probability(0.01, 0.0), DomainError);
    CHECK_THROWS_AS(lzsm_probability(-0.01, 1.0), DomainError);
    CHECK_THROWS_AS(min_speed_for_target(3e-3, 1.0), DomainError);
    CHECK_THROWS_AS(min_speed_for_target(3e-3, 0.0), DomainError);
}

TEST_CASE("two-level sweep reproduces the LZSM probability", "[lzsm][oracle]") {
    // H = [[v t / 2, D / 2], [D / 2, -v t / 2]] swept from t = -T to T.
    const double delta = 0.01, v = 0.1, T = 60.0;
    const double hbar = kUnits.hbar_over_kB;
    OdeOptions o;
    o.abs_tol = o.rel_tol = 1e-10;
    o.dt_max = 1e-2;
    MatrixIntegrator in(
        [&](const ComplexMatrix& r, ComplexMatrix& d, double t) {
            ComplexMatrix h(2, 2);
            h << 0.5 * v * t, 0.5 * delta, 0.5 * delta, -0.5 * v * t;
            d = std::complex<double>(0.0, -1.0 / hbar) * (h * r - r * h);
        },
        2, o);
    ComplexMatrix rho = ComplexMatrix::Zero(2, 2);
    rho(0, 0) = 1.0;
    double t = -T;
    in.advance(rho, t, T);
    // Diabatic survival equals the LZSM passage probability.
    CHECK(rho(0, 0).real() == Approx(lzsm_probability(delta, v)).margin(1.5e-3));
}

TEST_CASE("flux speed conversion", "[lzsm]") {
    const FluxSpeed s = flux_speed(0.18, 3e-6);
    CHECK(s.wb_per_s == Approx(0.18 * kUnits.boltzmann * 1e9 / 6e-6));
    CHECK(s.phi0_per_us == Approx(s.wb_per_s / kUnits.flux_quantum * 1e-6));
    CHECK_THROWS_AS(flux_speed(0.18, 0.0), DomainError);
    const LzsmDesign d = design_speed(3e-3, 0.99, 3e-6);
    CHECK(d.ramp_duration_us(0.5087, 0.4913) == Approx(0.0174 / d.speed.phi0_per_us));
    CHECK(d.ramp_duration_us(0.4913, 0.5087) == d.ramp_duration_us(0.5087, 0.4913));
}

TEST_CASE("AIM occupations sum to one", "[lzsm][property]") {
    for (double gap : {1e-8, 1e-3, 0.01, 0.05}) {
        CrossingChain c = reference_chain(0.0);
        for (ChainCrossing& x : c.crossings)
            x.delta_K = gap;
        const Eigen::VectorXd p = aim_final_occupations(c);
        CHECK(p.size() == 7);
        CHECK(p.sum() == Approx(1.0).epsilon(1e-14));
        CHECK(p.minCoeff() >= 0.0);
    }
    const Eigen::VectorXd p = aim_final_occupations(std::vector<double>{0.5, 0.5});
    CHECK(p(0) == 0.5);
    CHECK(p(1) == 0.25);
    CHECK(p(2) == 0.25);
    CHECK_THROWS_AS(aim_final_occupations(std::vector<double>{}), DomainError);
    CHECK_THROWS_AS(aim_final_occupations(std::vector<double>{1.5}), DomainError);
}

TEST_CASE("rate equations without relaxation equal the AIM chain exactly", "[lzsm][property]") {
    for (const CrossingChain& c : {reference_chain(0.0), leaky_chain(0.0)}) {
        const RateSolution s = rate_equation_evolve(c);
        const Eigen::VectorXd aim = aim_final_occupations(c);
        CHECK(s.final_occupations == aim);
    }
}

TEST_CASE("closed-form cascade matches the matrix exponential", "[lzsm][oracle]") {
    const int n = 7;
    Eigen::VectorXd p0(n);
    p0 << 0.05, 0.1, 0.0, 0.2, 0.15, 0.1, 0.4;
    for (double gt : {0.0, 1e-3, 0.3, 1.0, 4.5}) {
        const double gamma = 22.7, tau = gt / gamma;
        const Eigen::VectorXd ref = (cascade_generator(n, gamma) * tau).exp() * p0;
        CHECK((cascade_decay(p0, gamma, tau) - ref).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("rate-equation solver matches the matrix-exponential oracle to 1e-9", "[lzsm][oracle]") {
    for (const CrossingChain& c : {reference_chain(22.7), leaky_chain(22.7), leaky_chain(3.0)}) {
        const RateSolution s = rate_equation_evolve(c);
        CHECK((s.final_occupations - expm_chain(c)).cwiseAbs().maxCoeff() < 1e-9);
        CHECK(s.final_occupations.sum() == Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("relaxation drains the path population monotonically", "[lzsm][property]") {
    const CrossingChain c = reference_chain(22.7);
    const RateSolution s = rate_equation_evolve(c, 32);
    const Trajectory& t = s.trajectory;
    // Stamps run down the ramp.
    for (std::size_t i = 1; i < t.size(); ++i)
        CHECK(t.stamps[i] <= t.stamps[i - 1]);
    // The ground level only gains population after the first crossing.
    for (std::size_t i = 1; i < t.size(); ++i) {
        if (t.stamps[i] < c.crossings.front().x_star && t.stamps[i - 1] < c.crossings.front().x_star)
            CHECK(t.occupation(i, 0) >= t.occupation(i - 1, 0) - 1e-15);
        CHECK(t.occupations[i].sum() == Approx(1.0).epsilon(1e-12));
    }
    // With gamma > 0 the top level ends below its dissipation-free value.
    CHECK(s.final_occupations(6) < aim_final_occupations(c)(6));
}

TEST_CASE("reset estimate with dwell intervals", "[lzsm]") {
    const CrossingChain c = reference_chain(22.7);
    const std::vector<double> dwell = dwell_intervals(c);
    REQUIRE(dwell.size() == 6);
    CHECK(dwell.front() == Approx(0.5 - 0.49828));
    CHECK(dwell.back() == Approx(0.49141 - 0.491));
    double total = 0.0;
    for (double d : dwell)
        total += d;
    CHECK(total == Approx(0.5 - 0.491));
    const double est = reset_probability_estimate(c, dwell);
    double prod = 1.0;
    for (int n = 0; n < 6; ++n)
        prod *= c.passage(n);
    CHECK(est == Approx(prod * std::exp(-22.7 * total / c.v_e)));
    CHECK(est == Approx(0.638).margin(2e-3));
    // Without relaxation the estimate is the top AIM occupation.
    CHECK(reset_probability_estimate(reference_chain(0.0), dwell) ==
          Approx(aim_final_occupations(reference_chain(0.0))(6)));
    CHECK_THROWS_AS(reset_probability_estimate(c, {-1.0}), DomainError);
}

TEST_CASE("crossing chain validation", "[lzsm]") {
    CrossingChain c = reference_chain(1.0);
    CHECK_NOTHROW(c.validate());
    CHECK(c.time_of(0) == Approx((0.5001 - 0.5) / 0.454));
    CHECK(c.sweep_rate(2) == Approx(448.0 * 0.454));
    c.crossings[2].x_star = c.crossings[1].x_star;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = reference_chain(1.0);
    c.x_e_end = 0.4915;
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = reference_chain(-1.0);
    CHECK_THROWS_AS(c.validate(), DomainError);
    c = reference_chain(1.0);
    c.crossings.clear();
    CHECK_THROWS_AS(c.validate(), DomainError);
    CHECK_THROWS_AS(rate_equation_evolve(reference_chain(1.0), 1), DomainError);
}

TEST_CASE("symmetric swap at a crossing", "[lzsm]") {
    Eigen::VectorXd p(3);
    p << 0.2, 0.5, 0.3;
    apply_crossing(p, 1, 0.25);
    CHECK(p(0) == 0.2);
    CHECK(p(1) == Approx(0.75 * 0.5 + 0.25 * 0.3));
    CHECK(p(2) == Approx(0.25 * 0.5 + 0.75 * 0.3));
}
