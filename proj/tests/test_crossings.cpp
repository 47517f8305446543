#include <catch_amalgamated.hpp>

#include "qdet/crossings.hpp"
#include "qdet/errors.hpp"
#include "qdet/flux_basis.hpp"

#include <cmath>

using namespace qdet;
using Catch::Approx;

namespace {

/// Two hyperbolic branches around x0 with minimal splitting delta and
/// asymptotic gap slope s, plus a distant spectator level.
EnergyFunction hyperbola(double x0, double delta, double s) {
    return [=](double x) {
        const double half = 0.5 * std::hypot(s * (x - x0), delta);
        Eigen::VectorXd e(3);
        e << -half, half, 10.0;
        return e;
    };
}

/// Diabatic ladder: a steep line crossing flat levels 0, 1, 2, ... at x_n = -n,
/// each crossing split by its own gap. Along decreasing x the steep state
/// climbs one adiabatic index per crossing.
EnergyFunction ladder(const std::vector<double>& gaps, double slope) {
    return [=](double x) {
        const int n = static_cast<int>(gaps.size());
        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n + 2, n + 2);
        for (int k = 0; k <= n; ++k)
            h(k, k) = k + 0.5;  // flat levels at half-integers
        h(n + 1, n + 1) = 0.5 - slope * x;
        for (int k = 0; k < n; ++k)
            h(k, n + 1) = h(n + 1, k) = 0.5 * gaps[static_cast<std::size_t>(k)];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h, Eigen::EigenvaluesOnly);
        return Eigen::VectorXd(es.eigenvalues());
    };
}

} // namespace

TEST_CASE("isolated avoided crossing is located exactly", "[crossings]") {
    const double x0 = 0.4931, delta = 1.7e-4, s = 415.0;
    const AvoidedCrossing c = find_avoided_crossing(hyperbola(x0, delta, s), 0.49, 0.50, 0);
    CHECK(c.x_star == Approx(x0).margin(1e-10));
    CHECK(c.delta_K == Approx(delta).epsilon(1e-9));
    CHECK(c.slope_diff == Approx(s).epsilon(1e-4));
    CHECK(c.lower_level == 0);
    CHECK(c.upper_level == 1);
}

TEST_CASE("tiny gaps far below the scan resolution are still resolved", "[crossings]") {
    const double delta = 3.4e-8, s = 475.0;
    const AvoidedCrossing c = find_avoided_crossing(hyperbola(0.5, delta, s), 0.491, 0.5001, 0);
    CHECK(c.delta_K == Approx(delta).epsilon(1e-3));
    CHECK(c.slope_diff == Approx(s).epsilon(1e-3));
}

TEST_CASE("a monotone gap reports NotFound", "[crossings]") {
    const EnergyFunction linear = [](double x) {
        Eigen::VectorXd e(2);
        e << 0.0, 1.0 + x;
        return e;
    };
    CHECK_THROWS_AS(find_avoided_crossing(linear, 0.0, 1.0, 0), NotFoundError);
    CHECK_THROWS_AS(find_avoided_crossing(linear, 0.5, 0.5, 0), DomainError);
    CHECK_THROWS_AS(find_avoided_crossing(linear, 0.0, 1.0, 1), DimensionError);
}

TEST_CASE("path tracing climbs the ladder crossing by crossing", "[crossings]") {
    const std::vector<double> gaps = {1e-7, 1e-6, 1e-5, 1e-4};
    const EnergyFunction e = ladder(gaps, 1.0);
    const std::vector<AvoidedCrossing> path = trace_path_crossings(e, 0.3, -3.5, 0, 4);
    REQUIRE(path.size() == 4);
    for (int n = 0; n < 4; ++n) {
        CHECK(path[n].lower_level == n);
        CHECK(path[n].upper_level == n + 1);
        CHECK(path[n].x_star == Approx(-static_cast<double>(n)).margin(1e-3));
        CHECK(path[n].delta_K == Approx(gaps[static_cast<std::size_t>(n)]).epsilon(2e-2));
        CHECK(path[n].slope_diff == Approx(1.0).epsilon(2e-2));
    }
}

TEST_CASE("reset path crossings agree between reduced basis and full grid", "[crossings][flux_basis]") {
    const CircuitParams p;
    const Grid g;
    const ReducedFluxBasis basis(p, g, 0.5001, 48);
    const EnergyFunction reduced = [&basis](double x) { return basis.energies(x, 8); };
    const std::vector<AvoidedCrossing> a = trace_path_crossings(reduced, 0.5001, 0.491, 0, 6);
    const std::vector<AvoidedCrossing> b = trace_path_crossings(p, g, 0.5001, 0.491, 0, 6);
    REQUIRE(a.size() == 6);
    REQUIRE(b.size() == 6);
    for (std::size_t n = 0; n < 6; ++n) {
        CHECK(a[n].x_star == Approx(b[n].x_star).margin(1e-8));
        CHECK(a[n].delta_K == Approx(b[n].delta_K).epsilon(1e-3));
        CHECK(a[n].slope_diff == Approx(b[n].slope_diff).epsilon(1e-3));
    }
    // Independent reference values from a 20000-point fourth-order difference solver.
    const double ref[6] = {3.37e-8, 4.48e-7, 4.07e-6, 2.90e-5, 1.71e-4, 8.52e-4};
    const double ref_x[6] = {0.5, 0.49828, 0.49656, 0.49484, 0.49312, 0.49141};
    for (std::size_t n = 0; n < 6; ++n) {
        CHECK(a[n].delta_K == Approx(ref[n]).epsilon(2e-2));
        CHECK(a[n].x_star == Approx(ref_x[n]).margin(1e-5));
    }
}

TEST_CASE("batched pair search reports failures per pair", "[crossings]") {
    const CircuitParams p;
    const std::vector<CrossingSearch> r =
        find_avoided_crossings(p, Grid{}, 0.492, 0.494, {{4, 5}, {0, 1}}, CrossingSearchOptions{});
    REQUIRE(r.size() == 2);
    REQUIRE(r[0].crossing.has_value());
    CHECK(r[0].crossing->x_star == Approx(0.49312).margin(1e-4));
    CHECK_FALSE(r[1].crossing.has_value());
    CHECK_FALSE(r[1].error.empty());
    CHECK_THROWS_AS(find_avoided_crossings(p, Grid{}, 0.492, 0.494, {{2, 4}}), DomainError);
}
