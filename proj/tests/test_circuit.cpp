#include <catch_amalgamated.hpp>

#include "qdet/circuit.hpp"
#include "qdet/errors.hpp"
#include "qdet/units.hpp"

#include <cmath>
#include <numbers>

using namespace qdet;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

/// Local minima and maxima of U on a uniform scan, located by discrete neighbours.
struct Scan {
    std::vector<double> minima, maxima;
};

Scan brute_force_scan(const CircuitParams& p, double lo, double hi, int n) {
    Scan s;
    const double h = (hi - lo) / (n - 1);
    double um = potential_energy(lo, p), u0 = potential_energy(lo + h, p);
    for (int i = 1; i + 1 < n; ++i) {
        const double up = potential_energy(lo + (i + 1) * h, p);
        if (u0 < um && u0 <= up)
            s.minima.push_back(lo + i * h);
        if (u0 > um && u0 >= up)
            s.maxima.push_back(lo + i * h);
        um = u0;
        u0 = up;
    }
    return s;
}

} // namespace

TEST_CASE("potential and its derivatives agree with finite differences", "[circuit]") {
    const CircuitParams p;
    for (double x : {-0.2, 0.1, 0.37, 0.5, 0.5087, 0.81, 1.2}) {
        const double h = 1e-5;
        const double fd1 = (potential_energy(x + h, p) - potential_energy(x - h, p)) / (2 * h);
        const double fd2 =
            (potential_energy(x + h, p) - 2 * potential_energy(x, p) + potential_energy(x - h, p)) / (h * h);
        CHECK(potential_slope(x, p) == Approx(fd1).epsilon(1e-8));
        CHECK(potential_curvature(x, p) == Approx(fd2).epsilon(1e-5));
    }
    CHECK(potential_energy(0.5087, p) == Approx(-p.u0_K * p.beta_L * std::cos(2 * kPi * 0.5087)));
}

TEST_CASE("classify_wells matches a dense brute-force scan", "[circuit][property]") {
    const std::vector<CircuitParams> cases = {
        {32.68, 1.28, 955.0, 0.5087}, {32.68, 1.28, 955.0, 0.5}, {32.68, 2.0, 955.0, 0.47},
        {10.0, 0.6, 955.0, 0.52},     {32.68, 0.9, 955.0, 0.5},  {41.67, 3.0, 955.0, 0.5},
    };
    for (const CircuitParams& p : cases) {
        const WellStructure w = classify_wells(p);
        const Scan s = brute_force_scan(p, -1.0, 2.0, 1'000'000);
        REQUIRE(w.minima.size() == s.minima.size());
        REQUIRE(w.maxima.size() == s.maxima.size());
        for (std::size_t i = 0; i < s.minima.size(); ++i) {
            CHECK(w.minima[i] == Approx(s.minima[i]).margin(1e-5));
            CHECK(std::abs(potential_slope(w.minima[i], p)) < 1e-9 * p.u0_K);
        }
        for (std::size_t i = 0; i < s.maxima.size(); ++i)
            CHECK(w.maxima[i] == Approx(s.maxima[i]).margin(1e-5));
    }
}

TEST_CASE("reference circuit is an asymmetric double well", "[circuit]") {
    const CircuitParams p;
    const WellStructure w = classify_wells(p);
    REQUIRE(w.is_double_well());
    REQUIRE(w.barrier_x.has_value());
    CHECK(*w.barrier_x > w.minima[0]);
    CHECK(*w.barrier_x < w.minima[1]);
    CHECK(w.barrier_top_K == Approx(potential_energy(*w.barrier_x, p)));
    // x_e above one half tilts the right well down.
    CHECK(potential_energy(w.minima[1], p) < potential_energy(w.minima[0], p));
    CHECK(w.barrier_height_K > 0.0);
    CHECK(p.in_nominal_double_well_window());
}

TEST_CASE("small beta_L gives a single convex well", "[circuit]") {
    CircuitParams p;
    p.beta_L = 0.5;
    const WellStructure w = classify_wells(p);
    CHECK(w.minima.size() == 1);
    CHECK_FALSE(w.barrier_x.has_value());
    CHECK(p.in_nominal_double_well_window());
    p.beta_L = 3.0;
    CHECK_FALSE(p.in_nominal_double_well_window());
}

TEST_CASE("invalid circuit parameters are rejected", "[circuit]") {
    CircuitParams p;
    p.u0_K = -1.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = {};
    p.mass_invK = 0.0;
    CHECK_THROWS_AS(p.validate(), DomainError);
    p = {};
    p.beta_L = std::nan("");
    CHECK_THROWS_AS(p.validate(), DomainError);
    CHECK_NOTHROW(CircuitParams{}.validate());
}

TEST_CASE("physical circuit elements map onto U0, M and beta_L", "[circuit]") {
    const double phi0 = kUnits.flux_quantum;
    // Choose L and C that reproduce the reference U0 and M.
    const double L = std::pow(phi0 / (2 * kPi), 2) / (kUnits.boltzmann * 32.68);
    const double C = 955.0 * kUnits.hbar * kUnits.hbar / (kUnits.boltzmann * phi0 * phi0);
    const double Ic = 1.28 * phi0 / (2 * kPi * L);
    const CircuitParams p = from_physical({L, C, Ic}, 0.5087);
    CHECK(p.u0_K == Approx(32.68).epsilon(1e-12));
    CHECK(p.mass_invK == Approx(955.0).epsilon(1e-12));
    CHECK(p.beta_L == Approx(1.28).epsilon(1e-12));
    CHECK(p.x_e == 0.5087);
    // beta_L = L Ic 2 pi / Phi0 is also the ratio of E_J to the magnetic energy.
    const PhysicalCircuit pc{L, C, Ic};
    CHECK(pc.josephson_energy_J() / (kUnits.boltzmann * p.u0_K) == Approx(p.beta_L).epsilon(1e-12));
    CHECK_THROWS_AS(from_physical({0.0, C, Ic}, 0.5), DomainError);
}

TEST_CASE("shielding current sign follows the mean flux", "[circuit]") {
    CHECK(shielding_current_sign(0.3) == -1);
    CHECK(shielding_current_sign(0.7) == 1);
    CHECK(shielding_current_sign(0.5) == 0);
}

TEST_CASE("unit constants are self-consistent", "[units]") {
    CHECK(kUnits.consistency_ratio() == Approx(1.0).epsilon(1e-8));
    CHECK(kUnits.hbar / kUnits.boltzmann * 1e9 == Approx(kUnits.hbar_over_kB).epsilon(1e-9));
    CHECK(rate_from_energy(0.1) == Approx(13.092).epsilon(1e-4));
}
