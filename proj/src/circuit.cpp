#include "qdet/circuit.hpp"

#include "qdet/errors.hpp"
#include "qdet/units.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace qdet {

namespace {

constexpr double kPi = std::numbers::pi;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

} // namespace

void CircuitParams::validate() const {
    if (!positive_finite(u0_K))
        throw DomainError("u0_K must be positive, got " + std::to_string(u0_K));
    if (!positive_finite(beta_L))
        throw DomainError("beta_L must be positive, got " + std::to_string(beta_L));
    if (!positive_finite(mass_invK))
        throw DomainError("mass_invK must be positive, got " + std::to_string(mass_invK));
    if (!std::isfinite(x_e))
        throw DomainError("x_e must be finite");
}

bool CircuitParams::in_nominal_double_well_window() const {
    return beta_L > 1.0 / kPi && beta_L < 2.48;
}

double PhysicalCircuit::josephson_energy_J() const {
    return kUnits.flux_quantum * critical_current_A / (2.0 * kPi);
}

CircuitParams from_physical(const PhysicalCircuit& c, double x_e) {
    if (!positive_finite(c.inductance_H) || !positive_finite(c.capacitance_F) ||
        !positive_finite(c.critical_current_A))
        throw DomainError("physical circuit elements L, C, Ic must all be positive");
    const double phi0 = kUnits.flux_quantum;
    const double kB = kUnits.boltzmann;
    const double hbar = kUnits.hbar;
    const double reduced = phi0 / (2.0 * kPi);

    CircuitParams p;
    p.u0_K = reduced * reduced / (kB * c.inductance_H);
    p.mass_invK = kB * phi0 * phi0 * c.capacitance_F / (hbar * hbar);
    p.beta_L = 2.0 * kPi * c.inductance_H * c.critical_current_A / phi0;
    p.x_e = x_e;
    return p;
}

double potential_energy(double x, const CircuitParams& p) {
    const double d = x - p.x_e;
    return p.u0_K * (-p.beta_L * std::cos(2.0 * kPi * x) + 2.0 * kPi * kPi * d * d);
}

double potential_slope(double x, const CircuitParams& p) {
    return p.u0_K * (2.0 * kPi * p.beta_L * std::sin(2.0 * kPi * x) + 4.0 * kPi * kPi * (x - p.x_e));
}

double potential_curvature(double x, const CircuitParams& p) {
    return p.u0_K * 4.0 * kPi * kPi * (p.beta_L * std::cos(2.0 * kPi * x) + 1.0);
}

WellStructure classify_wells(const CircuitParams& p) {
    p.validate();
    // Stationary points satisfy |x - x_e| <= beta_L / 2 pi.
    const double reach = p.beta_L / (2.0 * kPi) + 1e-3;
    const double lo = p.x_e - reach;
    const double hi = p.x_e + reach;
    // Roots of dU/dx are at least ~1/(2 pi) apart in the cosine phase, so a
    // few thousand samples per unit flux bracket every simple root.
    const int samples = std::max(4000, static_cast<int>(8000 * (hi - lo)));
    const double tol = 1e-12 * p.u0_K;

    WellStructure ws;
    double x_prev = lo;
    double s_prev = potential_slope(lo, p);
    for (int i = 1; i <= samples; ++i) {
        const double x = lo + (hi - lo) * static_cast<double>(i) / samples;
        const double s = potential_slope(x, p);
        if ((s_prev < 0.0 && s >= 0.0) || (s_prev > 0.0 && s <= 0.0)) {
            const bool rising = s_prev < 0.0;
            double a = x_prev, b = x;
            double root = 0.5 * (a + b);
            for (int it = 0; it < 200; ++it) {
                root = 0.5 * (a + b);
                const double sm = potential_slope(root, p);
                if (std::abs(sm) < tol || b - a < 4.0 * std::numeric_limits<double>::epsilon())
                    break;
                if ((sm < 0.0) == rising)
                    a = root;
                else
                    b = root;
            }
            (rising ? ws.minima : ws.maxima).push_back(root);
            // Skip the exact-zero sample so a root on a grid point is counted once.
            if (s == 0.0) {
                x_prev = x;
                s_prev = rising ? 1.0 : -1.0;
                continue;
            }
        }
        x_prev = x;
        s_prev = s;
    }

    if (ws.minima.size() >= 2) {
        auto between = [&](double a, double b) {
            for (double m : ws.maxima)
                if (m > a && m < b)
                    return std::optional<double>(m);
            return std::optional<double>();
        };
        if (ws.minima.size() == 2) {
            ws.barrier_x = between(ws.minima[0], ws.minima[1]);
        }
        if (ws.barrier_x) {
            ws.barrier_top_K = potential_energy(*ws.barrier_x, p);
            const double deepest = std::min(potential_energy(ws.minima.front(), p),
                                            potential_energy(ws.minima.back(), p));
            ws.barrier_height_K = ws.barrier_top_K - deepest;
        }
    }
    return ws;
}

int shielding_current_sign(double mean_x) {
    // -sin(2 pi x) == sin(2 pi (x - 1/2)), which is exactly zero at one half.
    const double s = std::sin(2.0 * kPi * (mean_x - 0.5));
    return (s > 0.0) - (s < 0.0);
}

} // namespace qdet
