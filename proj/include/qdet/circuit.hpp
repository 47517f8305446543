#pragma once

#include <optional>
#include <vector>

namespace qdet {

/// Dimensionless rf-SQUID parameters. Energies in K, mass in 1/K, flux in Phi0.
struct CircuitParams {
    double u0_K = 32.68;
    double beta_L = 1.28;
    double mass_invK = 955.0;
    double x_e = 0.5087;

    /// Throws DomainError unless U0, beta_L and M are strictly positive and finite.
    void validate() const;

    /// The nominal operating window 1/pi < beta_L < 2.48 quoted for the
    /// two-well regime. This is a parameter-range flag only; classify_wells
    /// reports the actual stationary points of the potential.
    bool in_nominal_double_well_window() const;
};

/// Lumped circuit elements in SI units.
struct PhysicalCircuit {
    double inductance_H = 0.0;
    double capacitance_F = 0.0;
    double critical_current_A = 0.0;

    /// Josephson energy Phi0 Ic / 2 pi, in joules.
    double josephson_energy_J() const;
};

CircuitParams from_physical(const PhysicalCircuit& circuit, double x_e);

/// U(x) = U0 { -beta_L cos(2 pi x) + 2 pi^2 (x - x_e)^2 }, in K.
double potential_energy(double x, const CircuitParams& p);

/// dU/dx in K per unit flux.
double potential_slope(double x, const CircuitParams& p);

double potential_curvature(double x, const CircuitParams& p);

struct WellStructure {
    std::vector<double> minima;   // ascending
    std::vector<double> maxima;   // interior local maxima, ascending

    bool is_double_well() const { return minima.size() == 2; }

    /// Local maximum separating the two wells of a double well.
    std::optional<double> barrier_x;
    /// U at the barrier top, K.
    double barrier_top_K = 0.0;
    /// Barrier top measured from the deeper minimum, K.
    double barrier_height_K = 0.0;
};

/// Locates all stationary points of U by scanning dU/dx for sign changes and
/// bisecting each bracket until |dU/dx| < 1e-12 U0.
WellStructure classify_wells(const CircuitParams& p);

/// Sign of the shielding current -Ic sin(2 pi x) for a mean flux in (0, 1):
/// -1 below one half, +1 above, 0 at one half.
int shielding_current_sign(double mean_x);

} // namespace qdet
