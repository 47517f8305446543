#pragma once

#include <numbers>

namespace qdet {

/// Internal units: energies in kelvin, time in nanoseconds, flux in units of
/// the flux quantum. Planck's constant only enters as hbar / k_B.
struct UnitSystem {
    double hbar_over_kB = 7.638232577e-3;       // K ns
    double flux_quantum = 2.067833848e-15;      // Wb
    double kB_over_h_GHz_per_K = 20.83661912;   // GHz / K
    double boltzmann = 1.380649e-23;            // J / K
    double hbar = 1.054571817e-34;              // J s

    /// hbar/kB * kB/h * 2 pi, which must be one.
    double consistency_ratio() const {
        return hbar_over_kB * kB_over_h_GHz_per_K * 2.0 * std::numbers::pi;
    }
};

inline constexpr UnitSystem kUnits{};

/// Converts an energy-valued rate (K) to an angular rate in 1/ns.
inline double rate_from_energy(double energy_K) { return energy_K / kUnits.hbar_over_kB; }

} // namespace qdet
