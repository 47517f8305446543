#pragma once

#include "qdet/density_matrix.hpp"
#include "qdet/ode.hpp"
#include "qdet/spectral.hpp"
#include "qdet/trajectory.hpp"

#include <Eigen/Dense>

#include <functional>

namespace qdet {

/// Semiclassical drive of the working pair plus relaxation and dephasing.
/// Rates are energy-valued (K) and converted with hbar/kB.
struct CaptureParams {
    double g_K = 2.0;
    double alpha = 1.0;           // real coherent amplitude sqrt(<n>)
    double omega_d_per_ns = 0.0;  // drive angular frequency
    double gamma_K = 0.1;
    double gamma_phi_K = 0.0;
    int lower_level = 6;          // zero-based: level 7
    int upper_level = 7;          // zero-based: level 8
    int n_levels = 8;

    // The drive also contributes the scalar 2 A_d alpha f(t). It commutes with
    // everything, so it is carried as metadata and never enters the dynamics.
    double drive_amplitude_K = 0.0;
    std::function<double(double)> signal_shape;

    void validate(int available_levels) const;
};

/// Drive frequency resonant with the working pair of the spectrum: (E_upper - E_lower) / hbar.
double resonant_drive(const Spectrum& spec, const CaptureParams& cp);

/// H_c in K: diagonal E_j - hbar omega_d j (j counted from one), g alpha on the
/// working-pair off-diagonals.
Eigen::MatrixXd build_capture_hamiltonian(const Spectrum& spec, const CaptureParams& cp);

/// Right-hand side of the capture master equation in 1/ns.
void lindblad_rhs(const ComplexMatrix& rho, const Eigen::MatrixXd& hamiltonian_K,
                  const CaptureParams& cp, ComplexMatrix& drho);

ComplexMatrix lindblad_rhs(const ComplexMatrix& rho, const Eigen::MatrixXd& hamiltonian_K,
                           const CaptureParams& cp);

struct CaptureRun {
    double t_end_ns = 5.0;
    double dt_max_ns = 1e-2;
    double stride_ns = 1e-3;
    bool keep_matrices = false;
    OdeOptions ode{};
    InvariantTolerances tolerances{};
};

Trajectory evolve_capture(const DensityMatrix& rho0, const Spectrum& spec, const CaptureParams& cp,
                          const CaptureRun& run);

/// Angular frequency (1/ns) of the oscillation of rho_aa - rho_bb, from the
/// mean spacing of its extrema. Needs at least three extrema.
double rabi_frequency(const Trajectory& traj, int level_a, int level_b);

} // namespace qdet
